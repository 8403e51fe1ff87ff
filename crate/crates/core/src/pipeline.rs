//! File-level pipeline behind the command-line tool: extract, plan,
//! validate, testgen and render.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{
    evaluate_accuracy, extract_abstract, load_reports, mock_from_reports, ExtractionClient, HttpClient, RetryPolicy,
};
use crate::model::{AccidentAbstract, CollisionLocation};
use crate::planner::{plan_scenario, FailureStage, PlanError, PlannerConfig, SiteFailure};
use crate::render::render_svg;
use crate::road::{parse_map, RoadNetwork};
use crate::scenario::Scenario;
use crate::validation::{
    check_sim, collision_oracle, generate_tests, simulate_test, ConstantVelocityAgent, Footprint, MapVerdicts,
    SimTolerances, SrrReport, DEFAULT_V_MIN,
};

pub const PLAN_REPORT: &str = "plan_report.json";
pub const SRR_REPORT: &str = "srr_report.json";
pub const SRR_TABLE: &str = "srr_table.txt";
pub const VERDICTS: &str = "verdicts.jsonl";
pub const ORACLE_VERDICTS: &str = "oracle_verdicts.jsonl";
pub const ACCURACY_CSV: &str = "accuracy.csv";
pub const EXTRACT_REPORT: &str = "extract_report.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NoResult(String),
    #[error("{0}")]
    Internal(String),
}

impl PipelineError {
    /// Process exit code: 2 input error, 3 no result, 4 internal error.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Input(_) => 2,
            PipelineError::NoResult(_) => 3,
            PipelineError::Internal(_) => 4,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMode {
    #[default]
    Mock,
    Live,
}

/// Settings of one pipeline run, read from TOML and overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub map: Option<PathBuf>,
    #[serde(rename = "abstract")]
    pub abstract_path: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub jobs: Option<usize>,
    pub mode: ExtractionMode,
    pub max_scenarios: Option<usize>,
    pub v_min_mps: f64,
    pub planner: PlannerConfig,
    pub tolerances: SimTolerances,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            map: None,
            abstract_path: None,
            reports: None,
            out: None,
            seed: None,
            deterministic: false,
            jobs: None,
            mode: ExtractionMode::Mock,
            max_scenarios: None,
            v_min_mps: DEFAULT_V_MIN,
            planner: PlannerConfig::default(),
            tolerances: SimTolerances::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Input(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        PipelineConfig::from_toml(&read(path)?)
    }

    /// Seed used for planning: the explicit seed, 0 under `deterministic`,
    /// otherwise derived from the clock.
    pub fn effective_seed(&self) -> u64 {
        match (self.seed, self.deterministic) {
            (Some(s), _) => s,
            (None, true) => 0,
            (None, false) => std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos() as u64),
        }
    }

    pub fn planner_config(&self) -> PlannerConfig {
        let mut p = self.planner.clone();
        p.solver.seed = self.effective_seed();
        if let Some(m) = self.max_scenarios {
            p.max_scenarios = m;
        }
        p
    }

    /// Runs `f` on a pool bounded by `jobs`.
    pub fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.jobs {
            None => Ok(f()),
            Some(0) => Err(PipelineError::Input("--jobs must be at least 1".into())),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map(|pool| pool.install(f))
                .map_err(|e| PipelineError::Internal(e.to_string())),
        }
    }

    fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
        value.as_ref().ok_or_else(|| PipelineError::Input(format!("missing {flag}")))
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let internal = |e: std::io::Error| PipelineError::Internal(format!("cannot write {}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(internal)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(internal)?;
    tmp.write_all(contents).map_err(internal)?;
    tmp.persist(path).map_err(|e| internal(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn load_map(path: &Path) -> Result<RoadNetwork> {
    parse_map(&read(path)?).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| PipelineError::Input(format!("cannot list {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// A file, or every `*.json` file of a directory other than the reports
/// this pipeline writes.
fn inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let own = [PLAN_REPORT, SRR_REPORT, EXTRACT_REPORT];
        Ok(json_files(path)?
            .into_iter()
            .filter(|p| !p.file_name().is_some_and(|n| own.iter().any(|o| n == *o)))
            .collect())
    } else if path.is_file() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(PipelineError::Input(format!("{} does not exist", path.display())))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractSummary {
    pub mode: ExtractionMode,
    pub written: Vec<String>,
    pub failures: BTreeMap<String, String>,
    pub accuracy_written: bool,
}

/// Extracts one abstract per report directory under `--reports`.
pub fn cmd_extract(config: &PipelineConfig) -> Result<ExtractSummary> {
    let dir = config.require(&config.reports, "--reports")?;
    let out = config.require(&config.out, "--out")?;
    if !dir.is_dir() {
        return Err(PipelineError::Input(format!("reports directory {} does not exist", dir.display())));
    }
    let reports = load_reports(dir).map_err(|e| PipelineError::Input(e.to_string()))?;
    if reports.is_empty() {
        return Err(PipelineError::Input(format!("no report.txt under {}", dir.display())));
    }
    let client: Box<dyn ExtractionClient> = match config.mode {
        ExtractionMode::Mock => Box::new(mock_from_reports(&reports)),
        ExtractionMode::Live => {
            Box::new(HttpClient::from_env().map_err(|e| PipelineError::Input(e.to_string()))?)
        }
    };
    let policy = RetryPolicy::default();
    let results: Vec<_> = config.in_pool(|| {
        reports
            .par_iter()
            .map(|r| extract_abstract(client.as_ref(), &r.report_text, &policy))
            .collect()
    })?;

    let mut written = Vec::new();
    let mut failures = BTreeMap::new();
    let mut scored: (Vec<AccidentAbstract>, Vec<AccidentAbstract>) = (Vec::new(), Vec::new());
    for (r, res) in reports.iter().zip(results) {
        match res {
            Ok(a) => {
                let name = format!("{}.json", r.name);
                write_atomic(&out.join(&name), format!("{}\n", a.to_json_pretty()).as_bytes())?;
                written.push(name);
                if let Some(g) = &r.ground_truth {
                    scored.0.push(a);
                    scored.1.push(g.clone());
                }
            }
            Err(e) => {
                failures.insert(r.name.clone(), e.to_string());
            }
        }
    }
    let accuracy_written = !scored.1.is_empty();
    if accuracy_written {
        let table = evaluate_accuracy(&scored.0, &scored.1).map_err(|e| PipelineError::Internal(e.to_string()))?;
        write_atomic(&out.join(ACCURACY_CSV), table.to_csv().as_bytes())?;
    }
    let summary = ExtractSummary { mode: config.mode, written, failures, accuracy_written };
    write_atomic(&out.join(EXTRACT_REPORT), &to_json(&summary))?;
    if summary.written.is_empty() {
        return Err(PipelineError::NoResult("no report could be extracted".into()));
    }
    Ok(summary)
}

/// Fault category of a rejected site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureBucket {
    TrajectoryPlanning,
    CrashTypeMismatch,
    Crossing,
}

const CROSSING_CHECKS: [&str; 8] = [
    "start-lane",
    "end-lane",
    "adjacent-lane",
    "direction",
    "collision-area",
    "start-roadside",
    "end-roadside",
    "start-sidewalk",
];

pub fn bucket(f: &SiteFailure) -> FailureBucket {
    let d = &f.detail;
    if d.contains("crash-band") || d.contains("crash-angle") {
        return FailureBucket::CrashTypeMismatch;
    }
    match f.stage {
        FailureStage::CollisionArea => FailureBucket::Crossing,
        FailureStage::Verification if CROSSING_CHECKS.iter().any(|k| d.starts_with(k)) => {
            FailureBucket::Crossing
        }
        _ => FailureBucket::TrajectoryPlanning,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketedFailure {
    pub site_id: String,
    pub stage: FailureStage,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractPlanReport {
    #[serde(rename = "abstract")]
    pub abstract_name: String,
    pub collision_location: Option<CollisionLocation>,
    pub scenarios: Vec<String>,
    /// The map has no site of the abstract's road type and lane count.
    pub no_candidate_site: bool,
    pub failures: BTreeMap<FailureBucket, Vec<BucketedFailure>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub seed: u64,
    pub map: String,
    pub abstracts: Vec<AbstractPlanReport>,
}

fn bucketed(failures: &[SiteFailure]) -> BTreeMap<FailureBucket, Vec<BucketedFailure>> {
    let mut out: BTreeMap<FailureBucket, Vec<BucketedFailure>> = BTreeMap::new();
    for b in [FailureBucket::TrajectoryPlanning, FailureBucket::CrashTypeMismatch, FailureBucket::Crossing] {
        out.insert(b, Vec::new());
    }
    for f in failures {
        out.entry(bucket(f)).or_default().push(BucketedFailure {
            site_id: f.site_id.clone(),
            stage: f.stage,
            detail: f.detail.clone(),
        });
    }
    out
}

/// Scenario file name: `<abstract>__<site>.json`.
pub fn scenario_file_name(abstract_name: &str, site_id: &str) -> String {
    format!("{abstract_name}__{site_id}.json")
}

/// Plans every abstract under `--abstract` on `--map`.
pub fn cmd_plan(config: &PipelineConfig) -> Result<PlanReport> {
    let abs_path = config.require(&config.abstract_path, "--abstract")?;
    let map_path = config.require(&config.map, "--map")?;
    let out = config.require(&config.out, "--out")?;
    let network = load_map(map_path)?;
    let files = inputs(abs_path)?;
    let mut abstracts = Vec::new();
    for f in &files {
        let a = AccidentAbstract::from_json(&read(f)?)
            .map_err(|e| PipelineError::Input(format!("{}: {e}", f.display())))?;
        abstracts.push((stem(f), a));
    }
    let planner = config.planner_config();
    let outcomes: Vec<_> =
        config.in_pool(|| abstracts.par_iter().map(|(_, a)| plan_scenario(a, &network, &planner)).collect())?;

    let mut report = PlanReport { seed: planner.solver.seed, map: stem(map_path), abstracts: Vec::new() };
    let mut any = false;
    let mut no_site = false;
    let mut config_error = None;
    for ((name, a), outcome) in abstracts.iter().zip(outcomes) {
        let mut entry = AbstractPlanReport {
            abstract_name: name.clone(),
            collision_location: Some(a.collision_location),
            scenarios: Vec::new(),
            no_candidate_site: false,
            failures: bucketed(&[]),
            error: None,
        };
        match outcome {
            Ok(o) => {
                for s in &o.scenarios {
                    let file = scenario_file_name(name, &s.site_id);
                    let scenario = Scenario::from_reconstruction(s);
                    write_atomic(&out.join(&file), format!("{}\n", scenario.to_json_pretty()).as_bytes())?;
                    entry.scenarios.push(file);
                }
                entry.failures = bucketed(&o.failures);
                any = true;
            }
            Err(PlanError::AllSitesInfeasible { failures }) => {
                entry.failures = bucketed(&failures);
                entry.error = Some(format!("every candidate site failed ({} sites)", failures.len()));
            }
            Err(e @ PlanError::NoCandidateSite { .. }) => {
                no_site = true;
                entry.no_candidate_site = true;
                entry.error = Some(e.to_string());
            }
            Err(e @ PlanError::Config(_)) => {
                config_error = Some(e.to_string());
                entry.error = Some(e.to_string());
            }
        }
        report.abstracts.push(entry);
    }
    write_atomic(&out.join(PLAN_REPORT), &to_json(&report))?;
    if let Some(e) = config_error {
        return Err(PipelineError::Input(e));
    }
    if !any {
        let why = if no_site { "no candidate site on the map" } else { "no abstract could be planned" };
        return Err(PipelineError::NoResult(why.into()));
    }
    Ok(report)
}

fn load_scenarios(dir: &Path) -> Result<Vec<(String, Scenario)>> {
    let mut out = Vec::new();
    for f in inputs(dir)? {
        let s = Scenario::from_json(&read(&f)?).map_err(|e| PipelineError::Input(format!("{}: {e}", f.display())))?;
        out.push((stem(&f), s));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct VerdictLine<'a> {
    scenario: &'a str,
    report: &'a str,
    #[serde(flatten)]
    verdict: &'a crate::validation::SimVerdict,
}

/// Runs SIM on every scenario under `dir` and writes the SRR report.
/// Abstracts listed in a plan report without any scenario count as
/// failures unless the map had no candidate site for them.
pub fn cmd_validate(config: &PipelineConfig, dir: &Path) -> Result<SrrReport> {
    let map_path = config.require(&config.map, "--map")?;
    let out = config.require(&config.out, "--out")?;
    let network = load_map(map_path)?;
    let scenarios = load_scenarios(dir)?;
    let tol = config.tolerances;
    let verdicts: Vec<_> =
        config.in_pool(|| scenarios.par_iter().map(|(_, s)| check_sim(s, &network, &tol)).collect())?;

    let mut per_report: BTreeMap<String, (Option<CollisionLocation>, Vec<bool>)> = BTreeMap::new();
    let mut lines = String::new();
    for ((name, s), v) in scenarios.iter().zip(verdicts) {
        let v = v.map_err(|e| PipelineError::Input(format!("{name}: {e}")))?;
        let report = name.split("__").next().unwrap_or(name).to_string();
        let location = s.abstract_.road.collision_location;
        lines.push_str(&serde_json::to_string(&VerdictLine { scenario: name, report: &report, verdict: &v }).expect("verdict serializes"));
        lines.push('\n');
        let e = per_report.entry(report).or_insert((location, Vec::new()));
        e.1.push(v.overall);
    }
    let plan_report = dir.join(PLAN_REPORT);
    if plan_report.is_file() {
        let v: serde_json::Value = serde_json::from_str(&read(&plan_report)?)
            .map_err(|e| PipelineError::Input(format!("{}: {e}", plan_report.display())))?;
        for a in v["abstracts"].as_array().into_iter().flatten() {
            let Some(name) = a["abstract"].as_str() else { continue };
            if a["no_candidate_site"].as_bool() == Some(true) {
                continue;
            }
            let location = a["collision_location"].as_str().and_then(|l| l.parse().ok());
            per_report.entry(name.to_string()).or_insert((location, Vec::new()));
        }
    }
    write_atomic(&out.join(VERDICTS), lines.as_bytes())?;

    let map_name = stem(map_path);
    let mut groups: Vec<MapVerdicts<'_>> = Vec::new();
    for loc in CollisionLocation::ALL {
        let reports: Vec<(String, Vec<bool>)> = per_report
            .iter()
            .filter(|(_, (l, _))| *l == Some(*loc))
            .map(|(k, (_, v))| (k.clone(), v.clone()))
            .collect();
        if reports.is_empty() {
            continue;
        }
        groups.push(MapVerdicts {
            label: &map_name,
            map: &map_name,
            location: *loc,
            lane_width: network.roads.first().map_or(f64::NAN, |r| r.lane_width()),
            reports,
        });
    }
    if groups.is_empty() {
        return Err(PipelineError::NoResult(format!("no scenarios under {}", dir.display())));
    }
    let srr = SrrReport::build(&groups).map_err(|e| PipelineError::Internal(e.to_string()))?;
    write_atomic(&out.join(SRR_REPORT), &to_json(&srr))?;
    write_atomic(&out.join(SRR_TABLE), srr.to_table().as_bytes())?;
    Ok(srr)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct OracleLine<'a> {
    test: &'a str,
    agent: &'static str,
    #[serde(flatten)]
    verdict: &'a crate::validation::OracleVerdict,
}

/// Writes one test case per vehicle of every scenario under `path`, and
/// the stub agent's oracle verdicts.
pub fn cmd_testgen(config: &PipelineConfig, path: &Path) -> Result<Vec<String>> {
    let out = config.require(&config.out, "--out")?;
    let scenarios = load_scenarios(path)?;
    let mut written = Vec::new();
    let mut lines = String::new();
    let agent = ConstantVelocityAgent::default();
    for (name, s) in &scenarios {
        for t in generate_tests(s, config.v_min_mps) {
            let file = format!("{name}__ego_{}.json", t.ego.id);
            write_atomic(&out.join(&file), format!("{}\n", t.to_json_pretty()).as_bytes())?;
            let trace = simulate_test(&t, &agent, config.tolerances.dt).map_err(|e| PipelineError::Internal(e.to_string()))?;
            let verdict = collision_oracle(&trace, &t.ego.id, t.oracle.v_min_mps, &Footprint::default())
                .map_err(|e| PipelineError::Internal(e.to_string()))?;
            lines.push_str(
                &serde_json::to_string(&OracleLine { test: &file, agent: "constant-velocity", verdict: &verdict })
                    .expect("verdict serializes"),
            );
            lines.push('\n');
            written.push(file);
        }
    }
    write_atomic(&out.join(ORACLE_VERDICTS), lines.as_bytes())?;
    if written.is_empty() {
        return Err(PipelineError::NoResult("no vehicle participant to use as ego".into()));
    }
    Ok(written)
}

/// Draws every scenario under `path` as SVG.
pub fn cmd_render(config: &PipelineConfig, path: &Path) -> Result<Vec<String>> {
    let map_path = config.require(&config.map, "--map")?;
    let out = config.require(&config.out, "--out")?;
    let network = load_map(map_path)?;
    let mut written = Vec::new();
    for (name, s) in load_scenarios(path)? {
        let file = format!("{name}.svg");
        write_atomic(&out.join(&file), render_svg(&s, &network).as_bytes())?;
        written.push(file);
    }
    if written.is_empty() {
        return Err(PipelineError::NoResult(format!("no scenarios under {}", path.display())));
    }
    Ok(written)
}
