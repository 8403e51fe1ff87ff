//! Site enumeration, collision areas, constraint assembly and solving.

mod hints;
mod routes;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{
    build_action_constraints, build_chain_constraints, build_crash_constraints, solve, ActionContext,
    ActionRoute, ConstraintError, ConstraintSet, ParticipantPlan, PlanSkeleton, SolveError, SolverConfig,
};
use crate::geometry::{ConvexPolygon, Vec2};
use crate::model::{AccidentAbstract, CollisionLocation, Lighting, ParticipantKind, Weather};
use crate::road::{binding_candidates, cal_max_lanes, enumerate_candidates, RoadNetwork, SiteBinding, Site};
use crate::verify::{verify_plans, VerifyInput};

pub use routes::{cross_destinations, drivable_area, opposing_lane, participant_routes, turn_destinations};

/// Planner settings; the solver block is shared with the constraint engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub solver: SolverConfig,
    /// Smallest accepted collision area, m^2.
    pub a_min: f64,
    /// Stop after this many successful sites.
    pub max_scenarios: usize,
    /// Route combinations tried per site.
    pub max_routes: usize,
    /// Geometric start points handed to the solver.
    pub hint_starts: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            solver: SolverConfig::default(),
            a_min: 1.0,
            max_scenarios: 3,
            max_routes: 4,
            hint_starts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionArea {
    /// Counter-clockwise vertices.
    pub polygon: ConvexPolygon,
    /// Participant ids whose drivable areas were intersected.
    pub source: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub weather: Weather,
    pub lighting: Lighting,
}

/// One solved reconstruction at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedScenario {
    pub abstract_: AccidentAbstract,
    pub site_id: String,
    pub binding: SiteBinding,
    pub plans: Vec<ParticipantPlan>,
    pub collision_area: CollisionArea,
    pub environment: Environment,
}

impl ReconstructedScenario {
    pub fn plan(&self, id: &str) -> Option<&ParticipantPlan> {
        self.plans.iter().find(|p| p.participant_id == id)
    }
}

/// Stage at which a site was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureStage {
    Conversion,
    Routing,
    CollisionArea,
    Constraints,
    Solver,
    Verification,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteFailure {
    pub site_id: String,
    pub stage: FailureStage,
    pub detail: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AreaError {
    #[error("drivable areas do not overlap (intersection {area:.3} m^2)")]
    NoOverlap { area: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no {location} site offers {required_lanes} lanes")]
    NoCandidateSite {
        location: CollisionLocation,
        required_lanes: u32,
    },
    #[error("every candidate site failed ({} sites)", failures.len())]
    AllSitesInfeasible { failures: Vec<SiteFailure> },
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

/// Successful scenarios plus the reasons other sites were rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub scenarios: Vec<ReconstructedScenario>,
    pub failures: Vec<SiteFailure>,
}

/// Intersection of two drivable areas.
pub fn compute_collision_area(
    striker_area: &ConvexPolygon,
    victim_area: &ConvexPolygon,
    a_min: f64,
) -> Result<ConvexPolygon, AreaError> {
    let poly = striker_area.intersection(victim_area);
    let area = if poly.is_empty() { 0.0 } else { poly.area() };
    if area < a_min {
        return Err(AreaError::NoOverlap { area });
    }
    Ok(poly)
}

fn position_bounds(network: &RoadNetwork, site: &Site, config: &SolverConfig) -> (Vec2, Vec2) {
    let pad = config.catalog.sidewalk_width + config.catalog.roadside_width + 5.0;
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Vec2| {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    };
    for r in network.site_roads(site) {
        for v in r.rect().vertices() {
            grow(*v);
        }
    }
    for v in site.junction_polygon.vertices() {
        grow(*v);
    }
    (lo - Vec2::new(pad, pad), hi + Vec2::new(pad, pad))
}

fn seed_for(base: u64, site_idx: usize, route_idx: usize) -> u64 {
    base ^ (site_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (route_idx as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

type Routes = Vec<(String, ParticipantKind, Vec<ActionRoute>)>;

/// Route combinations across participants, preferred first.
fn route_combinations(
    abs: &AccidentAbstract,
    network: &RoadNetwork,
    site: &Site,
    binding: &SiteBinding,
    cap: usize,
) -> Result<Vec<Routes>, String> {
    let mut combos: Vec<Routes> = vec![Vec::new()];
    for spec in &abs.participants {
        let b = binding
            .participant(&spec.id)
            .ok_or_else(|| format!("participant {} is unbound", spec.id))?;
        let alts = participant_routes(network, site, b, spec)?;
        let mut next = Vec::new();
        for c in &combos {
            for a in &alts {
                let mut v = c.clone();
                v.push((spec.id.clone(), spec.kind, a.clone()));
                next.push(v);
            }
        }
        combos = next;
    }
    combos.truncate(cap.max(1));
    Ok(combos)
}

/// Everything needed to solve one route combination at one site.
pub struct SiteProblem {
    pub skeleton: PlanSkeleton,
    pub set: ConstraintSet,
    pub collision_area: ConvexPolygon,
    pub routes: Vec<(String, ParticipantKind, Vec<ActionRoute>)>,
}

/// Builds the drivable areas, collision area and Groups 1-5 for one route
/// combination.
pub fn assemble_problem(
    abs: &AccidentAbstract,
    network: &RoadNetwork,
    site: &Site,
    routes: &[(String, ParticipantKind, Vec<ActionRoute>)],
    config: &PlannerConfig,
) -> Result<SiteProblem, (FailureStage, String)> {
    let cfg = &config.solver;
    let area_of = |id: &str| -> Result<ConvexPolygon, (FailureStage, String)> {
        let r = routes
            .iter()
            .find(|(p, _, _)| p == id)
            .ok_or_else(|| (FailureStage::Routing, format!("no route for {id}")))?;
        drivable_area(network, site, &r.2, &cfg.catalog).map_err(|e| (FailureStage::Constraints, e.to_string()))
    };
    let mut ca = area_of(&abs.crash.striker_id)?;
    for v in &abs.crash.victim_ids {
        ca = compute_collision_area(&ca, &area_of(v)?, config.a_min)
            .map_err(|e| (FailureStage::CollisionArea, e.to_string()))?;
    }

    let bounds = position_bounds(network, site, cfg);
    let v_max = abs.speed_limit.max(cfg.catalog.pedestrian_speed_max) + 1.0;
    let skeleton = PlanSkeleton::declare(routes, cfg, bounds, v_max);
    let mut set = skeleton.empty_set();
    let cerr = |e: ConstraintError| (FailureStage::Constraints, e.to_string());
    for pv in &skeleton.participants {
        let n = pv.actions.len();
        for (k, av) in pv.actions.iter().enumerate() {
            let ctx = ActionContext {
                network,
                site,
                participant: &pv.id,
                index: k,
                kind: pv.kind,
                collision_bound: k + 1 == n,
                collision_area: Some(&ca),
                speed_limit: abs.speed_limit,
                config: cfg,
            };
            set.extend(build_action_constraints(&skeleton, av, &ctx).map_err(cerr)?);
        }
    }
    set.extend(build_chain_constraints(&skeleton));
    set.extend(
        build_crash_constraints(&skeleton, &abs.crash.striker_id, &abs.crash.victim_ids, &ca, abs.crash.crash_type, cfg)
            .map_err(cerr)?,
    );
    Ok(SiteProblem {
        skeleton,
        set,
        collision_area: ca,
        routes: routes.to_vec(),
    })
}

/// Solves a problem from geometric hints; returns verified plans.
pub fn solve_problem(
    abs: &AccidentAbstract,
    network: &RoadNetwork,
    site: &Site,
    problem: &SiteProblem,
    config: &PlannerConfig,
    seed: u64,
) -> Result<Vec<ParticipantPlan>, (FailureStage, String)> {
    let mut cfg = config.solver.clone();
    cfg.seed = seed;
    let ctx = hints::HintContext {
        network,
        site,
        config: &cfg,
        speed_limit: abs.speed_limit,
    };
    let starts = hints::generate(
        &ctx,
        abs,
        &problem.routes,
        &problem.skeleton,
        &problem.set,
        &problem.collision_area,
        config.hint_starts,
    );
    let out = solve(&problem.set, &cfg, &starts).map_err(|e| {
        let detail = match &e {
            SolveError::Infeasible { conflict, .. } if !conflict.is_empty() => {
                let tags: Vec<String> = conflict.iter().map(|t| format!("{t} {}", t.label)).collect();
                format!("{e}; conflict: {}", tags.join(", "))
            }
            _ => e.to_string(),
        };
        (FailureStage::Solver, detail)
    })?;
    let plans = problem.skeleton.extract(&out.assignment);
    let violations = verify_plans(VerifyInput {
        network,
        site,
        abstract_: abs,
        plans: &plans,
        collision_area: &problem.collision_area,
        config: &cfg,
    });
    if let Some(v) = violations.first() {
        return Err((FailureStage::Verification, format!("{v} ({} violations)", violations.len())));
    }
    Ok(plans)
}

fn plan_site(
    abs: &AccidentAbstract,
    network: &RoadNetwork,
    site: &Site,
    site_idx: usize,
    config: &PlannerConfig,
) -> Result<ReconstructedScenario, SiteFailure> {
    let fail = |stage, detail| SiteFailure {
        site_id: site.id.clone(),
        stage,
        detail,
    };
    let bindings =
        binding_candidates(abs, network, site).map_err(|e| fail(FailureStage::Conversion, e.to_string()))?;
    let mut last = fail(FailureStage::Routing, "no route combination".into());
    let mut attempt = 0;
    for binding in bindings {
        let combos = match route_combinations(abs, network, site, &binding, config.max_routes) {
            Ok(c) => c,
            Err(e) => {
                last = fail(FailureStage::Routing, e);
                continue;
            }
        };
        for routes in &combos {
            attempt += 1;
            let problem = match assemble_problem(abs, network, site, routes, config) {
                Ok(p) => p,
                Err((stage, d)) => {
                    last = fail(stage, d);
                    continue;
                }
            };
            match solve_problem(abs, network, site, &problem, config, seed_for(config.solver.seed, site_idx, attempt)) {
                Ok(plans) => {
                    return Ok(ReconstructedScenario {
                        abstract_: abs.clone(),
                        site_id: site.id.clone(),
                        binding,
                        plans,
                        collision_area: CollisionArea {
                            polygon: problem.collision_area,
                            source: std::iter::once(abs.crash.striker_id.clone())
                                .chain(abs.crash.victim_ids.iter().cloned())
                                .collect(),
                        },
                        environment: Environment {
                            weather: abs.weather,
                            lighting: abs.lighting,
                        },
                    });
                }
                Err((stage, d)) => last = fail(stage, d),
            }
        }
    }
    Err(last)
}

/// Reconstructs `abs` on every compatible site of `network`.
///
/// Sites are solved in parallel; results keep map order and stop after
/// `max_scenarios` successes.
pub fn plan_scenario(
    abs: &AccidentAbstract,
    network: &RoadNetwork,
    config: &PlannerConfig,
) -> Result<PlanOutcome, PlanError> {
    config.solver.validate().map_err(|e| PlanError::Config(e.to_string()))?;
    if config.max_scenarios == 0 {
        return Err(PlanError::Config("max_scenarios must be at least 1".into()));
    }
    let required = cal_max_lanes(abs);
    let sites = enumerate_candidates(network, abs.collision_location, required);
    if sites.is_empty() {
        return Err(PlanError::NoCandidateSite {
            location: abs.collision_location,
            required_lanes: required,
        });
    }
    let mut scenarios = Vec::new();
    let mut failures = Vec::new();
    let chunk = rayon::current_num_threads().max(1);
    for (c, group) in sites.chunks(chunk).enumerate() {
        let results: Vec<_> = group
            .par_iter()
            .enumerate()
            .map(|(i, s)| plan_site(abs, network, s, c * chunk + i, config))
            .collect();
        for r in results {
            if scenarios.len() == config.max_scenarios {
                break;
            }
            match r {
                Ok(s) => scenarios.push(s),
                Err(f) => failures.push(f),
            }
        }
        if scenarios.len() == config.max_scenarios {
            break;
        }
    }
    if scenarios.is_empty() {
        return Err(PlanError::AllSitesInfeasible { failures });
    }
    Ok(PlanOutcome { scenarios, failures })
}
