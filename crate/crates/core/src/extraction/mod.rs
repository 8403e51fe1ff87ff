//! Layer-by-layer extraction of accident abstracts from report text.

mod accuracy;
mod client;
mod prompts;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::model::{
    apply_defaults, infer_kind, normalize_action, AbstractError, AccidentAbstract, CollisionLocation, CrashType,
    Direction, Lighting, PartialAbstract, ParticipantSpec, Role, Weather, MPH_TO_MPS,
};

pub use accuracy::{evaluate_accuracy, AccuracyRow, AccuracyTable, Attribute};
pub use client::{ClientError, ExtractionClient, HttpClient, MockClient, ScriptedClient, ENDPOINT_VAR, KEY_VAR, MODEL_VAR};
pub use prompts::{build_prompt, render_answer, Layer, PromptPattern, ANSWER_MARKER, REPORT_MARKER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("report text is empty")]
    EmptyReport,
    #[error("client failed after {attempts} attempt(s): {source}")]
    Client { attempts: usize, source: ClientError },
    #[error("{layer:?} answer is not in the tagged format: {excerpt}")]
    Parse { layer: Layer, excerpt: String },
    #[error("extracted abstract is invalid: {0}")]
    Semantic(#[from] AbstractError),
    #[error("predictions ({predictions}) and gold ({gold}) differ in length")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("fixture {path}: {detail}")]
    Fixture { path: PathBuf, detail: String },
}

/// Transport retry budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Attempts after the first one.
    pub retries: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        RetryPolicy {
            retries: 3,
            base_delay: Duration::ZERO,
        }
    }
}

const REPROMPT: &str = "\nYour previous answer could not be read. Reply again with only the tags listed above, each written as <Tag>value</Tag>.\n";

fn complete_with_retry(
    client: &dyn ExtractionClient,
    prompt: &str,
    policy: &RetryPolicy,
) -> Result<String, ExtractionError> {
    let mut attempt = 0;
    loop {
        match client.complete(prompt) {
            Ok(text) => return Ok(text),
            Err(e) if e.is_transient() && attempt < policy.retries => {
                std::thread::sleep(policy.base_delay * 2u32.pow(attempt as u32));
                attempt += 1;
            }
            Err(e) => {
                return Err(ExtractionError::Client {
                    attempts: attempt + 1,
                    source: e,
                })
            }
        }
    }
}

/// `<Tag>value</Tag>` pairs in order of appearance; the first occurrence of
/// a tag wins.
pub fn parse_tags(text: &str) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('>') else { break };
        let name = &after[..close];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric()) {
            rest = &after[close + 1..];
            continue;
        }
        let body = &after[close + 1..];
        let end_tag = format!("</{name}>");
        match body.find(&end_tag) {
            Some(end) => {
                out.entry(name.to_string()).or_insert_with(|| body[..end].trim().to_string());
                rest = &body[end + end_tag.len()..];
            }
            None => rest = body,
        }
    }
    out
}

fn clean(v: &str) -> &str {
    v.trim().trim_matches(|c| c == '"' || c == '\'').trim()
}

fn enum_value<T: FromStr>(tags: &BTreeMap<String, String>, tag: &str) -> Option<T> {
    tags.get(tag).map(|v| clean(v)).filter(|v| !v.is_empty()).and_then(|v| v.parse().ok())
}

fn number(tags: &BTreeMap<String, String>, tag: &str) -> Option<f64> {
    let v = clean(tags.get(tag)?);
    let digits: String = v
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    digits.parse().ok()
}

fn count(tags: &BTreeMap<String, String>, tag: &str) -> Option<u32> {
    number(tags, tag).filter(|n| n.fract() == 0.0 && *n >= 0.0).map(|n| n as u32)
}

/// Splits `["A:x","B:[y, z]"]` into `(id, value)` entries.
pub fn parse_keyed_list(text: &str) -> Vec<(String, String)> {
    let mut s = text.trim();
    if s.starts_with('[') && s.ends_with(']') {
        s = &s[1..s.len() - 1];
    }
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '[' => {
                depth += 1;
                cur.push(c);
            }
            ']' => {
                depth -= 1;
                cur.push(c);
            }
            ',' | ';' if depth == 0 => items.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    items.push(cur);
    items
        .iter()
        .filter_map(|item| {
            let item = clean(item);
            let (id, value) = item.split_once(':')?;
            let id = clean(id);
            (!id.is_empty()).then(|| (id.to_string(), clean(value).to_string()))
        })
        .collect()
}

fn parse_actions(v: &str) -> Option<Vec<crate::model::DrivingAction>> {
    let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
    let actions: Result<Vec<_>, _> = inner
        .split(',')
        .map(clean)
        .filter(|a| !a.is_empty())
        .map(normalize_action)
        .collect();
    actions.ok().filter(|a| !a.is_empty())
}

fn dynamic_participants(tags: &BTreeMap<String, String>) -> Option<Vec<ParticipantSpec>> {
    let actions = parse_keyed_list(tags.get("DrivingActions")?);
    let directions: BTreeMap<String, String> =
        tags.get("DrivingDirections").map(|t| parse_keyed_list(t)).unwrap_or_default().into_iter().collect();
    let lanes: BTreeMap<String, String> =
        tags.get("RunningLanes").map(|t| parse_keyed_list(t)).unwrap_or_default().into_iter().collect();
    if actions.is_empty() {
        return None;
    }
    actions
        .iter()
        .enumerate()
        .map(|(i, (id, a))| {
            let actions = parse_actions(a)?;
            let driving_direction = Direction::from_str(directions.get(id)?).ok()?;
            let running_lane = match lanes.get(id) {
                Some(l) => l.parse().ok().filter(|&n: &u32| n >= 1)?,
                None => 1,
            };
            Some(ParticipantSpec {
                id: id.clone(),
                kind: infer_kind(&actions),
                role: if i == 0 { Role::Striker } else { Role::Victim },
                driving_direction,
                running_lane,
                actions,
            })
        })
        .collect()
}

/// Reads one layer's attributes from a tagged answer. Returns `None` when
/// the answer carries none of the layer's tags.
pub fn parse_layer(layer: Layer, answer: &str) -> Option<PartialAbstract> {
    let tags = parse_tags(answer);
    if !layer.tags().iter().any(|t| tags.contains_key(*t)) {
        return None;
    }
    let mut p = PartialAbstract::default();
    match layer {
        Layer::Environment => {
            p.weather = enum_value::<Weather>(&tags, "Weather");
            p.lighting = enum_value::<Lighting>(&tags, "Lighting");
        }
        Layer::RoadNetwork => {
            p.collision_location = enum_value::<CollisionLocation>(&tags, "CollisionLocation");
            p.lane_num = count(&tags, "LaneNum").filter(|&n| n >= 1);
            p.speed_limit = number(&tags, "SpeedLimit").filter(|v| *v > 0.0).map(|mph| mph * MPH_TO_MPS);
        }
        Layer::DynamicObjects => {
            p.participants_number = count(&tags, "ParticipantsNumber");
            p.crash_type = enum_value::<CrashType>(&tags, "CrashType");
            p.participants = dynamic_participants(&tags);
        }
    }
    Some(p)
}

/// Prompts for one layer and parses the answer, reprompting once if it is
/// not in the tagged format.
pub fn extract_layer(
    client: &dyn ExtractionClient,
    pattern: &PromptPattern,
    report: &str,
    policy: &RetryPolicy,
) -> Result<PartialAbstract, ExtractionError> {
    let prompt = build_prompt(pattern, report)?;
    let answer = complete_with_retry(client, &prompt, policy)?;
    if let Some(p) = parse_layer(pattern.layer, &answer) {
        return Ok(p);
    }
    let answer = complete_with_retry(client, &format!("{prompt}{answer}\n{REPROMPT}"), policy)?;
    parse_layer(pattern.layer, &answer).ok_or_else(|| ExtractionError::Parse {
        layer: pattern.layer,
        excerpt: answer.chars().take(80).collect(),
    })
}

/// Runs the three layers in order, merges them and applies defaults.
pub fn extract_abstract(
    client: &dyn ExtractionClient,
    report: &str,
    policy: &RetryPolicy,
) -> Result<AccidentAbstract, ExtractionError> {
    let mut partial = PartialAbstract::default();
    for layer in Layer::ALL {
        partial.merge(extract_layer(client, &PromptPattern::standard(layer), report, policy)?);
    }
    Ok(apply_defaults(&partial)?)
}

/// Report text with its annotated abstract.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedReport {
    pub name: String,
    pub report_text: String,
    pub ground_truth: Option<AccidentAbstract>,
}

/// Loads every `<name>/report.txt` under `dir`, with `gold.json` when
/// present, sorted by name.
pub fn load_reports(dir: &Path) -> Result<Vec<AnnotatedReport>, ExtractionError> {
    let fixture = |path: &Path, detail: String| ExtractionError::Fixture {
        path: path.to_path_buf(),
        detail,
    };
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| fixture(dir, e.to_string()))?;
    for entry in entries {
        let path = entry.map_err(|e| fixture(dir, e.to_string()))?.path();
        let report = path.join("report.txt");
        if !report.is_file() {
            continue;
        }
        let report_text = std::fs::read_to_string(&report).map_err(|e| fixture(&report, e.to_string()))?;
        let gold = path.join("gold.json");
        let ground_truth = if gold.is_file() {
            let text = std::fs::read_to_string(&gold).map_err(|e| fixture(&gold, e.to_string()))?;
            Some(AccidentAbstract::from_json(&text).map_err(|e| fixture(&gold, e.to_string()))?)
        } else {
            None
        };
        out.push(AnnotatedReport {
            name: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            report_text,
            ground_truth,
        });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Mock client answering every annotated report with its gold abstract.
pub fn mock_from_reports(reports: &[AnnotatedReport]) -> MockClient {
    let mut m = MockClient::new();
    for r in reports {
        if let Some(g) = &r.ground_truth {
            m.insert(&r.report_text, g.clone());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_are_read_in_order_and_trimmed() {
        let t = parse_tags("noise <Weather> cloudy </Weather>\n<Lighting>dark</Lighting><Bad>x");
        assert_eq!(t.get("Weather").map(String::as_str), Some("cloudy"));
        assert_eq!(t.get("Lighting").map(String::as_str), Some("dark"));
        assert!(!t.contains_key("Bad"));
    }

    #[test]
    fn keyed_lists_keep_nested_brackets() {
        let v = parse_keyed_list(r#"["V1:[follow lane, turn left]","V2:[stop]"]"#);
        assert_eq!(
            v,
            vec![
                ("V1".to_string(), "[follow lane, turn left]".to_string()),
                ("V2".to_string(), "[stop]".to_string())
            ]
        );
    }

    #[test]
    fn unknown_enum_values_are_left_missing() {
        let p = parse_layer(Layer::Environment, "<Weather>hail storm</Weather><Lighting>dark</Lighting>").unwrap();
        assert_eq!(p.weather, None);
        assert_eq!(p.lighting, Some(Lighting::Dark));
    }

    #[test]
    fn untagged_answer_is_not_a_layer() {
        assert!(parse_layer(Layer::RoadNetwork, "The road is an intersection.").is_none());
    }
}
