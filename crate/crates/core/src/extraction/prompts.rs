//! Layer prompts and the tagged answer format.

use serde::{Deserialize, Serialize};

use super::ExtractionError;
use crate::model::{AccidentAbstract, MPH_TO_MPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    Environment,
    RoadNetwork,
    DynamicObjects,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::Environment, Layer::RoadNetwork, Layer::DynamicObjects];

    pub fn label(self) -> &'static str {
        match self {
            Layer::Environment => "Environment conditions",
            Layer::RoadNetwork => "Road network and traffic guidance",
            Layer::DynamicObjects => "Dynamic objects",
        }
    }

    /// Answer tags of this layer, in prompt order.
    pub fn tags(self) -> &'static [&'static str] {
        match self {
            Layer::Environment => &["Weather", "Lighting"],
            Layer::RoadNetwork => &["CollisionLocation", "LaneNum", "SpeedLimit"],
            Layer::DynamicObjects => &[
                "ParticipantsNumber",
                "CrashType",
                "DrivingDirections",
                "RunningLanes",
                "DrivingActions",
            ],
        }
    }
}

/// Prompt skeleton for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptPattern {
    pub layer: Layer,
    pub task: String,
    pub attribute_definitions: Vec<(String, String)>,
    pub heuristic_rules: Vec<String>,
    pub few_shot_examples: Vec<(String, String)>,
}

fn owned(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

fn answer_list(tags: &[(&str, String)]) -> String {
    tags.iter()
        .map(|(t, v)| format!("<{t}>{v}</{t}>"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl PromptPattern {
    /// Built-in pattern of `layer`.
    pub fn standard(layer: Layer) -> Self {
        match layer {
            Layer::Environment => PromptPattern {
                layer,
                task: "You should help me extract environmental conditions. The answer includes <Weather> and <Lighting>.".into(),
                attribute_definitions: owned(&[
                    ("Weather", "it means the weather conditions when the accident happened. Use one of: clear, cloudy, rainy, foggy, snowy."),
                    ("Lighting", "it means the lighting conditions when the accident happened. Use one of: daylight, dark, dark lighted."),
                ]),
                heuristic_rules: vec![
                    "If it's rainy when the accident happened, \"rainy\" should be added into the <Weather>.".into(),
                    "If it was night and street lights were on, the answer of <Lighting> is \"dark lighted\".".into(),
                    "If the report does not mention an attribute, leave its tag empty.".into(),
                ],
                few_shot_examples: vec![(
                    "It was raining heavily at dusk and the road was unlit.".into(),
                    answer_list(&[("Weather", "rainy".into()), ("Lighting", "dark".into())]),
                )],
            },
            Layer::RoadNetwork => PromptPattern {
                layer,
                task: "You should help me extract roadnetwork and traffic guidance information. The answer includes <CollisionLocation>, <LaneNum>, and <SpeedLimit>.".into(),
                attribute_definitions: owned(&[
                    ("CollisionLocation", "it means the type of road on which the accident occurred. Use one of: intersection, t-junction, straight road."),
                    ("LaneNum", "it means the number of lanes in each travel direction of the road where the accident occurred, as a whole number."),
                    ("SpeedLimit", "it means the posted speed limit of the road, in miles per hour, as a number."),
                ]),
                heuristic_rules: vec![
                    "If the accident happened near or at an intersection or intersecting roadway, the answer of <CollisionLocation> is \"intersection\".".into(),
                    "If one road ends at another road, the answer of <CollisionLocation> is \"t-junction\".".into(),
                    "If the report does not mention an attribute, leave its tag empty.".into(),
                ],
                few_shot_examples: vec![(
                    "The collision occurred where a side street ends at a three-lane arterial posted at 40 mph.".into(),
                    answer_list(&[
                        ("CollisionLocation", "t-junction".into()),
                        ("LaneNum", "3".into()),
                        ("SpeedLimit", "40".into()),
                    ]),
                )],
            },
            Layer::DynamicObjects => PromptPattern {
                layer,
                task: "You should help me extract dynamic object information. The answer includes <ParticipantsNumber>, <CrashType>, <DrivingDirections>, <RunningLanes> and <DrivingActions>.".into(),
                attribute_definitions: owned(&[
                    ("ParticipantsNumber", "it means the total number of traffic participants involved in the collision."),
                    ("CrashType", "it means the type of collision between the striker and the victim. Use one of: rear-end, frontal, front-to-side."),
                    ("DrivingDirections", "it means the initial travel direction of each participant, written as [\"ID:direction\", ...] with northbound, southbound, eastbound or westbound."),
                    ("RunningLanes", "it means the initial lane of each participant counted from the leftmost lane as 1, written as [\"ID:lane\", ...]."),
                    ("DrivingActions", "it means the actions each participant performed before the accident, in order, written as [\"ID:[action, ...]\", ...]. Use only: u-turn, stop, drive into roads, vehicle cross, turn left, turn right, follow lane, change lane left, change lane right, drive off road, retrograde, pedestrian cross, pedestrian walk."),
                ]),
                heuristic_rules: vec![
                    "If the car proceeds to do an intended action but does not do actually, such as intending to turn right, this intended action must not be added to the <DrivingActions>.".into(),
                    "List the striker first in every list attribute.".into(),
                    "Pedestrians are victims and only use pedestrian actions.".into(),
                ],
                few_shot_examples: vec![(
                    "V1 was westbound in lane 2 and changed into lane 1, where it struck the rear of V2, which was westbound in lane 1 and following its lane.".into(),
                    answer_list(&[
                        ("ParticipantsNumber", "2".into()),
                        ("CrashType", "rear-end".into()),
                        ("DrivingDirections", "[\"V1:westbound\",\"V2:westbound\"]".into()),
                        ("RunningLanes", "[\"V1:2\",\"V2:1\"]".into()),
                        ("DrivingActions", "[\"V1:[change lane left]\",\"V2:[follow lane]\"]".into()),
                    ]),
                )],
            },
        }
    }
}

/// Marker preceding the report text in every prompt.
pub const REPORT_MARKER: &str = "Accident report:\n";
/// Marker following the report text in every prompt.
pub const ANSWER_MARKER: &str = "\nAnswer:";

/// Assembles the prompt: task, attribute explanations, rules, examples,
/// then the report.
pub fn build_prompt(pattern: &PromptPattern, report: &str) -> Result<String, ExtractionError> {
    let report = report.trim();
    if report.is_empty() {
        return Err(ExtractionError::EmptyReport);
    }
    let mut p = String::new();
    p.push_str(&pattern.task);
    p.push_str(" Answer with one tag per attribute, such as <");
    p.push_str(pattern.layer.tags()[0]);
    p.push_str(">value</");
    p.push_str(pattern.layer.tags()[0]);
    p.push_str(">, and nothing else.\n\nAttributes:\n");
    for (attr, def) in &pattern.attribute_definitions {
        p.push_str(&format!("- For the <{attr}>, {def}\n"));
    }
    p.push_str("\nRules:\n");
    for rule in &pattern.heuristic_rules {
        p.push_str(&format!("- {rule}\n"));
    }
    p.push_str("\nExamples:\n");
    for (excerpt, answer) in &pattern.few_shot_examples {
        p.push_str(&format!("Report: {excerpt}\nAnswer:\n{answer}\n\n"));
    }
    p.push_str(REPORT_MARKER);
    p.push_str(report);
    p.push_str(ANSWER_MARKER);
    p.push('\n');
    Ok(p)
}

fn mph(speed_limit: f64) -> String {
    let v = speed_limit / MPH_TO_MPS;
    if (v - v.round()).abs() < 1e-6 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.6}")
    }
}

fn keyed<T>(a: &AccidentAbstract, f: impl Fn(&crate::model::ParticipantSpec) -> T) -> String
where
    T: std::fmt::Display,
{
    let items: Vec<String> = a.participants.iter().map(|p| format!("\"{}:{}\"", p.id, f(p))).collect();
    format!("[{}]", items.join(","))
}

/// Tagged answer for `layer` that exactly encodes `a`.
pub fn render_answer(layer: Layer, a: &AccidentAbstract) -> String {
    let tags: Vec<(&str, String)> = match layer {
        Layer::Environment => vec![
            ("Weather", a.weather.label().into()),
            ("Lighting", a.lighting.label().into()),
        ],
        Layer::RoadNetwork => vec![
            ("CollisionLocation", a.collision_location.label().into()),
            ("LaneNum", a.lane_num.to_string()),
            ("SpeedLimit", mph(a.speed_limit)),
        ],
        Layer::DynamicObjects => vec![
            ("ParticipantsNumber", a.participants.len().to_string()),
            ("CrashType", a.crash.crash_type.label().into()),
            ("DrivingDirections", keyed(a, |p| p.driving_direction.label())),
            ("RunningLanes", keyed(a, |p| p.running_lane)),
            (
                "DrivingActions",
                keyed(a, |p| {
                    format!("[{}]", p.actions.iter().map(|x| x.label()).collect::<Vec<_>>().join(", "))
                }),
            ),
        ],
    };
    answer_list(&tags)
}
