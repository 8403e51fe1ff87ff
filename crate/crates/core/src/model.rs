//! Layered accident abstract: environment, road network and dynamic objects.
//!
//! The JSON document form mirrors the three layers; the in-memory
//! [`AccidentAbstract`] is flattened and always validated.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Conversion factor from miles per hour to meters per second.
pub const MPH_TO_MPS: f64 = 0.44704;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("unknown driving action `{0}`")]
    UnknownAction(String),
    #[error("missing non-defaultable field `{0}`")]
    MissingCore(&'static str),
}

fn squash(label: &str) -> String {
    label
        .trim()
        .to_ascii_lowercase()
        .replace(['-', '_'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

macro_rules! label_enum {
    (
        $(#[$meta:meta])*
        $name:ident { $( $variant:ident => $canon:literal $(| $alias:literal)* ),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $( $variant ),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self { $( $name::$variant => $canon ),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                let key = squash(s);
                $(
                    if key == squash($canon) $(|| key == squash($alias))* {
                        return Ok($name::$variant);
                    }
                )+
                Err(format!("unknown {} `{}`", stringify!($name), s))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.label())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

label_enum!(Weather {
    Clear => "clear" | "sunny" | "fine",
    Cloudy => "cloudy" | "overcast",
    Rainy => "rainy" | "rain",
    Foggy => "foggy" | "fog",
    Snowy => "snowy" | "snow",
});

label_enum!(Lighting {
    Daylight => "daylight" | "day",
    Dark => "dark" | "dark not lighted",
    DarkLighted => "dark lighted" | "dark but lighted" | "dark with street lights",
});

label_enum!(
    /// Road type at the collision site; also used to type map sites.
    CollisionLocation {
        Intersection => "intersection" | "crossroads" | "crossroad",
        TJunction => "t-junction" | "t junction" | "tjunction" | "t intersection",
        StraightRoad => "straight road" | "straight" | "straightroad",
    }
);

label_enum!(Direction {
    North => "northbound" | "north" | "n",
    South => "southbound" | "south" | "s",
    East => "eastbound" | "east" | "e",
    West => "westbound" | "west" | "w",
});

label_enum!(ParticipantKind {
    Vehicle => "vehicle" | "car",
    Pedestrian => "pedestrian",
});

label_enum!(Role {
    Striker => "striker" | "attacker",
    Victim => "victim",
});

label_enum!(CrashType {
    RearEnd => "rear-end" | "rear end" | "rearend",
    Frontal => "frontal" | "head-on" | "head on",
    FrontToSide => "front-to-side" | "front to side" | "angle" | "side",
});

label_enum!(LaneSide {
    Left => "left",
    Right => "right",
});

impl Direction {
    /// Unit heading in a map frame with +x east and +y north.
    pub fn unit(self) -> (f64, f64) {
        match self {
            Direction::North => (0.0, 1.0),
            Direction::South => (0.0, -1.0),
            Direction::East => (1.0, 0.0),
            Direction::West => (-1.0, 0.0),
        }
    }

    /// Nearest compass label for a heading vector.
    pub fn from_heading(dx: f64, dy: f64) -> Direction {
        if dx.abs() >= dy.abs() {
            if dx >= 0.0 {
                Direction::East
            } else {
                Direction::West
            }
        } else if dy >= 0.0 {
            Direction::North
        } else {
            Direction::South
        }
    }
}

/// Closed vocabulary of pre-crash maneuvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DrivingAction {
    UTurn,
    Stop,
    DriveIntoRoads,
    VehicleCross,
    TurnLeft,
    TurnRight,
    FollowLane,
    ChangeLane(LaneSide),
    DriveOffRoad,
    Retrograde,
    PedestrianCross,
    PedestrianWalk,
}

impl DrivingAction {
    pub const ALL: [DrivingAction; 13] = [
        DrivingAction::UTurn,
        DrivingAction::Stop,
        DrivingAction::DriveIntoRoads,
        DrivingAction::VehicleCross,
        DrivingAction::TurnLeft,
        DrivingAction::TurnRight,
        DrivingAction::FollowLane,
        DrivingAction::ChangeLane(LaneSide::Left),
        DrivingAction::ChangeLane(LaneSide::Right),
        DrivingAction::DriveOffRoad,
        DrivingAction::Retrograde,
        DrivingAction::PedestrianCross,
        DrivingAction::PedestrianWalk,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DrivingAction::UTurn => "u-turn",
            DrivingAction::Stop => "stop",
            DrivingAction::DriveIntoRoads => "drive into roads",
            DrivingAction::VehicleCross => "vehicle cross",
            DrivingAction::TurnLeft => "turn left",
            DrivingAction::TurnRight => "turn right",
            DrivingAction::FollowLane => "follow lane",
            DrivingAction::ChangeLane(LaneSide::Left) => "change lane left",
            DrivingAction::ChangeLane(LaneSide::Right) => "change lane right",
            DrivingAction::DriveOffRoad => "drive off road",
            DrivingAction::Retrograde => "retrograde",
            DrivingAction::PedestrianCross => "pedestrian cross",
            DrivingAction::PedestrianWalk => "pedestrian walk",
        }
    }

    /// Identifier-friendly name used in constraint dumps.
    pub fn slug(self) -> String {
        self.label().replace([' ', '-'], "_")
    }

    pub fn is_pedestrian(self) -> bool {
        matches!(self, DrivingAction::PedestrianCross | DrivingAction::PedestrianWalk)
    }

    /// The ten vehicle maneuvers (change lane counted once).
    pub fn kind_family(self) -> &'static str {
        match self {
            DrivingAction::ChangeLane(_) => "change lane",
            other => other.label(),
        }
    }
}

impl fmt::Display for DrivingAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Maps a free-text action label onto the closed vocabulary.
///
/// Matching ignores case, hyphens, underscores and repeated whitespace.
/// A bare "change lane" is read as a change to the right.
pub fn normalize_action(label: &str) -> Result<DrivingAction, AbstractError> {
    let key = squash(label);
    let action = match key.as_str() {
        "u turn" | "uturn" | "make a u turn" => DrivingAction::UTurn,
        "stop" | "stopped" | "stopping" => DrivingAction::Stop,
        "drive into roads" | "drive into road" | "drive into the road" | "enter road" => {
            DrivingAction::DriveIntoRoads
        }
        "vehicle cross" | "vehicle across" | "cross" | "go straight" | "cross intersection" => {
            DrivingAction::VehicleCross
        }
        "turn left" | "left turn" => DrivingAction::TurnLeft,
        "turn right" | "right turn" => DrivingAction::TurnRight,
        "follow lane" | "lane follow" | "follow the lane" => DrivingAction::FollowLane,
        "change lane" | "change lanes" | "lane change" | "change lane right"
        | "change lane to the right" => DrivingAction::ChangeLane(LaneSide::Right),
        "change lane left" | "change lane to the left" => DrivingAction::ChangeLane(LaneSide::Left),
        "drive off road" | "drive off the road" | "drive off roads" | "run off road" => {
            DrivingAction::DriveOffRoad
        }
        "retrograde" | "wrong way" | "drive retrograde" => DrivingAction::Retrograde,
        "pedestrian cross" | "pedestrian crossing" => DrivingAction::PedestrianCross,
        "pedestrian walk" | "pedestrian walking" => DrivingAction::PedestrianWalk,
        _ => return Err(AbstractError::UnknownAction(label.to_string())),
    };
    Ok(action)
}

impl Serialize for DrivingAction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for DrivingAction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        normalize_action(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantSpec {
    pub id: String,
    pub kind: ParticipantKind,
    pub role: Role,
    pub driving_direction: Direction,
    /// 1 = leftmost lane in the participant's travel direction.
    pub running_lane: u32,
    pub actions: Vec<DrivingAction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrashSpec {
    pub crash_type: CrashType,
    pub striker_id: String,
    pub victim_ids: Vec<String>,
}

/// Default speed limits (m/s) used when an abstract carries none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedLimitDefaults {
    pub intersection: f64,
    pub t_junction: f64,
    pub straight_road: f64,
}

impl Default for SpeedLimitDefaults {
    fn default() -> Self {
        SpeedLimitDefaults {
            intersection: 13.4,
            t_junction: 13.4,
            straight_road: 22.4,
        }
    }
}

impl SpeedLimitDefaults {
    pub fn for_location(&self, location: CollisionLocation) -> f64 {
        match location {
            CollisionLocation::Intersection => self.intersection,
            CollisionLocation::TJunction => self.t_junction,
            CollisionLocation::StraightRoad => self.straight_road,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccidentAbstract {
    pub weather: Weather,
    pub lighting: Lighting,
    pub lane_num: u32,
    pub collision_location: CollisionLocation,
    /// Meters per second.
    pub speed_limit: f64,
    pub participants: Vec<ParticipantSpec>,
    pub crash: CrashSpec,
}

impl AccidentAbstract {
    pub fn participant(&self, id: &str) -> Option<&ParticipantSpec> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn striker(&self) -> &ParticipantSpec {
        self.participant(&self.crash.striker_id)
            .expect("validated abstract references its striker")
    }

    /// Checks every type invariant.
    pub fn validate(&self) -> Result<(), AbstractError> {
        validate_parts(
            self.lane_num,
            self.speed_limit,
            &self.participants,
            &self.crash,
            None,
        )
    }

    pub fn from_json(text: &str) -> Result<Self, AbstractError> {
        parse_abstract(text)
    }

    pub fn to_document(&self) -> AbstractDocument {
        AbstractDocument {
            environment: EnvironmentDoc {
                weather: Some(self.weather),
                lighting: Some(self.lighting),
            },
            road: RoadDoc {
                lane_num: Some(NumOrText::Num(self.lane_num as f64)),
                collision_location: Some(self.collision_location),
                speed_limit_mph: Some(NumOrText::Num(self.speed_limit / MPH_TO_MPS)),
                speed_limit_mps: Some(self.speed_limit),
            },
            dynamic: DynamicDoc {
                participants_number: Some(NumOrText::Num(self.participants.len() as f64)),
                participants: Some(
                    self.participants
                        .iter()
                        .map(|p| ParticipantDoc {
                            id: p.id.clone(),
                            kind: Some(p.kind),
                            role: Some(p.role),
                            driving_direction: p.driving_direction,
                            running_lane: NumOrText::Num(p.running_lane as f64),
                            actions: p.actions.iter().map(|a| a.label().to_string()).collect(),
                        })
                        .collect(),
                ),
                crash_type: Some(self.crash.crash_type),
            },
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_document()).expect("abstract document serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("abstract document serializes")
    }
}

fn validate_parts(
    lane_num: u32,
    speed_limit: f64,
    participants: &[ParticipantSpec],
    crash: &CrashSpec,
    declared_count: Option<u32>,
) -> Result<(), AbstractError> {
    let sem = |m: String| Err(AbstractError::Semantic(m));
    if lane_num == 0 {
        return sem("lane_num must be positive".into());
    }
    if !(speed_limit.is_finite() && speed_limit > 0.0) {
        return sem(format!("speed limit must be positive, got {speed_limit}"));
    }
    if participants.is_empty() {
        return sem("no participants".into());
    }
    if let Some(n) = declared_count {
        if n as usize != participants.len() {
            return sem(format!(
                "ParticipantsNumber is {n} but {} participants are described",
                participants.len()
            ));
        }
    }
    let mut ids = BTreeSet::new();
    for p in participants {
        if !ids.insert(p.id.as_str()) {
            return sem(format!("duplicate participant id {}", p.id));
        }
        if p.running_lane == 0 || p.running_lane > lane_num {
            return sem(format!(
                "participant {} runs in lane {} outside [1, {lane_num}]",
                p.id, p.running_lane
            ));
        }
        if p.actions.is_empty() {
            return sem(format!("participant {} has no actions", p.id));
        }
        for a in &p.actions {
            let ok = match p.kind {
                ParticipantKind::Pedestrian => a.is_pedestrian(),
                ParticipantKind::Vehicle => !a.is_pedestrian(),
            };
            if !ok {
                return sem(format!("{} cannot perform `{}`", p.kind, a));
            }
        }
    }
    let strikers: Vec<_> = participants.iter().filter(|p| p.role == Role::Striker).collect();
    if strikers.len() != 1 {
        return sem(format!("expected exactly one striker, found {}", strikers.len()));
    }
    if !participants.iter().any(|p| p.role == Role::Victim) {
        return sem("at least one victim is required".into());
    }
    if strikers[0].kind == ParticipantKind::Pedestrian {
        return sem("a pedestrian cannot be the striker".into());
    }
    if !ids.contains(crash.striker_id.as_str()) {
        return sem(format!("striker {} is not a participant", crash.striker_id));
    }
    if crash.striker_id != strikers[0].id {
        return sem("crash striker disagrees with participant roles".into());
    }
    if crash.victim_ids.is_empty() {
        return sem("crash names no victim".into());
    }
    for v in &crash.victim_ids {
        if !ids.contains(v.as_str()) {
            return sem(format!("victim {v} is not a participant"));
        }
        if *v == crash.striker_id {
            return sem(format!("{v} is both striker and victim"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Document form

/// A JSON scalar that may be written as a number or a numeric string
/// (`"LaneNum": "4"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumOrText {
    Num(f64),
    Text(String),
}

impl NumOrText {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            NumOrText::Num(v) => Some(*v),
            NumOrText::Text(s) => s.trim().parse().ok(),
        }
    }

    fn as_count(&self, field: &str) -> Result<u32, AbstractError> {
        let v = self
            .as_f64()
            .ok_or_else(|| AbstractError::Schema(format!("{field} is not numeric")))?;
        if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
            return Err(AbstractError::Schema(format!("{field} must be a whole number, got {v}")));
        }
        Ok(v as u32)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractDocument {
    #[serde(default)]
    pub environment: EnvironmentDoc,
    #[serde(default)]
    pub road: RoadDoc,
    #[serde(default)]
    pub dynamic: DynamicDoc,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weather: Option<Weather>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lighting: Option<Lighting>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_num: Option<NumOrText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_location: Option<CollisionLocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_limit_mph: Option<NumOrText>,
    /// Exact metric value; takes precedence over the mph field when both are present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_limit_mps: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participants_number: Option<NumOrText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participants: Option<Vec<ParticipantDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crash_type: Option<CrashType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ParticipantKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    pub driving_direction: Direction,
    pub running_lane: NumOrText,
    pub actions: Vec<String>,
}

/// An abstract whose defaultable fields may still be missing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialAbstract {
    pub weather: Option<Weather>,
    pub lighting: Option<Lighting>,
    pub lane_num: Option<u32>,
    pub collision_location: Option<CollisionLocation>,
    pub speed_limit: Option<f64>,
    pub participants_number: Option<u32>,
    pub participants: Option<Vec<ParticipantSpec>>,
    pub crash_type: Option<CrashType>,
}

impl PartialAbstract {
    /// Overlays every field that `other` sets.
    pub fn merge(&mut self, other: PartialAbstract) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            weather,
            lighting,
            lane_num,
            collision_location,
            speed_limit,
            participants_number,
            participants,
            crash_type
        );
    }
}

impl From<&AccidentAbstract> for PartialAbstract {
    fn from(a: &AccidentAbstract) -> Self {
        PartialAbstract {
            weather: Some(a.weather),
            lighting: Some(a.lighting),
            lane_num: Some(a.lane_num),
            collision_location: Some(a.collision_location),
            speed_limit: Some(a.speed_limit),
            participants_number: Some(a.participants.len() as u32),
            participants: Some(a.participants.clone()),
            crash_type: Some(a.crash.crash_type),
        }
    }
}

fn participant_from_doc(doc: &ParticipantDoc) -> Result<ParticipantSpec, AbstractError> {
    let actions = doc
        .actions
        .iter()
        .map(|a| normalize_action(a))
        .collect::<Result<Vec<_>, _>>()?;
    let kind = doc.kind.unwrap_or_else(|| infer_kind(&actions));
    let role = doc.role.ok_or_else(|| {
        AbstractError::Schema(format!("participant {} has no role", doc.id))
    })?;
    Ok(ParticipantSpec {
        id: doc.id.clone(),
        kind,
        role,
        driving_direction: doc.driving_direction,
        running_lane: doc.running_lane.as_count("running_lane")?,
        actions,
    })
}

/// Pedestrian actions imply a pedestrian; everything else is a vehicle.
pub fn infer_kind(actions: &[DrivingAction]) -> ParticipantKind {
    if !actions.is_empty() && actions.iter().all(|a| a.is_pedestrian()) {
        ParticipantKind::Pedestrian
    } else {
        ParticipantKind::Vehicle
    }
}

/// Parses a possibly incomplete abstract document.
pub fn parse_partial(text: &str) -> Result<PartialAbstract, AbstractError> {
    let doc: AbstractDocument =
        serde_json::from_str(text).map_err(|e| AbstractError::Schema(e.to_string()))?;
    partial_from_document(&doc)
}

pub fn partial_from_document(doc: &AbstractDocument) -> Result<PartialAbstract, AbstractError> {
    let speed_limit = match (&doc.road.speed_limit_mps, &doc.road.speed_limit_mph) {
        (Some(mps), _) => Some(*mps),
        (None, Some(mph)) => Some(
            mph.as_f64()
                .ok_or_else(|| AbstractError::Schema("speed_limit_mph is not numeric".into()))?
                * MPH_TO_MPS,
        ),
        (None, None) => None,
    };
    let participants = doc
        .dynamic
        .participants
        .as_ref()
        .map(|ps| ps.iter().map(participant_from_doc).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    Ok(PartialAbstract {
        weather: doc.environment.weather,
        lighting: doc.environment.lighting,
        lane_num: doc
            .road
            .lane_num
            .as_ref()
            .map(|n| n.as_count("lane_num"))
            .transpose()?,
        collision_location: doc.road.collision_location,
        speed_limit,
        participants_number: doc
            .dynamic
            .participants_number
            .as_ref()
            .map(|n| n.as_count("participants_number"))
            .transpose()?,
        participants,
        crash_type: doc.dynamic.crash_type,
    })
}

/// Parses and validates a complete abstract document.
///
/// Every attribute must be present; use [`parse_partial`] followed by
/// [`apply_defaults`] for incomplete documents.
pub fn parse_abstract(text: &str) -> Result<AccidentAbstract, AbstractError> {
    let partial = parse_partial(text)?;
    let missing = [
        ("weather", partial.weather.is_none()),
        ("lighting", partial.lighting.is_none()),
        ("lane_num", partial.lane_num.is_none()),
        ("collision_location", partial.collision_location.is_none()),
        ("speed_limit_mph", partial.speed_limit.is_none()),
        ("participants", partial.participants.is_none()),
        ("crash_type", partial.crash_type.is_none()),
    ];
    if let Some((name, _)) = missing.iter().find(|(_, m)| *m) {
        return Err(AbstractError::Schema(format!("missing field `{name}`")));
    }
    finish(partial, &SpeedLimitDefaults::default())
}

/// Fills missing defaultable attributes and validates the result.
///
/// Participants and collision location are never defaulted. A missing
/// crash type is inferred from the relative travel directions of the
/// striker and the first victim.
pub fn apply_defaults(partial: &PartialAbstract) -> Result<AccidentAbstract, AbstractError> {
    apply_defaults_with(partial, &SpeedLimitDefaults::default())
}

pub fn apply_defaults_with(
    partial: &PartialAbstract,
    defaults: &SpeedLimitDefaults,
) -> Result<AccidentAbstract, AbstractError> {
    finish(partial.clone(), defaults)
}

fn finish(
    partial: PartialAbstract,
    defaults: &SpeedLimitDefaults,
) -> Result<AccidentAbstract, AbstractError> {
    let participants = match partial.participants {
        Some(p) if !p.is_empty() => p,
        _ => return Err(AbstractError::MissingCore("participants")),
    };
    let location = partial
        .collision_location
        .ok_or(AbstractError::MissingCore("collision_location"))?;
    let lane_num = partial
        .lane_num
        .unwrap_or_else(|| participants.iter().map(|p| p.running_lane).max().unwrap_or(1));
    let speed_limit = partial
        .speed_limit
        .unwrap_or_else(|| defaults.for_location(location));

    let striker_id = participants
        .iter()
        .find(|p| p.role == Role::Striker)
        .map(|p| p.id.clone())
        .unwrap_or_default();
    let victim_ids: Vec<String> = participants
        .iter()
        .filter(|p| p.role == Role::Victim)
        .map(|p| p.id.clone())
        .collect();
    let crash_type = partial
        .crash_type
        .unwrap_or_else(|| infer_crash_type(&participants));
    let crash = CrashSpec {
        crash_type,
        striker_id,
        victim_ids,
    };
    validate_parts(
        lane_num,
        speed_limit,
        &participants,
        &crash,
        partial.participants_number,
    )?;
    Ok(AccidentAbstract {
        weather: partial.weather.unwrap_or(Weather::Clear),
        lighting: partial.lighting.unwrap_or(Lighting::Daylight),
        lane_num,
        collision_location: location,
        speed_limit,
        participants,
        crash,
    })
}

fn infer_crash_type(participants: &[ParticipantSpec]) -> CrashType {
    let striker = participants.iter().find(|p| p.role == Role::Striker);
    let victim = participants.iter().find(|p| p.role == Role::Victim);
    match (striker, victim) {
        (Some(s), Some(v)) => {
            let (a, b) = (s.driving_direction.unit(), v.driving_direction.unit());
            let dot = a.0 * b.0 + a.1 * b.1;
            if dot > 0.5 {
                CrashType::RearEnd
            } else if dot < -0.5 {
                CrashType::Frontal
            } else {
                CrashType::FrontToSide
            }
        }
        _ => CrashType::FrontToSide,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG: &str = r#"{
        "environment": {"weather": "Cloudy", "lighting": "Dark"},
        "road": {"lane_num": "4", "collision_location": "intersection", "speed_limit_mph": "30"},
        "dynamic": {
            "participants_number": "2",
            "participants": [
                {"id": "P1", "role": "striker", "driving_direction": "northbound",
                 "running_lane": 1, "actions": ["follow lane", "turn left"]},
                {"id": "P2", "role": "victim", "driving_direction": "southbound",
                 "running_lane": "1", "actions": ["Follow Lane", "vehicle cross"]}
            ],
            "crash_type": "frontal"
        }
    }"#;

    #[test]
    fn parses_table_one_values() {
        let a = parse_abstract(FIG).unwrap();
        assert_eq!(a.weather, Weather::Cloudy);
        assert_eq!(a.lighting, Lighting::Dark);
        assert_eq!(a.lane_num, 4);
        assert_eq!(a.participants.len(), 2);
        assert!((a.speed_limit - 30.0 * MPH_TO_MPS).abs() < 1e-12);
        assert_eq!(a.crash.striker_id, "P1");
        assert_eq!(a.crash.victim_ids, vec!["P2".to_string()]);
        assert_eq!(a.participants[1].actions[0], DrivingAction::FollowLane);
    }

    #[test]
    fn count_mismatch_is_semantic() {
        let doc = FIG.replace(r#""participants_number": "2""#, r#""participants_number": "3""#);
        assert!(matches!(parse_abstract(&doc), Err(AbstractError::Semantic(_))));
    }

    #[test]
    fn unmapped_action_is_reported() {
        let doc = FIG.replace("\"turn left\"", "\"merge\"");
        assert_eq!(
            parse_abstract(&doc),
            Err(AbstractError::UnknownAction("merge".into()))
        );
    }

    #[test]
    fn lane_out_of_range_is_semantic() {
        let doc = FIG.replace(r#""running_lane": 1"#, r#""running_lane": 5"#);
        assert!(matches!(parse_abstract(&doc), Err(AbstractError::Semantic(_))));
    }

    #[test]
    fn malformed_json_is_schema() {
        assert!(matches!(parse_abstract("{"), Err(AbstractError::Schema(_))));
        let doc = FIG.replace("\"Cloudy\"", "\"hail\"");
        assert!(matches!(parse_abstract(&doc), Err(AbstractError::Schema(_))));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_action("turn left").unwrap(), DrivingAction::TurnLeft);
        assert_eq!(normalize_action("Follow Lane").unwrap(), DrivingAction::FollowLane);
        assert_eq!(normalize_action("  follow_lane ").unwrap(), DrivingAction::FollowLane);
        assert_eq!(
            normalize_action("teleport"),
            Err(AbstractError::UnknownAction("teleport".into()))
        );
        for a in DrivingAction::ALL {
            assert_eq!(normalize_action(a.label()).unwrap(), a);
        }
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let mut p = parse_partial(FIG).unwrap();
        p.weather = None;
        p.lane_num = None;
        p.speed_limit = None;
        if let Some(ps) = p.participants.as_mut() {
            ps[1].running_lane = 2;
        }
        let a = apply_defaults(&p).unwrap();
        assert_eq!(a.weather, Weather::Clear);
        assert_eq!(a.lane_num, 2);
        assert_eq!(a.speed_limit, 13.4);
    }

    #[test]
    fn defaults_require_core_fields() {
        let mut p = parse_partial(FIG).unwrap();
        p.participants = None;
        assert_eq!(apply_defaults(&p), Err(AbstractError::MissingCore("participants")));
        let mut p = parse_partial(FIG).unwrap();
        p.collision_location = None;
        assert_eq!(
            apply_defaults(&p),
            Err(AbstractError::MissingCore("collision_location"))
        );
    }

    #[test]
    fn missing_crash_type_is_inferred_from_directions() {
        let mut p = parse_partial(FIG).unwrap();
        p.crash_type = None;
        assert_eq!(apply_defaults(&p).unwrap().crash.crash_type, CrashType::Frontal);
    }

    #[test]
    fn pedestrians_cannot_drive() {
        let doc = FIG.replace(
            r#""id": "P2", "role""#,
            r#""id": "P2", "kind": "pedestrian", "role""#,
        );
        assert!(matches!(parse_abstract(&doc), Err(AbstractError::Semantic(_))));
    }
}
