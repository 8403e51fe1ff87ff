//! On-disk scenario format: solved plans with cumulative timestamps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::ParticipantPlan;
use crate::geometry::Vec2;
use crate::model::{
    apply_defaults, partial_from_document, AbstractDocument, AbstractError, AccidentAbstract, DrivingAction,
    ParticipantKind, Role,
};
use crate::planner::{Environment, ReconstructedScenario};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("embedded abstract is invalid: {0}")]
    Abstract(#[from] AbstractError),
    #[error("participant {participant}: timestamps decrease at waypoint {index}")]
    NonMonotoneTime { participant: String, index: usize },
}

/// Waypoint with its time since the participant's start, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedWaypoint {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub t: f64,
}

impl TimedWaypoint {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAction {
    pub action: DrivingAction,
    pub start_lane: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_lane: Option<String>,
    pub waypoints: Vec<TimedWaypoint>,
}

impl ScenarioAction {
    /// Lanes the action is bound to, start lane first.
    pub fn lanes(&self) -> Vec<&str> {
        let mut v = vec![self.start_lane.as_str()];
        if let Some(e) = &self.end_lane {
            v.push(e);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParticipant {
    pub id: String,
    pub kind: ParticipantKind,
    pub role: Role,
    pub plan: Vec<ScenarioAction>,
}

impl ScenarioParticipant {
    pub fn waypoints(&self) -> impl Iterator<Item = &TimedWaypoint> {
        self.plan.iter().flat_map(|a| a.waypoints.iter())
    }

    pub fn total_time(&self) -> f64 {
        self.waypoints().last().map_or(0.0, |w| w.t)
    }

    pub fn first(&self) -> Option<&TimedWaypoint> {
        self.waypoints().next()
    }

    pub fn last(&self) -> Option<&TimedWaypoint> {
        self.waypoints().last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "abstract")]
    pub abstract_: AbstractDocument,
    pub site_id: String,
    pub environment: Environment,
    pub participants: Vec<ScenarioParticipant>,
    pub collision_area: Vec<[f64; 2]>,
}

fn timed(plan: &ParticipantPlan) -> Vec<ScenarioAction> {
    let mut t = 0.0;
    plan.trajectories
        .iter()
        .map(|tr| {
            let mut waypoints = Vec::with_capacity(tr.waypoints.len());
            let start = t;
            for (i, w) in tr.waypoints.iter().enumerate() {
                if i > 0 {
                    t += tr.segment_durations[i - 1];
                }
                waypoints.push(TimedWaypoint { x: w.x, y: w.y, v: w.v, t: if i == 0 { start } else { t } });
            }
            ScenarioAction {
                action: tr.action,
                start_lane: tr.route.start_lane.clone(),
                end_lane: tr.route.end_lane.clone(),
                waypoints,
            }
        })
        .collect()
}

impl Scenario {
    pub fn from_reconstruction(s: &ReconstructedScenario) -> Self {
        let participants = s
            .abstract_
            .participants
            .iter()
            .filter_map(|spec| {
                let plan = s.plan(&spec.id)?;
                Some(ScenarioParticipant {
                    id: spec.id.clone(),
                    kind: spec.kind,
                    role: spec.role,
                    plan: timed(plan),
                })
            })
            .collect();
        Scenario {
            abstract_: s.abstract_.to_document(),
            site_id: s.site_id.clone(),
            environment: s.environment,
            participants,
            collision_area: s.collision_area.polygon.vertices().iter().map(|v| [v.x, v.y]).collect(),
        }
    }

    pub fn accident(&self) -> Result<AccidentAbstract, ScenarioError> {
        Ok(apply_defaults(&partial_from_document(&self.abstract_)?)?)
    }

    pub fn participant(&self, id: &str) -> Option<&ScenarioParticipant> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn check(&self) -> Result<(), ScenarioError> {
        for p in &self.participants {
            let mut prev = f64::NEG_INFINITY;
            for (i, w) in p.waypoints().enumerate() {
                if w.t < prev {
                    return Err(ScenarioError::NonMonotoneTime { participant: p.id.clone(), index: i });
                }
                prev = w.t;
            }
        }
        Ok(())
    }
}
