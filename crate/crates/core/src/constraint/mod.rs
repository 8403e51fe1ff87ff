//! Waypoint constraints for driving actions and their numeric solution.

mod catalog;
mod expr;
mod regions;
mod set;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CrashType, DrivingAction};
use crate::road::SidewalkSide;

pub use catalog::{
    build_action_constraints, build_chain_constraints, build_crash_constraints, fd, ActionContext,
    ActionVars, ParticipantVars, PlanSkeleton, AXIS_ZERO, PEDESTRIAN_MIN_SPEED, VEHICLE_MIN_SPEED,
};
pub use expr::{Expr, VarId};
pub use regions::{hull_of, CatalogParams};
pub use set::{Cmp, ConstraintSet, Relation, Tag, Variable};
pub use solver::{solve, SolveError, SolveOutcome};

/// Relative heading bands at impact, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrashBands {
    pub rear_end: (f64, f64),
    pub frontal: (f64, f64),
    pub front_to_side: (f64, f64),
}

impl Default for CrashBands {
    fn default() -> Self {
        CrashBands {
            rear_end: (0.0, 30.0),
            frontal: (150.0, 180.0),
            front_to_side: (60.0, 120.0),
        }
    }
}

impl CrashBands {
    pub fn band(&self, t: CrashType) -> (f64, f64) {
        match t {
            CrashType::RearEnd => self.rear_end,
            CrashType::Frontal => self.frontal,
            CrashType::FrontToSide => self.front_to_side,
        }
    }
}

/// Numeric settings of the planner and backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Waypoints per action.
    pub waypoints_per_action: usize,
    /// Waypoints for follow-lane actions.
    pub follow_lane_waypoints: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub timeout_s: f64,
    pub seed: u64,
    /// Equality tolerance of the re-verifier.
    pub epsilon: f64,
    /// Random restarts per start point before giving up.
    pub max_restarts: usize,
    pub bands: CrashBands,
    pub catalog: CatalogParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            waypoints_per_action: 5,
            follow_lane_waypoints: 3,
            dt_min: 0.1,
            dt_max: 10.0,
            timeout_s: 30.0,
            seed: 0,
            epsilon: 1e-6,
            max_restarts: 4,
            bands: CrashBands::default(),
            catalog: CatalogParams::default(),
        }
    }
}

impl SolverConfig {
    /// Waypoint count for one action; turns keep at least three so the
    /// curvature test has an interior point.
    pub fn waypoints_for(&self, action: DrivingAction) -> usize {
        let e = match action {
            DrivingAction::FollowLane => self.follow_lane_waypoints,
            _ => self.waypoints_per_action,
        };
        match action {
            DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::UTurn => e.max(3),
            _ => e.max(2),
        }
    }

    pub fn validate(&self) -> Result<(), ConstraintError> {
        let bad = |m: &str| Err(ConstraintError::Config(m.to_string()));
        if self.waypoints_per_action < 2 || self.follow_lane_waypoints < 2 {
            return bad("at least two waypoints per action are required");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return bad("segment duration bounds must satisfy 0 < dt_min <= dt_max");
        }
        if !(self.timeout_s > 0.0) {
            return bad("timeout must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("action {0} is not supported here")]
    UnsupportedAction(String),
    #[error("lane {0} is not bound in the network")]
    UnboundLane(String),
    #[error("collision area is degenerate (area {0:.3} m^2)")]
    DegenerateCollisionArea(f64),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// Lanes an action is bound to at a site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRoute {
    pub action: DrivingAction,
    /// Lane the action starts on (the lane being joined for drive-into-roads,
    /// the driven lane for retrograde, the crossed or walked road's first lane
    /// for pedestrians).
    pub start_lane: String,
    /// Destination lane for actions that change lanes or roads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_lane: Option<String>,
    /// Pedestrian start sidewalk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidewalk: Option<SidewalkSide>,
    /// Pedestrian walking against the road direction.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reversed: bool,
}

impl ActionRoute {
    pub fn lanes(&self) -> Vec<&str> {
        let mut v = vec![self.start_lane.as_str()];
        if let Some(e) = &self.end_lane {
            v.push(e);
        }
        v
    }
}

/// Solved `(x, y, v)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

impl Waypoint {
    pub fn pos(&self) -> crate::geometry::Vec2 {
        crate::geometry::Vec2::new(self.x, self.y)
    }
}

/// Waypoints of one action with the duration of every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTrajectory {
    pub action: DrivingAction,
    pub route: ActionRoute,
    pub waypoints: Vec<Waypoint>,
    pub segment_durations: Vec<f64>,
}

impl ActionTrajectory {
    pub fn duration(&self) -> f64 {
        self.segment_durations.iter().sum()
    }
}

/// Chained trajectories of one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantPlan {
    pub participant_id: String,
    pub trajectories: Vec<ActionTrajectory>,
    pub total_time: f64,
}

impl ParticipantPlan {
    pub fn new(participant_id: String, trajectories: Vec<ActionTrajectory>) -> Self {
        let total_time = trajectories.iter().map(ActionTrajectory::duration).sum();
        ParticipantPlan {
            participant_id,
            trajectories,
            total_time,
        }
    }

    pub fn final_waypoint(&self) -> Option<&Waypoint> {
        self.trajectories.last().and_then(|t| t.waypoints.last())
    }
}
