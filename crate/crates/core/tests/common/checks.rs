//! Test-side restatements of the per-action numeric relations, written
//! directly against waypoint coordinates.

use crashsynth::constraint::{ActionTrajectory, ParticipantPlan};
use crashsynth::model::{DrivingAction, ParticipantKind};

pub const EPS: f64 = 1e-6;
pub const PEDESTRIAN_LIMIT: f64 = 2.0;
pub const SIMULTANEITY_S: f64 = 0.5;

/// Largest per-axis gap between endpoint displacement and the trapezoidal
/// integral of the segment-aligned velocity components.
pub fn displacement_gap(a: &ActionTrajectory) -> f64 {
    let w = &a.waypoints;
    let (mut ix, mut iy) = (0.0, 0.0);
    for c in 0..w.len() - 1 {
        let (dx, dy) = (w[c + 1].x - w[c].x, w[c + 1].y - w[c].y);
        let len = (dx * dx + dy * dy).sqrt();
        if len == 0.0 {
            continue;
        }
        let travelled = 0.5 * (w[c].v + w[c + 1].v) * a.segment_durations[c];
        ix += travelled * dx / len;
        iy += travelled * dy / len;
    }
    let (ex, ey) = (w[w.len() - 1].x - w[0].x, w[w.len() - 1].y - w[0].y);
    (ix - ex).abs().max((iy - ey).abs())
}

/// Equal positive speeds up to the limit; a stop ends at rest.
pub fn speed_violation(a: &ActionTrajectory, limit: f64) -> Option<String> {
    let w = &a.waypoints;
    let moving = if a.action == DrivingAction::Stop { w.len() - 1 } else { w.len() };
    let v0 = w[0].v;
    for (i, p) in w.iter().take(moving).enumerate() {
        if (p.v - v0).abs() > EPS {
            return Some(format!("speed {i} is {} against {v0}", p.v));
        }
        if !(p.v > 0.0) || p.v > limit + EPS {
            return Some(format!("speed {i} is {} with limit {limit}", p.v));
        }
    }
    if a.action == DrivingAction::Stop && w[w.len() - 1].v.abs() > EPS {
        return Some("stop does not end at rest".into());
    }
    None
}

/// Interior triples whose turning direction is not counter-clockwise.
pub fn left_turn_violations(a: &ActionTrajectory) -> usize {
    a.waypoints
        .windows(3)
        .filter(|t| {
            let (ux, uy) = (t[1].x - t[0].x, t[1].y - t[0].y);
            let (wx, wy) = (t[2].x - t[0].x, t[2].y - t[0].y);
            !(ux * wy - uy * wx > 0.0)
        })
        .count()
}

pub fn limit_for(kind: ParticipantKind, speed_limit: f64) -> f64 {
    match kind {
        ParticipantKind::Vehicle => speed_limit,
        ParticipantKind::Pedestrian => speed_limit.min(PEDESTRIAN_LIMIT),
    }
}

/// Violations of the per-action numeric relations of one plan.
pub fn plan_violations(plan: &ParticipantPlan, kind: ParticipantKind, speed_limit: f64) -> Vec<String> {
    let mut out = Vec::new();
    let limit = limit_for(kind, speed_limit);
    for (k, a) in plan.trajectories.iter().enumerate() {
        let gap = displacement_gap(a);
        if gap > EPS {
            out.push(format!("{}#{k}: displacement gap {gap:e}", plan.participant_id));
        }
        if let Some(v) = speed_violation(a, limit) {
            out.push(format!("{}#{k}: {v}", plan.participant_id));
        }
        if a.action == DrivingAction::TurnLeft && left_turn_violations(a) > 0 {
            out.push(format!("{}#{k}: turn-left curvature flips", plan.participant_id));
        }
    }
    out
}
