//! Exhaustive grid enumeration for single-action problems on micro maps.

use crashsynth::constraint::{
    build_action_constraints, solve, ActionContext, ActionRoute, ParticipantPlan, PlanSkeleton, SolverConfig,
    VEHICLE_MIN_SPEED,
};
use crashsynth::fixtures::{micro_straight, MAP_SPEED};
use crashsynth::geometry::Vec2;
use crashsynth::model::{DrivingAction, ParticipantKind};
use crashsynth::road::{Lane, RoadNetwork};

const VEHICLE_WIDTH: f64 = 1.8;

#[derive(Debug, Clone, Copy)]
pub struct Problem {
    pub action: DrivingAction,
    pub limit: f64,
    pub length: f64,
    pub width: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

pub fn lane(net: &RoadNetwork) -> &Lane {
    net.road("M1_fwd").and_then(|r| r.lane(1)).expect("forward lane")
}

pub fn route(lane: &Lane, action: DrivingAction) -> ActionRoute {
    ActionRoute {
        action,
        start_lane: lane.id.clone(),
        end_lane: None,
        sidewalk: None,
        reversed: false,
    }
}

pub fn config(p: &Problem) -> SolverConfig {
    SolverConfig {
        dt_min: p.dt_min,
        dt_max: p.dt_max,
        ..SolverConfig::default()
    }
}

/// Solves one action alone on the forward lane of a micro map.
pub fn solve_single(
    action: DrivingAction,
    width: f64,
    length: f64,
    limit: f64,
    cfg: &SolverConfig,
) -> Option<ParticipantPlan> {
    let net = micro_straight(1, width, length, MAP_SPEED);
    let l = lane(&net);
    let (lo, hi) = l.rect().bounding_box();
    let pad = Vec2::new(1.0, 1.0);
    let skeleton = PlanSkeleton::declare(
        &[("P".to_string(), ParticipantKind::Vehicle, vec![route(l, action)])],
        cfg,
        (lo - pad, hi + pad),
        limit.max(0.0) + 1.0,
    );
    let ctx = ActionContext {
        network: &net,
        site: &net.sites[0],
        participant: "P",
        index: 0,
        kind: ParticipantKind::Vehicle,
        collision_bound: false,
        collision_area: None,
        speed_limit: limit,
        config: cfg,
    };
    let set = build_action_constraints(&skeleton, &skeleton.participants[0].actions[0], &ctx).unwrap();
    let out = solve(&set, cfg, &[]).ok()?;
    skeleton.extract(&out.assignment).into_iter().next()
}

pub fn solver_feasible(p: &Problem) -> bool {
    solve_single(p.action, p.width, p.length, p.limit, &config(p)).is_some()
}

/// Enumerates `(x, y, v)` on a coarse grid in the lane frame; segment
/// durations follow from the trapezoidal displacement rule.
pub fn grid_feasible(p: &Problem) -> bool {
    let net = micro_straight(1, p.width, p.length, MAP_SPEED);
    let l = lane(&net);
    let (ex, ey) = (l.exit.x - l.entrance.x, l.exit.y - l.entrance.y);
    let len = (ex * ex + ey * ey).sqrt();
    let half = ((p.width - VEHICLE_WIDTH) / 2.0).max(0.0);
    let grid = Grid {
        along: (0..=10).map(|i| len * i as f64 / 10.0).collect(),
        lateral: [-half, 0.0, half],
        n: config(p).waypoints_for(p.action),
        stop: p.action == DrivingAction::Stop,
        dt: (p.dt_min, p.dt_max),
    };
    (1..=40)
        .map(|i| p.limit * i as f64 / 40.0)
        .filter(|&v| v > VEHICLE_MIN_SPEED && v <= p.limit)
        .any(|v| (0..grid.along.len()).any(|i| grid.lateral.iter().any(|&d| grid.extend(v, 1, i, d))))
}

struct Grid {
    along: Vec<f64>,
    lateral: [f64; 3],
    n: usize,
    stop: bool,
    dt: (f64, f64),
}

impl Grid {
    /// Tries every continuation after waypoint `k - 1` at grid cell `(i, d)`.
    fn extend(&self, v: f64, k: usize, i: usize, d: f64) -> bool {
        if k == self.n {
            return true;
        }
        let last = k + 1 == self.n;
        (i + 1..self.along.len()).any(|j| {
            self.lateral.iter().any(|&e| {
                let dist = ((self.along[j] - self.along[i]).powi(2) + (e - d).powi(2)).sqrt();
                // Terminal segment of a stop decelerates linearly to zero.
                let dt = if self.stop && last { 2.0 * dist / v } else { dist / v };
                dt >= self.dt.0 && dt <= self.dt.1 && self.extend(v, k + 1, j, e)
            })
        })
    }
}

pub fn problems() -> Vec<Problem> {
    let mut out = Vec::new();
    for action in [DrivingAction::FollowLane, DrivingAction::Stop] {
        for limit in [0.0, 0.8, 4.0, 12.0] {
            for (length, width, dt_min, dt_max) in [(3.0, 3.0, 2.0, 10.0), (12.0, 3.5, 2.0, 10.0), (8.0, 3.0, 0.1, 1.0)] {
                out.push(Problem {
                    action,
                    limit,
                    length,
                    width,
                    dt_min,
                    dt_max,
                });
            }
        }
    }
    out
}

