//! Independent re-check of solved plans.
//!
//! Everything here is evaluated directly on waypoint coordinates with its
//! own geometry helpers, so a solver bug cannot hide behind a shared
//! constraint encoding.

use std::fmt;

use serde::Serialize;

use crate::constraint::{ActionTrajectory, ParticipantPlan, SolverConfig};
use crate::geometry::{ConvexPolygon, Vec2};
use crate::model::{AccidentAbstract, DrivingAction, LaneSide, ParticipantKind};
use crate::road::{Lane, RoadNetwork, Site};

/// One failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub participant: String,
    pub action_index: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.action_index {
            Some(k) => write!(f, "{} {}#{}: {}", self.check, self.participant, k, self.detail),
            None => write!(f, "{} {}: {}", self.check, self.participant, self.detail),
        }
    }
}

/// Inputs of [`verify_plans`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyInput<'a> {
    pub network: &'a RoadNetwork,
    pub site: &'a Site,
    pub abstract_: &'a AccidentAbstract,
    pub plans: &'a [ParticipantPlan],
    pub collision_area: &'a ConvexPolygon,
    pub config: &'a SolverConfig,
}

fn inside(poly: &ConvexPolygon, p: Vec2, tol: f64) -> bool {
    let v = poly.vertices();
    if v.len() < 3 {
        return false;
    }
    let orient = {
        let mut a = 0.0;
        for i in 0..v.len() {
            let (p0, p1) = (v[i], v[(i + 1) % v.len()]);
            a += p0.x * p1.y - p1.x * p0.y;
        }
        a.signum()
    };
    (0..v.len()).all(|i| {
        let (a, b) = (v[i], v[(i + 1) % v.len()]);
        let e = b - a;
        let len = (e.x * e.x + e.y * e.y).sqrt();
        let c = (e.x * (p.y - a.y) - e.y * (p.x - a.x)) * orient / len;
        c >= -tol
    })
}

/// `(along, lateral)` of `p` relative to the lane centerline, lateral
/// positive to the right of travel.
fn lane_coords(lane: &Lane, p: Vec2) -> (f64, f64) {
    let d = lane.exit - lane.entrance;
    let len = (d.x * d.x + d.y * d.y).sqrt();
    let (ux, uy) = (d.x / len, d.y / len);
    let (qx, qy) = (p.x - lane.entrance.x, p.y - lane.entrance.y);
    (qx * ux + qy * uy, qx * uy - qy * ux)
}

fn on_lane(lane: &Lane, p: Vec2, tol: f64) -> bool {
    let (s, l) = lane_coords(lane, p);
    let len = lane.entrance.distance(lane.exit);
    s >= -tol && s <= len + tol && l.abs() <= lane.width / 2.0 + tol
}

fn heading_deg(a: Vec2, b: Vec2) -> f64 {
    let c = (a.x * b.x + a.y * b.y) / ((a.x.hypot(a.y)) * (b.x.hypot(b.y)));
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

struct Checker<'a> {
    input: VerifyInput<'a>,
    eps: f64,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn fail(&mut self, check: &'static str, pid: &str, k: Option<usize>, detail: String) {
        self.out.push(Violation {
            check,
            participant: pid.to_string(),
            action_index: k,
            detail,
        });
    }

    fn lane(&mut self, pid: &str, k: usize, id: &str) -> Option<&'_ Lane> {
        let found = self.input.network.lane(id).is_some();
        if !found {
            self.fail("binding", pid, Some(k), format!("unknown lane {id}"));
            return None;
        }
        self.input.network.lane(id)
    }

    fn action(&mut self, pid: &str, kind: ParticipantKind, k: usize, t: &ActionTrajectory, last_action: bool) {
        let eps = self.eps;
        let w = &t.waypoints;
        if w.len() < 2 || t.segment_durations.len() + 1 != w.len() {
            self.fail("shape", pid, Some(k), format!("{} waypoints, {} durations", w.len(), t.segment_durations.len()));
            return;
        }
        let net = self.input.network;
        let Some(start) = self.lane(pid, k, &t.route.start_lane).cloned() else { return };
        let end_lane = match &t.route.end_lane {
            Some(id) => match self.lane(pid, k, id) {
                Some(l) => Some(l.clone()),
                None => return,
            },
            None => None,
        };
        let p0 = w[0].pos();
        let pe = w[w.len() - 1].pos();
        let ca = self.input.collision_area;
        if last_action && !inside(ca, pe, eps) {
            self.fail("collision-area", pid, Some(k), format!("end ({:.3}, {:.3}) outside", pe.x, pe.y));
        }
        let road = net.road(&start.road_id).cloned();
        let road_width = road.as_ref().map(|r| r.total_width()).unwrap_or(start.width);
        let rightmost = road.as_ref().and_then(|r| r.lane(r.lane_count())).cloned().unwrap_or(start.clone());
        let lat_from_right_edge = |p: Vec2| lane_coords(&rightmost, p).1 - rightmost.width / 2.0;
        let forward = start.exit - start.entrance;

        let on_start = |p| on_lane(&start, p, eps);
        match t.action {
            DrivingAction::FollowLane | DrivingAction::Stop | DrivingAction::Retrograde => {
                if !on_start(p0) {
                    self.fail("start-lane", pid, Some(k), "start off lane".into());
                }
                if !last_action && !on_start(pe) {
                    self.fail("end-lane", pid, Some(k), "end off lane".into());
                }
                let dir = if t.action == DrivingAction::Retrograde { -forward } else { forward };
                if !direction_ok(p0, pe, dir) {
                    self.fail("direction", pid, Some(k), "end not ahead of start".into());
                }
            }
            DrivingAction::ChangeLane(side) => {
                if !on_start(p0) {
                    self.fail("start-lane", pid, Some(k), "start off lane".into());
                }
                match &end_lane {
                    Some(e) if e.road_id == start.road_id => {
                        let want = match side {
                            LaneSide::Right => start.index + 1,
                            LaneSide::Left => start.index.wrapping_sub(1),
                        };
                        if e.index != want {
                            self.fail("adjacent-lane", pid, Some(k), format!("target lane index {} from {}", e.index, start.index));
                        }
                        if !on_lane(e, pe, eps) {
                            self.fail("end-lane", pid, Some(k), "end off target lane".into());
                        }
                    }
                    _ => self.fail("adjacent-lane", pid, Some(k), "target lane missing or on another road".into()),
                }
                if !direction_ok(p0, pe, forward) {
                    self.fail("direction", pid, Some(k), "end not ahead of start".into());
                }
            }
            DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn => {
                if !on_start(p0) {
                    self.fail("start-lane", pid, Some(k), "start off lane".into());
                }
                let Some(dest) = end_lane.clone() else {
                    self.fail("destination", pid, Some(k), "no destination lane".into());
                    return;
                };
                if dest.road_id == start.road_id {
                    self.fail("destination", pid, Some(k), "destination on the start road".into());
                }
                if !last_action && !on_lane(&dest, pe, eps) {
                    self.fail("end-lane", pid, Some(k), "end off destination lane".into());
                }
                let a = heading_deg(forward, dest.exit - dest.entrance);
                let cross = forward.x * (dest.exit.y - dest.entrance.y) - forward.y * (dest.exit.x - dest.entrance.x);
                match t.action {
                    DrivingAction::TurnLeft | DrivingAction::TurnRight => {
                        let left = t.action == DrivingAction::TurnLeft;
                        if (a - 90.0).abs() > 2.0 + 1e-9 || (cross > 0.0) != left {
                            self.fail("road-relation", pid, Some(k), format!("roads meet at {a:.2} deg"));
                        }
                        for i in 0..w.len() - 2 {
                            let u = w[i + 1].pos() - w[i].pos();
                            let v = w[i + 2].pos() - w[i].pos();
                            let c = u.x * v.y - u.y * v.x;
                            if (left && c <= 0.0) || (!left && c >= 0.0) {
                                self.fail("curvature", pid, Some(k), format!("triple {i} bends the wrong way"));
                            }
                        }
                    }
                    DrivingAction::VehicleCross => {
                        if a >= 88.0 {
                            self.fail("road-relation", pid, Some(k), format!("roads meet at {a:.2} deg"));
                        }
                    }
                    _ => {
                        if a < 170.0 {
                            self.fail("road-relation", pid, Some(k), format!("u-turn roads meet at {a:.2} deg"));
                        }
                    }
                }
            }
            DrivingAction::DriveIntoRoads => {
                if lat_from_right_edge(p0) < -eps {
                    self.fail("start-roadside", pid, Some(k), "start on the carriageway".into());
                }
                if !on_start(pe) && !last_action {
                    self.fail("end-lane", pid, Some(k), "end off lane".into());
                }
                if !direction_ok(p0, pe, forward) {
                    self.fail("direction", pid, Some(k), "end not ahead of start".into());
                }
            }
            DrivingAction::DriveOffRoad => {
                if !on_start(p0) {
                    self.fail("start-lane", pid, Some(k), "start off lane".into());
                }
                if lat_from_right_edge(pe) < -eps {
                    self.fail("end-roadside", pid, Some(k), "end still on the carriageway".into());
                }
                if !direction_ok(p0, pe, forward) {
                    self.fail("direction", pid, Some(k), "end not ahead of start".into());
                }
            }
            DrivingAction::PedestrianCross => {
                let along: Vec<f64> = w.iter().map(|q| lane_coords(&start, q.pos()).0).collect();
                if along.iter().any(|s| (s - along[0]).abs() > eps) {
                    self.fail("pedestrian-path", pid, Some(k), "crossing path not perpendicular".into());
                }
                let l0 = lat_from_right_edge(p0);
                if l0 < -eps && l0 > -road_width - eps - self.opposing_width(&start) {
                    self.fail("start-sidewalk", pid, Some(k), "start on the carriageway".into());
                }
            }
            DrivingAction::PedestrianWalk => {
                let lat: Vec<f64> = w.iter().map(|q| lane_coords(&start, q.pos()).1).collect();
                if lat.iter().any(|l| (l - lat[0]).abs() > eps) {
                    self.fail("pedestrian-path", pid, Some(k), "walking path not parallel".into());
                }
                if lat_from_right_edge(p0) < -eps {
                    self.fail("start-sidewalk", pid, Some(k), "start on the carriageway".into());
                }
            }
        }
        self.kinematics(pid, kind, k, t);
    }

    fn opposing_width(&self, lane: &Lane) -> f64 {
        let net = self.input.network;
        net.road(&lane.road_id)
            .and_then(|r| net.opposing_road(self.input.site, r))
            .map(|r| r.total_width())
            .unwrap_or(0.0)
    }

    fn kinematics(&mut self, pid: &str, kind: ParticipantKind, k: usize, t: &ActionTrajectory) {
        let eps = self.eps;
        let cfg = self.input.config;
        let w = &t.waypoints;
        let mut moved = Vec2::ZERO;
        for (c, &dt) in t.segment_durations.iter().enumerate() {
            if dt < cfg.dt_min - eps || dt > cfg.dt_max + eps {
                self.fail("duration", pid, Some(k), format!("segment {c} lasts {dt:.4} s"));
            }
            let seg = w[c + 1].pos() - w[c].pos();
            let len = seg.x.hypot(seg.y);
            let travelled = 0.5 * (w[c].v + w[c + 1].v) * dt;
            if (len - travelled).abs() > eps * (1.0 + len) {
                self.fail("displacement", pid, Some(k), format!("segment {c}: length {len:.6} vs travelled {travelled:.6}"));
            }
            if len > 0.0 {
                // Velocity components along the segment direction.
                moved.x += travelled * seg.x / len;
                moved.y += travelled * seg.y / len;
            }
        }
        let net = w[w.len() - 1].pos() - w[0].pos();
        if (net - moved).norm() > eps * (1.0 + net.norm()) * w.len() as f64 {
            self.fail("displacement", pid, Some(k), "endpoint displacement mismatch".into());
        }

        let limit = if kind == ParticipantKind::Pedestrian {
            self.input.abstract_.speed_limit.min(cfg.catalog.pedestrian_speed_max)
        } else {
            self.input.abstract_.speed_limit
        };
        let moving = if t.action == DrivingAction::Stop { w.len() - 1 } else { w.len() };
        for (i, p) in w.iter().enumerate().take(moving) {
            if p.v <= 0.0 || p.v > limit + eps {
                self.fail("speed", pid, Some(k), format!("waypoint {i} speed {:.4} outside (0, {limit}]", p.v));
            }
            if (p.v - w[0].v).abs() > eps {
                self.fail("speed", pid, Some(k), format!("waypoint {i} speed differs from the first"));
            }
        }
        if t.action == DrivingAction::Stop && w[w.len() - 1].v.abs() > eps {
            self.fail("speed", pid, Some(k), "stop does not end at rest".into());
        }
    }
}

/// Direction predicate over the non-zero components of `dir`.
fn direction_ok(a: Vec2, b: Vec2, dir: Vec2) -> bool {
    let mut any = false;
    for (d, c) in [(b.x - a.x, dir.x), (b.y - a.y, dir.y)] {
        if c.abs() <= 1e-9 {
            continue;
        }
        any = true;
        if d * c <= 0.0 {
            return false;
        }
    }
    any
}

/// Checks every per-action, chaining and crash-coupling condition on a
/// solved plan. An empty result means the plan is valid.
pub fn verify_plans(input: VerifyInput<'_>) -> Vec<Violation> {
    let mut ck = Checker {
        input,
        eps: input.config.epsilon,
        out: Vec::new(),
    };
    let abs = input.abstract_;
    for spec in &abs.participants {
        let Some(plan) = input.plans.iter().find(|p| p.participant_id == spec.id) else {
            ck.fail("plan", &spec.id, None, "participant has no plan".into());
            continue;
        };
        let actions: Vec<DrivingAction> = plan.trajectories.iter().map(|t| t.action).collect();
        if actions != spec.actions {
            ck.fail("plan", &spec.id, None, "action sequence differs from the abstract".into());
        }
        let n = plan.trajectories.len();
        for (k, t) in plan.trajectories.iter().enumerate() {
            ck.action(&spec.id, spec.kind, k, t, k + 1 == n);
        }
        for k in 1..n {
            let a = plan.trajectories[k - 1].waypoints.last().map(|w| w.pos());
            let b = plan.trajectories[k].waypoints.first().map(|w| w.pos());
            if let (Some(a), Some(b)) = (a, b) {
                if a.distance(b) > ck.eps {
                    ck.fail("chain", &spec.id, Some(k), format!("gap {:.3e} m", a.distance(b)));
                }
            }
        }
        let total: f64 = plan.trajectories.iter().flat_map(|t| &t.segment_durations).sum();
        if (total - plan.total_time).abs() > ck.eps {
            ck.fail("plan", &spec.id, None, "total time does not match the segments".into());
        }
    }

    let find = |id: &str| input.plans.iter().find(|p| p.participant_id == id);
    let Some(striker) = find(&abs.crash.striker_id) else { return ck.out };
    let (lo, hi) = input.config.bands.band(abs.crash.crash_type);
    for vid in &abs.crash.victim_ids {
        let Some(victim) = find(vid) else { continue };
        let (Some(sa), Some(va)) = (striker.trajectories.last(), victim.trajectories.last()) else { continue };
        let (sw, vw) = (&sa.waypoints, &va.waypoints);
        let sp = sw[sw.len() - 1].pos();
        let vp = vw[vw.len() - 1].pos();
        if sp.distance(vp) > ck.eps {
            ck.fail("crash-point", vid, None, format!("final gap {:.3e} m", sp.distance(vp)));
        }
        let ts: f64 = striker.trajectories.iter().flat_map(|t| &t.segment_durations).sum();
        let tv: f64 = victim.trajectories.iter().flat_map(|t| &t.segment_durations).sum();
        if (ts - tv).abs() > ck.eps {
            ck.fail("crash-time", vid, None, format!("arrival times {ts:.6} vs {tv:.6}"));
        }
        if sw.len() >= 2 && vw.len() >= 2 {
            let a = heading_deg(sp - sw[sw.len() - 2].pos(), vp - vw[vw.len() - 2].pos());
            if a < lo - 1e-6 || a > hi + 1e-6 {
                ck.fail("crash-angle", vid, None, format!("relative heading {a:.2} deg outside [{lo}, {hi}]"));
            }
        }
    }
    ck.out
}
