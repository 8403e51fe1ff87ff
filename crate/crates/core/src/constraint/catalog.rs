//! Per-action constraint groups, chaining and crash coupling.

use crate::geometry::{ConvexPolygon, Vec2};
use crate::model::{CrashType, DrivingAction, LaneSide, ParticipantKind};
use crate::road::{Lane, Road, RoadNetwork, SidewalkSide, Site};

use super::expr::{Expr, VarId};
use super::set::{Cmp, ConstraintSet, Tag};
use super::{ActionRoute, ActionTrajectory, ConstraintError, ParticipantPlan, SolverConfig, Waypoint};

/// Lane direction components at or below this magnitude count as zero
/// when evaluating the direction predicate.
pub const AXIS_ZERO: f64 = 1e-9;

/// Half-angle around 90 degrees accepted as perpendicular.
const PERPENDICULAR_TOL_DEG: f64 = 2.0;

const REGION_MARGIN: f64 = 0.02;
const FD_MARGIN: f64 = 0.05;
const CURVATURE_MARGIN: f64 = 0.05;
/// Speed floor of a moving vehicle, m/s.
pub const VEHICLE_MIN_SPEED: f64 = 1.0;
/// Speed floor of a walking pedestrian, m/s.
pub const PEDESTRIAN_MIN_SPEED: f64 = 0.3;
const STEP_MARGIN: f64 = 0.1;

/// Direction predicate: `wj` lies ahead of `wi` along `lane`.
///
/// Each axis contributes the sign-product conjunct unless the lane has no
/// extent along that axis.
pub fn fd(wi: Vec2, wj: Vec2, lane: &Lane) -> bool {
    let d = lane.exit - lane.entrance;
    let mut any = false;
    for (delta, comp) in [(wj.x - wi.x, d.x), (wj.y - wi.y, d.y)] {
        if comp.abs() <= AXIS_ZERO {
            continue;
        }
        any = true;
        if delta * comp <= 0.0 {
            return false;
        }
    }
    any
}

/// Variables of one action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVars {
    pub route: ActionRoute,
    pub x: Vec<VarId>,
    pub y: Vec<VarId>,
    pub v: Vec<VarId>,
    pub dt: Vec<VarId>,
}

impl ActionVars {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn px(&self, i: usize) -> Expr {
        Expr::var(self.x[i])
    }

    fn py(&self, i: usize) -> Expr {
        Expr::var(self.y[i])
    }

    fn last(&self) -> usize {
        self.x.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantVars {
    pub id: String,
    pub kind: ParticipantKind,
    pub actions: Vec<ActionVars>,
}

impl ParticipantVars {
    fn total_time(&self) -> Expr {
        let terms: Vec<(VarId, f64)> = self
            .actions
            .iter()
            .flat_map(|a| a.dt.iter().map(|&d| (d, 1.0)))
            .collect();
        Expr::linear(&terms, 0.0)
    }
}

/// Variable layout of every participant's action chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSkeleton {
    pub vars: ConstraintSet,
    pub participants: Vec<ParticipantVars>,
}

impl PlanSkeleton {
    /// Declares `x, y, v` per waypoint and one duration per segment.
    ///
    /// Positions are boxed to `bounds` (min corner, max corner).
    pub fn declare(
        participants: &[(String, ParticipantKind, Vec<ActionRoute>)],
        config: &SolverConfig,
        bounds: (Vec2, Vec2),
        v_max: f64,
    ) -> PlanSkeleton {
        let mut set = ConstraintSet::default();
        let mut out = Vec::new();
        for (pid, kind, routes) in participants {
            let mut actions = Vec::new();
            for (k, route) in routes.iter().enumerate() {
                let e = config.waypoints_for(route.action);
                let name = |what: &str, i: usize| format!("{pid}.a{k}.{what}{i}");
                let mut av = ActionVars {
                    route: route.clone(),
                    x: Vec::new(),
                    y: Vec::new(),
                    v: Vec::new(),
                    dt: Vec::new(),
                };
                for i in 0..e {
                    av.x.push(set.declare(name("x", i), bounds.0.x, bounds.1.x));
                    av.y.push(set.declare(name("y", i), bounds.0.y, bounds.1.y));
                    av.v.push(set.declare(name("v", i), 0.0, v_max));
                }
                for i in 0..e - 1 {
                    av.dt.push(set.declare(name("dt", i), config.dt_min, config.dt_max));
                }
                actions.push(av);
            }
            out.push(ParticipantVars {
                id: pid.clone(),
                kind: *kind,
                actions,
            });
        }
        PlanSkeleton {
            vars: set,
            participants: out,
        }
    }

    pub fn participant(&self, id: &str) -> Option<&ParticipantVars> {
        self.participants.iter().find(|p| p.id == id)
    }

    /// Empty relation set over this skeleton's variables.
    pub fn empty_set(&self) -> ConstraintSet {
        ConstraintSet::new(self.vars.vars.clone())
    }

    /// Reads plans out of a full assignment.
    pub fn extract(&self, x: &[f64]) -> Vec<ParticipantPlan> {
        self.participants
            .iter()
            .map(|p| {
                let trajectories = p
                    .actions
                    .iter()
                    .map(|a| ActionTrajectory {
                        action: a.route.action,
                        route: a.route.clone(),
                        waypoints: (0..a.len())
                            .map(|i| Waypoint {
                                x: x[a.x[i].0],
                                y: x[a.y[i].0],
                                v: x[a.v[i].0],
                            })
                            .collect(),
                        segment_durations: a.dt.iter().map(|d| x[d.0]).collect(),
                    })
                    .collect();
                ParticipantPlan::new(p.id.clone(), trajectories)
            })
            .collect()
    }

    /// Writes plans into an assignment vector (used for start points).
    pub fn assign(&self, plans: &[ParticipantPlan], x: &mut [f64]) {
        for (p, plan) in self.participants.iter().zip(plans) {
            for (a, t) in p.actions.iter().zip(&plan.trajectories) {
                for (i, w) in t.waypoints.iter().enumerate().take(a.len()) {
                    x[a.x[i].0] = w.x;
                    x[a.y[i].0] = w.y;
                    x[a.v[i].0] = w.v;
                }
                for (i, d) in t.segment_durations.iter().enumerate().take(a.dt.len()) {
                    x[a.dt[i].0] = *d;
                }
            }
        }
    }
}

/// Site-level inputs for one action's constraints.
#[derive(Debug, Clone, Copy)]
pub struct ActionContext<'a> {
    pub network: &'a RoadNetwork,
    pub site: &'a Site,
    pub participant: &'a str,
    pub index: usize,
    pub kind: ParticipantKind,
    /// True for the final action, which must end in the collision area.
    pub collision_bound: bool,
    pub collision_area: Option<&'a ConvexPolygon>,
    pub speed_limit: f64,
    pub config: &'a SolverConfig,
}

struct Emitter<'a> {
    set: ConstraintSet,
    participant: String,
    action: String,
    _ctx: std::marker::PhantomData<&'a ()>,
}

impl Emitter<'_> {
    fn tag(&self, group: u8, label: &str, extrapolated: bool) -> Tag {
        Tag {
            group,
            participant: self.participant.clone(),
            action: self.action.clone(),
            label: label.to_string(),
            extrapolated,
        }
    }

    fn rel(&mut self, group: u8, label: &str, ext: bool, expr: Expr, cmp: Cmp, margin: f64) {
        let tag = self.tag(group, label, ext);
        self.set.push(&tag, expr, cmp, margin);
    }

    /// Point `(x, y)` inside a convex polygon, one half-plane per edge.
    fn inside(&mut self, group: u8, label: &str, ext: bool, x: VarId, y: VarId, poly: &ConvexPolygon) {
        if poly.is_empty() {
            self.rel(group, label, ext, Expr::constant(-1.0), Cmp::Ge, 0.0);
            return;
        }
        for hp in poly.half_planes() {
            let e = Expr::linear(&[(x, -hp.normal.x), (y, -hp.normal.y)], hp.offset);
            self.rel(group, label, ext, e, Cmp::Ge, REGION_MARGIN);
        }
    }

    fn fd(&mut self, group: u8, label: &str, ext: bool, a: &ActionVars, i: usize, j: usize, dir: Vec2) {
        for (vi, vj, comp) in [(a.x[i], a.x[j], dir.x), (a.y[i], a.y[j], dir.y)] {
            if comp.abs() <= AXIS_ZERO {
                continue;
            }
            let e = Expr::linear(&[(vj, comp), (vi, -comp)], 0.0);
            self.rel(group, label, ext, e, Cmp::Gt, FD_MARGIN * comp.abs());
        }
    }

    /// Sign of `(s_{i+1} - s_i) x (s_{i+2} - s_i)` for every consecutive triple.
    fn curvature(&mut self, label: &str, ext: bool, a: &ActionVars, sign: f64) {
        for i in 0..a.len().saturating_sub(2) {
            let ux = a.px(i + 1) - a.px(i);
            let uy = a.py(i + 1) - a.py(i);
            let wx = a.px(i + 2) - a.px(i);
            let wy = a.py(i + 2) - a.py(i);
            let cross = ux * wy - uy * wx;
            self.rel(2, label, ext, cross * sign, Cmp::Gt, CURVATURE_MARGIN);
        }
    }

    /// Linear functional `dir . p` of waypoint `i`.
    fn proj(a: &ActionVars, i: usize, dir: Vec2) -> Expr {
        Expr::linear(&[(a.x[i], dir.x), (a.y[i], dir.y)], 0.0)
    }
}

fn lane_of<'n>(network: &'n RoadNetwork, id: &str) -> Result<&'n Lane, ConstraintError> {
    network
        .lane(id)
        .ok_or_else(|| ConstraintError::UnboundLane(id.to_string()))
}

fn road_of<'n>(network: &'n RoadNetwork, lane: &Lane) -> Result<&'n Road, ConstraintError> {
    network
        .road(&lane.road_id)
        .ok_or_else(|| ConstraintError::UnboundLane(lane.id.clone()))
}

fn raw_dir(lane: &Lane) -> Vec2 {
    lane.exit - lane.entrance
}

/// Groups 1-3 for one action bound to `vars.route`.
pub fn build_action_constraints(
    skeleton: &PlanSkeleton,
    vars: &ActionVars,
    ctx: &ActionContext<'_>,
) -> Result<ConstraintSet, ConstraintError> {
    let action = vars.route.action;
    if action.is_pedestrian() != (ctx.kind == ParticipantKind::Pedestrian) {
        return Err(ConstraintError::UnsupportedAction(format!(
            "{action} for a {}",
            ctx.kind
        )));
    }
    if ctx.collision_bound && ctx.collision_area.is_none() {
        return Err(ConstraintError::DegenerateCollisionArea(0.0));
    }
    let cat = &ctx.config.catalog;
    let net = ctx.network;
    let site = ctx.site;
    let mut em = Emitter {
        set: skeleton.empty_set(),
        participant: ctx.participant.to_string(),
        action: format!("{}#{}", action.slug(), ctx.index),
        _ctx: std::marker::PhantomData,
    };
    let a = vars;
    let last = a.last();
    let start = lane_of(net, &a.route.start_lane)?;
    let road = road_of(net, start)?;
    let end_lane = match &a.route.end_lane {
        Some(id) => Some(lane_of(net, id)?),
        None => None,
    };
    let ca = ctx.collision_area;
    let bound_end = |em: &mut Emitter, label: &str| {
        if let Some(ca) = ca {
            em.inside(1, label, false, a.x[last], a.y[last], ca);
        }
    };
    let junction = &site.junction_polygon;
    let depth = {
        let (lo, hi) = junction.bounding_box();
        2.0 * (hi - lo).norm().max(1.0)
    };

    match action {
        DrivingAction::FollowLane | DrivingAction::Stop => {
            em.inside(1, "eq2-start", false, a.x[0], a.y[0], &start.rect());
            if ctx.collision_bound {
                bound_end(&mut em, "eq4-end");
            } else {
                em.inside(1, "eq2-end", false, a.x[last], a.y[last], &start.rect());
            }
            em.fd(1, "eq1", false, a, 0, last, raw_dir(start));
            lane_keeping(&mut em, a, start, cat.corridor(start), 0..a.len());
        }
        DrivingAction::Retrograde => {
            em.inside(1, "eq2-start", false, a.x[0], a.y[0], &start.rect());
            if ctx.collision_bound {
                bound_end(&mut em, "eq4-end");
            } else {
                em.inside(1, "eq2-end", false, a.x[last], a.y[last], &start.rect());
            }
            em.fd(1, "eq1-reversed", true, a, 0, last, -raw_dir(start));
            let corridor = cat.corridor(start);
            for i in 0..a.len() {
                em.inside(2, "lane-keeping", true, a.x[i], a.y[i], &corridor);
            }
            for i in 0..last {
                em.fd(2, "forward-reversed", true, a, i, i + 1, -raw_dir(start));
            }
        }
        DrivingAction::ChangeLane(side) => {
            let target = end_lane.ok_or_else(|| ConstraintError::UnboundLane("change-lane target".into()))?;
            if target.road_id != start.road_id || target.index.abs_diff(start.index) != 1 {
                return Err(ConstraintError::UnsupportedAction(format!(
                    "{action} from {} to non-adjacent {}",
                    start.id, target.id
                )));
            }
            em.inside(1, "eq2-start", false, a.x[0], a.y[0], &start.rect());
            em.inside(1, "end-adjacent-lane", true, a.x[last], a.y[last], &cat.corridor(target));
            if ctx.collision_bound {
                bound_end(&mut em, "eq4-end");
            }
            em.fd(1, "eq1", false, a, 0, last, raw_dir(start));
            let both = super::hull_of(&[cat.corridor(start), cat.corridor(target)]);
            em.inside(2, "lane-keeping", true, a.x[0], a.y[0], &cat.corridor(start));
            for i in 1..last {
                em.inside(2, "two-lane-band", true, a.x[i], a.y[i], &both);
            }
            let right = start.dir().right_normal();
            let s = if side == LaneSide::Right { 1.0 } else { -1.0 };
            for i in 0..last {
                em.fd(2, "forward", true, a, i, i + 1, raw_dir(start));
                let step = (Emitter::proj(a, i + 1, right) - Emitter::proj(a, i, right)) * s;
                em.rel(2, "lateral-monotone", true, step, Cmp::Ge, 0.0);
            }
        }
        DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn => {
            let dest = end_lane.ok_or_else(|| ConstraintError::UnboundLane(format!("{action} destination")))?;
            if dest.road_id == start.road_id {
                return Err(ConstraintError::UnsupportedAction(format!(
                    "{action} must leave road {}",
                    start.road_id
                )));
            }
            let (u, w) = (start.dir(), dest.dir());
            em.inside(1, "eq3-start", false, a.x[0], a.y[0], &start.rect());
            if ctx.collision_bound {
                bound_end(&mut em, "eq4-end");
            } else {
                em.inside(1, "eq3-end", false, a.x[last], a.y[last], &dest.rect());
            }
            match action {
                DrivingAction::TurnLeft | DrivingAction::TurnRight => {
                    let sign = if action == DrivingAction::TurnLeft { 1.0 } else { -1.0 };
                    em.curvature("eq5", false, a, sign);
                    let tol = PERPENDICULAR_TOL_DEG.to_radians().tan();
                    em.rel(2, "eq6", false, Expr::constant(tol * u.cross(w).abs() - u.dot(w).abs()), Cmp::Ge, 0.0);
                    em.rel(2, "eq6-side", true, Expr::constant(sign * u.cross(w)), Cmp::Gt, 0.0);
                }
                DrivingAction::VehicleCross => {
                    em.rel(2, "eq7", false, Expr::constant(u.dot(w) - PERPENDICULAR_TOL_DEG.to_radians().sin()), Cmp::Gt, 0.0);
                    let n = u.right_normal();
                    for i in 0..last {
                        let du = Emitter::proj(a, i + 1, u) - Emitter::proj(a, i, u);
                        let dn = Emitter::proj(a, i + 1, n) - Emitter::proj(a, i, n);
                        em.rel(2, "heading-cone", true, du.clone() - dn.clone(), Cmp::Gt, STEP_MARGIN);
                        em.rel(2, "heading-cone", true, du + dn, Cmp::Gt, STEP_MARGIN);
                    }
                }
                _ => {
                    em.curvature("uturn-curvature", true, a, 1.0);
                    em.rel(2, "opposing-road", true, Expr::constant(-u.dot(w) - 0.99), Cmp::Gt, 0.0);
                }
            }
            em.inside(2, "lane-keeping", true, a.x[0], a.y[0], &cat.corridor(start));
            em.fd(2, "approach", true, a, 0, 1, raw_dir(start));
            if site.has_junction() {
                let entry = cat.strip_after(start, depth).intersection(junction);
                em.inside(2, "junction-entry", true, a.x[1], a.y[1], &entry);
                for i in 2..last {
                    em.inside(2, "junction", true, a.x[i], a.y[i], junction);
                }
                if ctx.collision_bound {
                    em.inside(2, "junction", true, a.x[last], a.y[last], junction);
                } else {
                    if last >= 2 {
                        let exit = cat.strip_before(dest, depth).intersection(junction);
                        em.inside(2, "junction-exit", true, a.x[last - 1], a.y[last - 1], &exit);
                    }
                    em.inside(2, "lane-keeping", true, a.x[last], a.y[last], &cat.corridor(dest));
                }
            } else if action == DrivingAction::UTurn {
                let cw = cat.carriageway(net, site, road);
                for i in 1..last {
                    em.inside(2, "carriageway", true, a.x[i], a.y[i], &cw);
                }
                if ctx.collision_bound {
                    em.inside(2, "carriageway", true, a.x[last], a.y[last], &cw);
                } else {
                    em.inside(2, "lane-keeping", true, a.x[last], a.y[last], &cat.corridor(dest));
                }
            } else {
                return Err(ConstraintError::UnsupportedAction(format!(
                    "{action} needs a junction"
                )));
            }
        }
        DrivingAction::DriveIntoRoads => {
            em.inside(1, "start-roadside", true, a.x[0], a.y[0], &cat.roadside(road));
            em.inside(1, "end-on-lane", true, a.x[last], a.y[last], &cat.corridor(start));
            if ctx.collision_bound {
                bound_end(&mut em, "eq4-end");
            }
            em.fd(1, "eq1", false, a, 0, last, raw_dir(start));
            let band = cat.roadside_transfer(road, start);
            let f = road.frame();
            let right = f.dir.right_normal();
            for i in 1..last {
                em.inside(2, "transfer-band", true, a.x[i], a.y[i], &band);
            }
            for i in 0..last {
                em.fd(2, "forward", true, a, i, i + 1, raw_dir(start));
                let step = Emitter::proj(a, i, right) - Emitter::proj(a, i + 1, right);
                em.rel(2, "lateral-monotone", true, step, Cmp::Ge, 0.0);
            }
        }
        DrivingAction::DriveOffRoad => {
            em.inside(1, "eq2-start", false, a.x[0], a.y[0], &start.rect());
            em.inside(2, "lane-keeping", true, a.x[0], a.y[0], &cat.corridor(start));
            em.inside(1, "end-roadside", true, a.x[last], a.y[last], &cat.roadside(road));
            if ctx.collision_bound {
                bound_end(&mut em, "eq4-end");
            }
            em.fd(1, "eq1", false, a, 0, last, raw_dir(start));
            let band = cat.roadside_transfer(road, start);
            let right = road.frame().dir.right_normal();
            for i in 1..last {
                em.inside(2, "transfer-band", true, a.x[i], a.y[i], &band);
            }
            for i in 0..last {
                em.fd(2, "forward", true, a, i, i + 1, raw_dir(start));
                let step = Emitter::proj(a, i + 1, right) - Emitter::proj(a, i, right);
                em.rel(2, "lateral-monotone", true, step, Cmp::Ge, 0.0);
            }
        }
        DrivingAction::PedestrianCross => {
            let side = a.route.sidewalk.unwrap_or(SidewalkSide::Right);
            let f = road.frame();
            let band = cat.crossing_band(net, site, road);
            let start_walk = cat.sidewalk(net, site, road, side).intersection(&band);
            let other = match side {
                SidewalkSide::Left => SidewalkSide::Right,
                SidewalkSide::Right => SidewalkSide::Left,
            };
            em.inside(1, "start-sidewalk", true, a.x[0], a.y[0], &start_walk);
            if ctx.collision_bound {
                bound_end(&mut em, "eq4-end");
            } else {
                let far = cat.sidewalk(net, site, road, other).intersection(&band);
                em.inside(1, "end-sidewalk", true, a.x[last], a.y[last], &far);
            }
            let right = f.dir.right_normal();
            let s = if side == SidewalkSide::Left { 1.0 } else { -1.0 };
            for i in 1..a.len() {
                em.inside(2, "crossing-band", true, a.x[i], a.y[i], &band);
                let along = Emitter::proj(a, i, f.dir) - Emitter::proj(a, 0, f.dir);
                em.rel(2, "perpendicular-path", true, along, Cmp::Eq, 0.0);
            }
            for i in 0..last {
                let step = (Emitter::proj(a, i + 1, right) - Emitter::proj(a, i, right)) * s;
                em.rel(2, "crossing-progress", true, step, Cmp::Gt, STEP_MARGIN);
            }
        }
        DrivingAction::PedestrianWalk => {
            let walk = cat.sidewalk(net, site, road, SidewalkSide::Right);
            let f = road.frame();
            em.inside(1, "start-sidewalk", true, a.x[0], a.y[0], &walk);
            if ctx.collision_bound {
                bound_end(&mut em, "eq4-end");
            }
            let right = f.dir.right_normal();
            let s = if a.route.reversed { -1.0 } else { 1.0 };
            for i in 1..a.len() {
                em.inside(2, "sidewalk", true, a.x[i], a.y[i], &walk);
                let lat = Emitter::proj(a, i, right) - Emitter::proj(a, 0, right);
                em.rel(2, "parallel-path", true, lat, Cmp::Eq, 0.0);
            }
            for i in 0..last {
                let step = (Emitter::proj(a, i + 1, f.dir) - Emitter::proj(a, i, f.dir)) * s;
                em.rel(2, "walking-progress", true, step, Cmp::Gt, STEP_MARGIN);
            }
        }
    }

    velocity_constraints(&mut em, a, action, ctx);
    Ok(em.set)
}

fn lane_keeping(
    em: &mut Emitter<'_>,
    a: &ActionVars,
    lane: &Lane,
    corridor: ConvexPolygon,
    range: std::ops::Range<usize>,
) {
    for i in range {
        em.inside(2, "lane-keeping", true, a.x[i], a.y[i], &corridor);
    }
    for i in 0..a.last() {
        em.fd(2, "forward", true, a, i, i + 1, raw_dir(lane));
    }
}

/// Group 3: per-segment trapezoidal displacement and constant speed.
fn velocity_constraints(em: &mut Emitter<'_>, a: &ActionVars, action: DrivingAction, ctx: &ActionContext<'_>) {
    let last = a.last();
    for c in 0..last {
        let dx = a.px(c + 1) - a.px(c);
        let dy = a.py(c + 1) - a.py(c);
        let dist = (dx.clone() * dx + dy.clone() * dy).sqrt();
        let travelled = (Expr::var(a.v[c]) + Expr::var(a.v[c + 1])) * Expr::var(a.dt[c]) * 0.5;
        em.rel(3, "eq8", false, dist - travelled, Cmp::Eq, 0.0);
    }
    let pedestrian = ctx.kind == ParticipantKind::Pedestrian;
    let limit = if pedestrian {
        ctx.speed_limit.min(ctx.config.catalog.pedestrian_speed_max)
    } else {
        ctx.speed_limit
    };
    let min_speed = if pedestrian { PEDESTRIAN_MIN_SPEED } else { VEHICLE_MIN_SPEED };
    let moving = if action == DrivingAction::Stop { last } else { last + 1 };
    for i in 1..moving {
        let e = Expr::linear(&[(a.v[i], 1.0), (a.v[i - 1], -1.0)], 0.0);
        em.rel(3, "eq9-equal", false, e, Cmp::Eq, 0.0);
    }
    for i in 0..moving {
        em.rel(3, "eq9-positive", false, Expr::var(a.v[i]), Cmp::Gt, min_speed);
        em.rel(3, "eq9-limit", false, Expr::linear(&[(a.v[i], 1.0)], -limit), Cmp::Le, 0.0);
    }
    if action == DrivingAction::Stop {
        em.rel(3, "stop-terminal", true, Expr::var(a.v[last]), Cmp::Eq, 0.0);
    }
}

/// Group 4: each action starts where the previous one ended.
pub fn build_chain_constraints(skeleton: &PlanSkeleton) -> ConstraintSet {
    let mut set = skeleton.empty_set();
    for p in &skeleton.participants {
        for k in 1..p.actions.len() {
            let prev = &p.actions[k - 1];
            let cur = &p.actions[k];
            let tag = Tag {
                group: 4,
                participant: p.id.clone(),
                action: format!("chain#{k}"),
                label: "eq10-11".into(),
                extrapolated: false,
            };
            let l = prev.last();
            set.push(&tag, Expr::linear(&[(cur.x[0], 1.0), (prev.x[l], -1.0)], 0.0), Cmp::Eq, 0.0);
            set.push(&tag, Expr::linear(&[(cur.y[0], 1.0), (prev.y[l], -1.0)], 0.0), Cmp::Eq, 0.0);
        }
    }
    set
}

/// Group 5: common final position inside the collision area, equal total
/// durations and a relative heading inside the crash type's band.
pub fn build_crash_constraints(
    skeleton: &PlanSkeleton,
    striker_id: &str,
    victim_ids: &[String],
    collision_area: &ConvexPolygon,
    crash_type: CrashType,
    config: &SolverConfig,
) -> Result<ConstraintSet, ConstraintError> {
    let area = collision_area.area();
    if area <= 1e-9 {
        return Err(ConstraintError::DegenerateCollisionArea(area));
    }
    let mut em = Emitter {
        set: skeleton.empty_set(),
        participant: striker_id.to_string(),
        action: "crash".into(),
        _ctx: std::marker::PhantomData,
    };
    let striker = skeleton
        .participant(striker_id)
        .ok_or_else(|| ConstraintError::UnboundLane(format!("participant {striker_id}")))?;
    let s_last = striker.actions.last().expect("at least one action");
    let sl = s_last.last();
    em.inside(5, "eq12-area", false, s_last.x[sl], s_last.y[sl], collision_area);
    let (lo, hi) = config.bands.band(crash_type);
    // Solve inside a band one degree narrower on each open side.
    let lo_s = if lo > 0.0 { lo + 1.0 } else { lo };
    let hi_s = if hi < 180.0 { hi - 1.0 } else { hi };
    for vid in victim_ids {
        let victim = skeleton
            .participant(vid)
            .ok_or_else(|| ConstraintError::UnboundLane(format!("participant {vid}")))?;
        em.participant = vid.clone();
        let v_last = victim.actions.last().expect("at least one action");
        let vl = v_last.last();
        em.inside(5, "eq12-area", false, v_last.x[vl], v_last.y[vl], collision_area);
        em.rel(5, "eq12", false, Expr::linear(&[(s_last.x[sl], 1.0), (v_last.x[vl], -1.0)], 0.0), Cmp::Eq, 0.0);
        em.rel(5, "eq12", false, Expr::linear(&[(s_last.y[sl], 1.0), (v_last.y[vl], -1.0)], 0.0), Cmp::Eq, 0.0);
        em.rel(5, "eq13", false, striker.total_time() - victim.total_time(), Cmp::Eq, 0.0);

        let ax = s_last.px(sl) - s_last.px(sl - 1);
        let ay = s_last.py(sl) - s_last.py(sl - 1);
        let bx = v_last.px(vl) - v_last.px(vl - 1);
        let by = v_last.py(vl) - v_last.py(vl - 1);
        let dot = ax.clone() * bx.clone() + ay.clone() * by.clone();
        let na = (ax.clone() * ax + ay.clone() * ay).sqrt();
        let nb = (bx.clone() * bx + by.clone() * by).sqrt();
        let norms = na * nb;
        if hi < 180.0 {
            let c = hi_s.to_radians().cos();
            em.rel(5, "crash-band", true, dot.clone() - norms.clone() * c, Cmp::Ge, 0.0);
        }
        if lo > 0.0 {
            let c = lo_s.to_radians().cos();
            em.rel(5, "crash-band", true, norms * c - dot, Cmp::Ge, 0.0);
        }
    }
    Ok(em.set)
}
