//! Geometric start points for the numeric solver.
//!
//! A hint fixes a crash point, builds every participant's waypoints
//! backwards from it along nominal lane geometry, then picks lead-in
//! lengths and speeds so that all participants arrive together.

use crate::constraint::{
    ActionRoute, ActionTrajectory, ConstraintSet, Expr, ParticipantPlan, PlanSkeleton, SolverConfig, Cmp, Waypoint,
};
use crate::geometry::{angle_between_deg, ConvexPolygon, Vec2};
use crate::model::{AccidentAbstract, DrivingAction, ParticipantKind};
use crate::road::{Lane, RoadNetwork, SidewalkSide, Site};

const GRID: usize = 8;
const TURN_SHAPES: [f64; 3] = [0.4, 0.65, 0.9];
/// Lead-in lengths tried when the lead sets the impact heading.
const LEAD_SHAPES: [f64; 5] = [1.5, 3.0, 6.0, 10.0, 16.0];
/// Preferred time from the first waypoint to the crash, seconds.
const NOMINAL_HORIZON: f64 = 3.0;
/// Scorer cost below which a hint counts as satisfying every relation.
const FEASIBLE_COST: f64 = 1e-9;
const ENTRY_T: f64 = 0.12;
const EXIT_T: f64 = 0.9;
const STRAIGHT_UTURN_RUN: f64 = 8.0;

enum Curve {
    Line(Vec2, Vec2),
    Quad(Vec2, Vec2, Vec2),
    Cubic(Vec2, Vec2, Vec2, Vec2),
}

impl Curve {
    fn at(&self, t: f64) -> Vec2 {
        let s = 1.0 - t;
        match *self {
            Curve::Line(a, b) => a.lerp(b, t),
            Curve::Quad(a, c, b) => a * (s * s) + c * (2.0 * s * t) + b * (t * t),
            Curve::Cubic(a, c1, c2, b) => {
                a * (s * s * s) + c1 * (3.0 * s * s * t) + c2 * (3.0 * s * t * t) + b * (t * t * t)
            }
        }
    }
}

/// Intersection of the lines `a + s u` and `b + t w`.
fn line_meet(a: Vec2, u: Vec2, b: Vec2, w: Vec2) -> Option<Vec2> {
    let den = u.cross(w);
    if den.abs() < 1e-9 {
        return None;
    }
    let s = (b - a).cross(w) / den;
    Some(a + u * s)
}

pub(crate) struct HintContext<'a> {
    pub network: &'a RoadNetwork,
    pub site: &'a Site,
    pub config: &'a SolverConfig,
    pub speed_limit: f64,
}

impl HintContext<'_> {
    fn lane(&self, id: &str) -> Option<&Lane> {
        self.network.lane(id)
    }

    fn half(&self, lane: &Lane) -> f64 {
        (self.config.catalog.corridor_half(lane) - 0.05).max(0.0)
    }

    /// Region where the final waypoint of `route` may sit.
    pub fn end_region(&self, route: &ActionRoute) -> Option<ConvexPolygon> {
        let cat = &self.config.catalog;
        let start = self.lane(&route.start_lane)?;
        let road = self.network.road(&start.road_id)?;
        let len = start.length();
        Some(match route.action {
            DrivingAction::FollowLane | DrivingAction::Stop | DrivingAction::Retrograde | DrivingAction::DriveIntoRoads => {
                start.band(1.0, len - 1.0, self.half(start))
            }
            DrivingAction::ChangeLane(_) => {
                let t = self.lane(route.end_lane.as_deref()?)?;
                t.band(4.0, len - 1.0, self.half(t))
            }
            DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn => {
                if self.site.has_junction() {
                    self.site.junction_polygon.scaled_about_centroid(0.9)
                } else {
                    let f = road.frame();
                    let (l, _) = cat.carriageway_lateral(self.network, self.site, road);
                    f.band((f.s_min + 12.0, f.s_max - 2.0), (l + 0.3, 0.5 * start.width))
                }
            }
            DrivingAction::DriveOffRoad => cat.roadside(road).scaled_about_centroid(0.9),
            DrivingAction::PedestrianCross => cat.crossing_band(self.network, self.site, road).scaled_about_centroid(0.95),
            DrivingAction::PedestrianWalk => cat
                .sidewalk(self.network, self.site, road, SidewalkSide::Right)
                .scaled_about_centroid(0.9),
        })
    }

    /// Point where junction actions leave their start lane.
    fn junction_anchor(&self, route: &ActionRoute, start: &Lane, end: Vec2, bound: bool) -> Option<Vec2> {
        if self.site.has_junction() {
            let lat = if route.action == DrivingAction::VehicleCross {
                start.lateral(end).clamp(-self.half(start), self.half(start))
            } else {
                0.0
            };
            Some(start.point_at(start.length(), lat))
        } else if route.action == DrivingAction::UTurn && bound {
            let s = start.along(end) - STRAIGHT_UTURN_RUN;
            (s > 1.0).then(|| start.point_at(s, 0.0))
        } else {
            None
        }
    }

    /// Largest lead-in a first action can take before leaving its lane.
    pub fn max_lead(&self, route: &ActionRoute, points: &[Vec2]) -> f64 {
        let Some(start) = self.lane(&route.start_lane) else { return 0.0 };
        let Some(road) = self.network.road(&start.road_id) else { return 0.0 };
        let f = road.frame();
        let end = *points.last().expect("non-empty action");
        let x0 = points[0];
        match route.action {
            DrivingAction::FollowLane
            | DrivingAction::Stop
            | DrivingAction::ChangeLane(_)
            | DrivingAction::DriveOffRoad => start.along(end) - 0.5,
            DrivingAction::DriveIntoRoads => f.along(end) - f.s_min - 0.5,
            DrivingAction::Retrograde => start.length() - start.along(end) - 0.5,
            DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn => {
                // X0 sits on the lane behind the anchor; everything behind it is free.
                start.along(x0) + self.lead_min(route) - 0.5
            }
            DrivingAction::PedestrianCross => 0.0,
            DrivingAction::PedestrianWalk => {
                if route.reversed {
                    f.s_max - f.along(end) - 0.5
                } else {
                    f.along(end) - f.s_min - 0.5
                }
            }
        }
    }

    pub fn lead_min(&self, route: &ActionRoute) -> f64 {
        match route.action {
            DrivingAction::PedestrianCross => 0.0,
            DrivingAction::PedestrianWalk => 1.0,
            DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn => 2.0,
            _ => 3.0,
        }
    }

    /// Waypoint positions of one action ending at `end`.
    pub fn action_points(&self, route: &ActionRoute, end: Vec2, bound: bool, lead: f64, shape: f64) -> Option<Vec<Vec2>> {
        let e = self.config.waypoints_for(route.action);
        let start = self.lane(&route.start_lane)?;
        let road = self.network.road(&start.road_id)?;
        let f = road.frame();
        let cat = &self.config.catalog;
        let linear = |x0: Vec2| -> Vec<Vec2> { (0..e).map(|i| x0.lerp(end, i as f64 / (e - 1) as f64)).collect() };
        let on_lane = |l: &Lane, s: f64| s >= 0.3 && s <= l.length() - 0.3;
        match route.action {
            DrivingAction::FollowLane | DrivingAction::Stop => {
                let h = self.half(start);
                let s0 = start.along(end) - lead;
                on_lane(start, s0).then(|| linear(start.point_at(s0, start.lateral(end).clamp(-h, h))))
            }
            DrivingAction::Retrograde => {
                let h = self.half(start);
                let s0 = start.along(end) + lead;
                on_lane(start, s0).then(|| linear(start.point_at(s0, start.lateral(end).clamp(-h, h))))
            }
            DrivingAction::ChangeLane(_) | DrivingAction::DriveOffRoad => {
                let s0 = start.along(end) - lead;
                on_lane(start, s0).then(|| linear(start.point_at(s0, 0.0)))
            }
            DrivingAction::DriveIntoRoads => {
                let s0 = f.along(end) - lead;
                (s0 >= f.s_min + 0.3).then(|| linear(f.point(s0, f.width + 0.5 * cat.roadside_width)))
            }
            DrivingAction::PedestrianCross => {
                let (left, right) = cat.carriageway_lateral(self.network, self.site, road);
                let lat = match route.sidewalk.unwrap_or(SidewalkSide::Right) {
                    SidewalkSide::Right => right + 0.5 * cat.sidewalk_width,
                    SidewalkSide::Left => left - 0.5 * cat.sidewalk_width,
                };
                Some(linear(f.point(f.along(end), lat)))
            }
            DrivingAction::PedestrianWalk => {
                let dir = if route.reversed { -f.dir } else { f.dir };
                Some(linear(end - dir * lead))
            }
            DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn => {
                let u = start.dir();
                let a = self.junction_anchor(route, start, end, bound)?;
                let curve = if bound {
                    let d = (end - a).dot(u);
                    if d <= 0.5 {
                        return None;
                    }
                    match route.action {
                        DrivingAction::VehicleCross => Curve::Line(a, end),
                        _ => {
                            let left = route.action != DrivingAction::TurnRight;
                            if (u.cross(end - a) > 0.0) != left {
                                return None;
                            }
                            Curve::Quad(a, a + u * (shape * d), end)
                        }
                    }
                } else {
                    let dest = self.lane(route.end_lane.as_deref()?)?;
                    let w = dest.dir();
                    let h = self.half(dest);
                    match route.action {
                        DrivingAction::VehicleCross => {
                            Curve::Line(a, dest.point_at(0.0, dest.lateral(end).clamp(-h, h)))
                        }
                        DrivingAction::UTurn => {
                            let b = dest.entrance;
                            let d = 0.5 * a.distance(b).max(6.0);
                            Curve::Cubic(a, a + u * d, b - w * d, b)
                        }
                        _ => {
                            let b = dest.entrance;
                            Curve::Quad(a, line_meet(a, u, b, w)?, b)
                        }
                    }
                };
                let mut pts = vec![a - u * lead];
                if bound {
                    for i in 1..e {
                        let t = ENTRY_T + (1.0 - ENTRY_T) * (i - 1) as f64 / (e - 2) as f64;
                        pts.push(curve.at(t));
                    }
                    *pts.last_mut().expect("non-empty") = end;
                } else {
                    if e < 4 {
                        return None;
                    }
                    for i in 1..e - 1 {
                        let t = ENTRY_T + (EXIT_T - ENTRY_T) * (i - 1) as f64 / (e - 3) as f64;
                        pts.push(curve.at(t));
                    }
                    pts.push(end);
                }
                Some(pts)
            }
        }
    }

    /// `(min, max, preferred)` hint speed; strikers prefer to be faster.
    fn speed_range(&self, kind: ParticipantKind, striker: bool) -> (f64, f64, f64) {
        match kind {
            ParticipantKind::Pedestrian => {
                let top = 0.9 * self.speed_limit.min(self.config.catalog.pedestrian_speed_max);
                (0.45, top, 1.3f64.min(top))
            }
            ParticipantKind::Vehicle => {
                let top = 0.9 * self.speed_limit;
                let share = if striker { 0.7 } else { 0.45 };
                (1.5, top, (share * self.speed_limit).clamp(1.5, top))
            }
        }
    }
}

/// One participant's geometry as a function of the first action's lead.
struct Builder<'a> {
    ctx: &'a HintContext<'a>,
    routes: &'a [ActionRoute],
    crash: Vec2,
    shape: f64,
    fixed_lead: Option<f64>,
}

impl Builder<'_> {
    fn build(&self, lead: f64) -> Option<Vec<Vec<Vec2>>> {
        let n = self.routes.len();
        let mut out = vec![Vec::new(); n];
        let mut end = self.crash;
        for k in (0..n).rev() {
            let r = &self.routes[k];
            let lead_k = if k == 0 {
                self.fixed_lead.unwrap_or(lead)
            } else {
                let probe = self.ctx.action_points(r, end, k + 1 == n, self.ctx.lead_min(r), self.shape)?;
                let room = self.ctx.max_lead(r, &probe);
                let nominal: f64 = if matches!(r.action, DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn) {
                    4.0
                } else {
                    8.0
                };
                nominal.min(room - 0.5)
            };
            if k > 0 && lead_k < 1.0 {
                return None;
            }
            out[k] = self.ctx.action_points(r, end, k + 1 == n, lead_k, self.shape)?;
            end = out[k][0];
        }
        Some(out)
    }
}

fn effective_length(routes: &[ActionRoute], pts: &[Vec<Vec2>]) -> f64 {
    let mut total = 0.0;
    for (r, p) in routes.iter().zip(pts) {
        for c in 0..p.len() - 1 {
            let f = if r.action == DrivingAction::Stop && c + 2 == p.len() { 2.0 } else { 1.0 };
            total += p[c].distance(p[c + 1]) * f;
        }
    }
    total
}

fn to_plan(id: &str, routes: &[ActionRoute], pts: &[Vec<Vec2>], v: f64) -> ParticipantPlan {
    let trajectories = routes
        .iter()
        .zip(pts)
        .map(|(r, p)| {
            let last = p.len() - 1;
            let speed = |i: usize| if r.action == DrivingAction::Stop && i == last { 0.0 } else { v };
            ActionTrajectory {
                action: r.action,
                route: r.clone(),
                waypoints: p
                    .iter()
                    .enumerate()
                    .map(|(i, q)| Waypoint { x: q.x, y: q.y, v: speed(i) })
                    .collect(),
                segment_durations: (0..last)
                    .map(|c| p[c].distance(p[c + 1]) / (0.5 * (speed(c) + speed(c + 1))).max(1e-6))
                    .collect(),
            }
        })
        .collect();
    ParticipantPlan::new(id.to_string(), trajectories)
}

/// Sum of squared violations, used to rank start points.
pub(crate) struct Scorer {
    rels: Vec<(Expr, bool, f64)>,
}

impl Scorer {
    pub fn new(set: &ConstraintSet) -> Scorer {
        Scorer {
            rels: set
                .relations
                .iter()
                .map(|r| {
                    let m = if r.cmp.is_strict() { r.solve_margin.max(1e-6) } else { r.solve_margin };
                    (r.oriented(), r.cmp == Cmp::Eq, m)
                })
                .collect(),
        }
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        self.rels
            .iter()
            .map(|(e, eq, m)| {
                let g = e.eval(x);
                if *eq {
                    g * g
                } else {
                    (m - g).max(0.0).powi(2)
                }
            })
            .sum()
    }
}

fn grid_points(region: &ConvexPolygon) -> Vec<Vec2> {
    if region.is_empty() || region.area() < 1e-6 {
        return Vec::new();
    }
    let (lo, hi) = region.bounding_box();
    let mut out = Vec::new();
    for i in 0..GRID {
        for j in 0..GRID {
            let p = Vec2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / GRID as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / GRID as f64,
            );
            if region.contains_strictly(p, 0.02) {
                out.push(p);
            }
        }
    }
    if out.is_empty() {
        out.push(region.centroid());
    }
    out
}

/// Ranked start assignments for the solver, best first.
pub(crate) fn generate(
    ctx: &HintContext<'_>,
    abs: &AccidentAbstract,
    routes: &[(String, ParticipantKind, Vec<ActionRoute>)],
    skeleton: &PlanSkeleton,
    set: &ConstraintSet,
    collision_area: &ConvexPolygon,
    limit: usize,
) -> Vec<Vec<f64>> {
    let mut region = collision_area.clone();
    for (_, _, r) in routes {
        match r.last().and_then(|a| ctx.end_region(a)) {
            Some(poly) => region = region.intersection(&poly),
            None => return Vec::new(),
        }
    }
    let scorer = Scorer::new(set);
    let (band_lo, band_hi) = ctx.config.bands.band(abs.crash.crash_type);
    let mut scored: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    for p in grid_points(&region) {
        let options: Vec<Vec<(f64, Vec<Vec<Vec2>>, Builder)>> = routes
            .iter()
            .map(|(_, _, r)| {
                let last = r.last().map(|a| a.action);
                let lead_sets_heading = r.len() == 1
                    && matches!(
                        last,
                        Some(DrivingAction::ChangeLane(_) | DrivingAction::DriveIntoRoads | DrivingAction::DriveOffRoad)
                    );
                let shapes: &[f64] = match last {
                    Some(DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::UTurn) => &TURN_SHAPES,
                    _ if lead_sets_heading => &LEAD_SHAPES,
                    _ => &[0.5],
                };
                shapes
                    .iter()
                    .filter_map(|&shape| {
                        let fixed_lead = lead_sets_heading.then_some(shape);
                        let b = Builder { ctx, routes: r, crash: p, shape, fixed_lead };
                        let lo = ctx.lead_min(&r[0]);
                        let pts = b.build(lo)?;
                        Some((shape, pts, b))
                    })
                    .collect()
            })
            .collect();
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        let mut idx = vec![0usize; options.len()];
        loop {
            let choice: Vec<&(f64, Vec<Vec<Vec2>>, Builder)> =
                idx.iter().zip(&options).map(|(&i, o)| &o[i]).collect();
            if let Some((x, penalty)) = assemble(ctx, abs, routes, skeleton, &choice, band_lo, band_hi) {
                scored.push((scorer.cost(&x), penalty, x));
            }
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < options[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    // Feasible-looking candidates first, ordered by plausibility.
    scored.sort_by(|a, b| {
        let (fa, fb) = (a.0 <= FEASIBLE_COST, b.0 <= FEASIBLE_COST);
        fb.cmp(&fa).then_with(|| {
            if fa && fb {
                a.1.total_cmp(&b.1)
            } else {
                a.0.total_cmp(&b.0)
            }
        })
    });
    scored.into_iter().take(limit).map(|(_, _, x)| x).collect()
}

fn final_heading(pts: &[Vec<Vec2>]) -> Option<Vec2> {
    let last = pts.last()?;
    let n = last.len();
    (n >= 2).then(|| last[n - 1] - last[n - 2])
}

fn assemble(
    ctx: &HintContext<'_>,
    abs: &AccidentAbstract,
    routes: &[(String, ParticipantKind, Vec<ActionRoute>)],
    skeleton: &PlanSkeleton,
    choice: &[&(f64, Vec<Vec<Vec2>>, Builder)],
    band_lo: f64,
    band_hi: f64,
) -> Option<(Vec<f64>, f64)> {
    let pos = |id: &str| routes.iter().position(|(p, _, _)| p == id);
    let s = pos(&abs.crash.striker_id)?;
    let hs = final_heading(&choice[s].1)?;
    for v in &abs.crash.victim_ids {
        let hv = final_heading(&choice[pos(v)?].1)?;
        let a = angle_between_deg(hs, hv);
        if a < band_lo || a > band_hi {
            return None;
        }
    }

    struct Span {
        lo: f64,
        hi: f64,
        l_lo: f64,
        l_hi: f64,
        vmin: f64,
        vmax: f64,
        vpref: f64,
    }
    let mut spans = Vec::new();
    for ((id, kind, r), (_, pts, b)) in routes.iter().zip(choice.iter().map(|c| (c.0, &c.1, &c.2))) {
        let (lo, hi) = match b.fixed_lead {
            Some(l) => (l, l),
            None => {
                let lo = ctx.lead_min(&r[0]);
                (lo, ctx.max_lead(&r[0], &pts[0]).max(lo))
            }
        };
        let l_lo = effective_length(r, pts);
        let l_hi = b.build(hi).map(|p| effective_length(r, &p)).unwrap_or(l_lo);
        let (vmin, vmax, vpref) = ctx.speed_range(*kind, *id == abs.crash.striker_id);
        if vmax <= vmin {
            return None;
        }
        spans.push(Span { lo, hi, l_lo, l_hi, vmin, vmax, vpref });
    }
    let t_lo = spans.iter().map(|s| s.l_lo / s.vmax).fold(0.0, f64::max);
    let t_hi = spans.iter().map(|s| s.l_hi / s.vmin).fold(f64::INFINITY, f64::min);
    let t_pref = spans.iter().map(|s| s.l_lo / s.vpref).fold(NOMINAL_HORIZON, f64::max);
    let t = if t_lo <= t_hi { t_pref.clamp(t_lo, t_hi) } else { 0.5 * (t_lo + t_hi) };

    let mut plans = Vec::new();
    let mut penalty = 0.0;
    for (((id, _, r), c), s) in routes.iter().zip(choice).zip(&spans) {
        let b = &c.2;
        let target = (s.vpref * t).clamp(s.l_lo, s.l_hi);
        let (mut a, mut z) = (s.lo, s.hi);
        let mut pts = c.1.clone();
        if s.l_hi > s.l_lo {
            for _ in 0..40 {
                let m = 0.5 * (a + z);
                match b.build(m) {
                    Some(p) if effective_length(r, &p) < target => {
                        a = m;
                        pts = p;
                    }
                    Some(_) => z = m,
                    None => z = m,
                }
            }
            if let Some(p) = b.build(a) {
                pts = p;
            }
        }
        let len = effective_length(r, &pts);
        penalty += ((target - len) / target.max(1e-9)).max(0.0);
        let v = (len / t).clamp(s.vmin, s.vmax);
        plans.push(to_plan(id, r, &pts, v));
    }
    let starts: Vec<(ParticipantKind, Vec2)> = routes
        .iter()
        .zip(&plans)
        .filter_map(|((_, kind, _), p)| p.trajectories.first()?.waypoints.first().map(|w| (*kind, w.pos())))
        .collect();
    let length = ctx.config.catalog.vehicle_length;
    for (i, a) in starts.iter().enumerate() {
        for b in &starts[i + 1..] {
            if a.0 == ParticipantKind::Vehicle && b.0 == ParticipantKind::Vehicle && a.1.distance(b.1) < length {
                penalty += 1.0;
            }
        }
    }
    let mut x = vec![0.0; skeleton.vars.vars.len()];
    skeleton.assign(&plans, &mut x);
    for (i, var) in skeleton.vars.vars.iter().enumerate() {
        x[i] = x[i].clamp(var.lo, var.hi);
    }
    Some((x, penalty))
}
