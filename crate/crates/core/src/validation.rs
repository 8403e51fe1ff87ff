//! Kinematic replay, the SIM predicate, the reconstruction rate and
//! generation of ADS test cases with their collision oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::CrashBands;
use crate::geometry::{angle_between_deg, OrientedBox, Vec2};
use crate::model::{CollisionLocation, DrivingAction, ParticipantKind, Role};
use crate::planner::Environment;
use crate::road::RoadNetwork;
use crate::scenario::{Scenario, ScenarioParticipant, TimedWaypoint};

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_V_MIN: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("replay tick must be positive, got {0}")]
    InvalidTick(f64),
    #[error("no verdicts to aggregate")]
    EmptyInput,
    #[error("trace has no channel for ego {0}")]
    MissingEgoChannel(String),
    #[error("scenario references unknown site {0}")]
    UnknownSite(String),
    #[error("scenario references unknown lane {0}")]
    UnknownLane(String),
}

/// Sampled kinematic state. `heading` is in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct State {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub heading: f64,
    /// Index of the action active at this tick.
    pub action: usize,
}

impl State {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn dir(&self) -> Vec2 {
        Vec2::new(self.heading.cos(), self.heading.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    pub id: String,
    pub kind: ParticipantKind,
    pub states: Vec<State>,
}

impl Channel {
    /// State at tick `k`; finished participants hold their final state.
    pub fn at(&self, k: usize) -> Option<&State> {
        self.states.get(k).or(self.states.last())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayTrace {
    pub dt: f64,
    pub channels: Vec<Channel>,
}

impl ReplayTrace {
    pub fn channel(&self, id: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn ticks(&self) -> usize {
        self.channels.iter().map(|c| c.states.len()).max().unwrap_or(0)
    }
}

struct Knot {
    t: f64,
    p: Vec2,
    v: f64,
    action: usize,
}

/// Samples a timed polyline every `dt` seconds, ending exactly at the last
/// timestamp.
pub fn sample_schedule(points: &[(usize, TimedWaypoint)], dt: f64) -> Vec<State> {
    let mut knots: Vec<Knot> = Vec::with_capacity(points.len());
    for &(action, w) in points {
        if let Some(k) = knots.last_mut() {
            if w.t <= k.t {
                k.p = w.pos();
                k.v = w.v;
                continue;
            }
        }
        knots.push(Knot { t: w.t, p: w.pos(), v: w.v, action });
    }
    if knots.is_empty() {
        return Vec::new();
    }
    // Segment i runs from knot i to knot i + 1 and belongs to the action of
    // knot i + 1.
    let mut headings = Vec::with_capacity(knots.len().saturating_sub(1));
    for i in 0..knots.len().saturating_sub(1) {
        let d = knots[i + 1].p - knots[i].p;
        headings.push(if d.norm() > 1e-9 { Some(d.y.atan2(d.x)) } else { None });
    }
    let mut fill = headings.iter().flatten().next().copied().unwrap_or(0.0);
    let headings: Vec<f64> = headings
        .into_iter()
        .map(|h| {
            if let Some(h) = h {
                fill = h;
            }
            fill
        })
        .collect();

    let t0 = knots[0].t;
    let t_end = knots[knots.len() - 1].t;
    let mut times = Vec::new();
    let n = ((t_end - t0) / dt + 1e-9).floor() as usize;
    for k in 0..=n {
        times.push(t0 + k as f64 * dt);
    }
    if t_end - times[times.len() - 1] > 1e-9 {
        times.push(t_end);
    }

    let mut out = Vec::with_capacity(times.len());
    let mut seg = 0;
    for t in times {
        if knots.len() == 1 {
            let k = &knots[0];
            out.push(State { t, x: k.p.x, y: k.p.y, v: k.v, heading: 0.0, action: k.action });
            continue;
        }
        while seg + 2 < knots.len() && t >= knots[seg + 1].t {
            seg += 1;
        }
        let (a, b) = (&knots[seg], &knots[seg + 1]);
        let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let p = a.p.lerp(b.p, u);
        out.push(State {
            t,
            x: p.x,
            y: p.y,
            v: a.v + (b.v - a.v) * u,
            heading: headings[seg],
            action: b.action,
        });
    }
    out
}

fn participant_points(p: &ScenarioParticipant) -> Vec<(usize, TimedWaypoint)> {
    p.plan
        .iter()
        .enumerate()
        .flat_map(|(i, a)| a.waypoints.iter().map(move |w| (i, *w)))
        .collect()
}

/// Replays every participant's plan at a fixed tick.
pub fn replay(scenario: &Scenario, dt: f64) -> Result<ReplayTrace, ValidationError> {
    if !(dt > 0.0) {
        return Err(ValidationError::InvalidTick(dt));
    }
    let channels = scenario
        .participants
        .iter()
        .map(|p| Channel {
            id: p.id.clone(),
            kind: p.kind,
            states: sample_schedule(&participant_points(p), dt),
        })
        .collect();
    Ok(ReplayTrace { dt, channels })
}

/// Tolerances of the SIM predicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimTolerances {
    pub dt: f64,
    pub vehicle_width: f64,
    pub vehicle_length: f64,
    /// Largest accepted gap between striker and victim arrival times, s.
    pub simultaneity_s: f64,
    pub bands: CrashBands,
    /// Numeric slack added to the lateral and angle limits.
    pub slack: f64,
}

impl Default for SimTolerances {
    fn default() -> Self {
        SimTolerances {
            dt: DEFAULT_DT,
            vehicle_width: 1.8,
            vehicle_length: 4.5,
            simultaneity_s: 0.5,
            bands: CrashBands::default(),
            slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimDiagnostic {
    pub check: &'static str,
    pub participant: String,
    pub t: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimVerdict {
    pub no_illegal_crossing: bool,
    pub angle_match: bool,
    pub simultaneity: bool,
    pub overall: bool,
    pub diagnostics: Vec<SimDiagnostic>,
}

/// Actions that cross lane lines by definition.
pub fn crossing_exempt(action: DrivingAction) -> bool {
    matches!(
        action,
        DrivingAction::ChangeLane(_)
            | DrivingAction::Retrograde
            | DrivingAction::DriveOffRoad
            | DrivingAction::DriveIntoRoads
            | DrivingAction::UTurn
    )
}

fn lane_check(
    scenario: &Scenario,
    network: &RoadNetwork,
    trace: &ReplayTrace,
    tol: &SimTolerances,
    diags: &mut Vec<SimDiagnostic>,
) -> Result<bool, ValidationError> {
    let site = network
        .site(&scenario.site_id)
        .ok_or_else(|| ValidationError::UnknownSite(scenario.site_id.clone()))?;
    let mut ok = true;
    for p in &scenario.participants {
        if p.kind != ParticipantKind::Vehicle {
            continue;
        }
        let Some(ch) = trace.channel(&p.id) else { continue };
        let mut lanes = Vec::with_capacity(p.plan.len());
        for a in &p.plan {
            let mut v = Vec::new();
            for id in a.lanes() {
                v.push(network.lane(id).ok_or_else(|| ValidationError::UnknownLane(id.to_string()))?);
            }
            lanes.push(v);
        }
        for s in &ch.states {
            let action = p.plan[s.action].action;
            if crossing_exempt(action) {
                continue;
            }
            if site.has_junction() && site.junction_polygon.contains(s.pos(), 1e-9) {
                continue;
            }
            let (offset, lane) = lanes[s.action]
                .iter()
                .map(|l| (l.lateral(s.pos()).abs(), l))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("every action has a start lane");
            let limit = ((lane.width - tol.vehicle_width) / 2.0).max(0.0);
            if offset > limit + tol.slack {
                ok = false;
                diags.push(SimDiagnostic {
                    check: "illegal-crossing",
                    participant: p.id.clone(),
                    t: Some(s.t),
                    detail: format!("{action}: offset {offset:.3} m from {} exceeds {limit:.3} m", lane.id),
                });
                break;
            }
        }
    }
    Ok(ok)
}

/// Evaluates the SIM predicate on a replayed scenario.
pub fn check_sim(scenario: &Scenario, network: &RoadNetwork, tol: &SimTolerances) -> Result<SimVerdict, ValidationError> {
    let trace = replay(scenario, tol.dt)?;
    let mut diags = Vec::new();
    let no_illegal_crossing = lane_check(scenario, network, &trace, tol, &mut diags)?;

    let crash_type = scenario.abstract_.dynamic.crash_type;
    let striker = scenario.participants.iter().find(|p| p.role == Role::Striker);
    let victims: Vec<&ScenarioParticipant> = scenario.participants.iter().filter(|p| p.role == Role::Victim).collect();
    let mut angle_match = true;
    let mut simultaneity = true;
    match (striker, crash_type) {
        (Some(s), Some(ct)) if !victims.is_empty() => {
            let (lo, hi) = tol.bands.band(ct);
            let last = |id: &str| trace.channel(id).and_then(|c| c.states.last().copied());
            let sf = last(&s.id);
            for v in &victims {
                match (sf, last(&v.id)) {
                    (Some(a), Some(b)) => {
                        let angle = angle_between_deg(a.dir(), b.dir());
                        if angle < lo - tol.slack || angle > hi + tol.slack {
                            angle_match = false;
                            diags.push(SimDiagnostic {
                                check: "angle-match",
                                participant: v.id.clone(),
                                t: Some(b.t),
                                detail: format!("relative heading {angle:.2} deg outside [{lo}, {hi}] for {ct}"),
                            });
                        }
                        let gap = (a.t - b.t).abs();
                        if gap > tol.simultaneity_s {
                            simultaneity = false;
                            diags.push(SimDiagnostic {
                                check: "simultaneity",
                                participant: v.id.clone(),
                                t: None,
                                detail: format!("arrival gap {gap:.3} s exceeds {} s", tol.simultaneity_s),
                            });
                        }
                    }
                    _ => {
                        angle_match = false;
                        simultaneity = false;
                        diags.push(SimDiagnostic {
                            check: "simultaneity",
                            participant: v.id.clone(),
                            t: None,
                            detail: "striker or victim has an empty plan".into(),
                        });
                    }
                }
            }
        }
        _ => {
            angle_match = false;
            simultaneity = false;
            diags.push(SimDiagnostic {
                check: "angle-match",
                participant: String::new(),
                t: None,
                detail: "scenario lacks a striker, a victim or a crash type".into(),
            });
        }
    }
    Ok(SimVerdict {
        no_illegal_crossing,
        angle_match,
        simultaneity,
        overall: no_illegal_crossing && angle_match && simultaneity,
        diagnostics: diags,
    })
}

/// SIM over a batch of scenarios on one network, in input order.
pub fn check_sim_batch(
    scenarios: &[Scenario],
    network: &RoadNetwork,
    tol: &SimTolerances,
) -> Vec<Result<SimVerdict, ValidationError>> {
    scenarios.par_iter().map(|s| check_sim(s, network, tol)).collect()
}

/// Direction class of a manoeuvre from its heading change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionClass {
    Straight,
    Left,
    Right,
    Reverse,
}

impl DirectionClass {
    /// Classifies a signed heading change in degrees, counter-clockwise positive.
    pub fn from_turn_deg(delta: f64) -> Self {
        match delta {
            d if d.abs() <= 45.0 => DirectionClass::Straight,
            d if (45.0..135.0).contains(&d) => DirectionClass::Left,
            d if (-135.0..-45.0).contains(&d) => DirectionClass::Right,
            _ => DirectionClass::Reverse,
        }
    }

    /// Class an action must produce, if it constrains the heading change.
    pub fn expected(action: DrivingAction) -> Option<Self> {
        match action {
            DrivingAction::TurnLeft => Some(DirectionClass::Left),
            DrivingAction::TurnRight => Some(DirectionClass::Right),
            DrivingAction::VehicleCross | DrivingAction::FollowLane | DrivingAction::ChangeLane(_) => {
                Some(DirectionClass::Straight)
            }
            DrivingAction::UTurn => Some(DirectionClass::Reverse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ActionLabel {
    pub participant: String,
    pub action: DrivingAction,
    /// Direction of the bound destination lane relative to the start lane,
    /// or of the replayed heading change for single-lane actions.
    pub class: DirectionClass,
    /// The class matches the action and the replayed heading turns the
    /// same way.
    pub correct: bool,
}

fn signed_turn_deg(d0: Vec2, d1: Vec2) -> f64 {
    d0.cross(d1).atan2(d0.dot(d1)).to_degrees()
}

/// Direction class of every replayed action, compared with the class the
/// action requires.
pub fn action_labels(
    scenario: &Scenario,
    network: &RoadNetwork,
    trace: &ReplayTrace,
) -> Result<Vec<ActionLabel>, ValidationError> {
    let lane = |id: &str| network.lane(id).ok_or_else(|| ValidationError::UnknownLane(id.to_string()));
    let mut out = Vec::new();
    for p in &scenario.participants {
        let Some(ch) = trace.channel(&p.id) else { continue };
        for (i, a) in p.plan.iter().enumerate() {
            let states: Vec<&State> = ch.states.iter().filter(|s| s.action == i).collect();
            let (Some(first), Some(last)) = (states.first(), states.last()) else { continue };
            let driven = signed_turn_deg(first.dir(), last.dir());
            let class = match &a.end_lane {
                Some(end) => {
                    let (from, to) = (lane(&a.start_lane)?, lane(end)?);
                    DirectionClass::from_turn_deg(signed_turn_deg(from.dir(), to.dir()))
                }
                None => DirectionClass::from_turn_deg(driven),
            };
            let turns_right_way = match a.action {
                DrivingAction::TurnLeft | DrivingAction::UTurn => driven > -1e-9,
                DrivingAction::TurnRight => driven < 1e-9,
                _ => true,
            };
            out.push(ActionLabel {
                participant: p.id.clone(),
                action: a.action,
                class,
                correct: turns_right_way && DirectionClass::expected(a.action).map_or(true, |c| c == class),
            });
        }
    }
    Ok(out)
}

/// Fraction of reports whose trajectories all pass SIM. A report with no
/// trajectories was not reconstructed and counts as a failure.
pub fn compute_srr<S>(per_report: &[(S, Vec<bool>)]) -> Result<f64, ValidationError> {
    if per_report.is_empty() {
        return Err(ValidationError::EmptyInput);
    }
    let passed = per_report
        .iter()
        .filter(|(_, v)| !v.is_empty() && v.iter().all(|&b| b))
        .count();
    Ok(passed as f64 / per_report.len() as f64)
}

/// Percentage with three decimals, e.g. `94.000%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.3}%", fraction * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrrRow {
    /// Short map label such as `I1`.
    pub label: String,
    pub map: String,
    pub location: CollisionLocation,
    pub lane_width: f64,
    pub num: usize,
    pub passed: usize,
    pub srr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrrReport {
    pub rows: Vec<SrrRow>,
    /// One aggregate row per road type present.
    pub by_location: Vec<SrrRow>,
}

/// Per-map verdicts of one road type's reports.
pub struct MapVerdicts<'a> {
    pub label: &'a str,
    pub map: &'a str,
    pub location: CollisionLocation,
    pub lane_width: f64,
    pub reports: Vec<(String, Vec<bool>)>,
}

impl SrrReport {
    pub fn build(maps: &[MapVerdicts<'_>]) -> Result<SrrReport, ValidationError> {
        let mut rows = Vec::new();
        for m in maps {
            let srr = compute_srr(&m.reports)?;
            rows.push(SrrRow {
                label: m.label.to_string(),
                map: m.map.to_string(),
                location: m.location,
                lane_width: m.lane_width,
                num: m.reports.len(),
                passed: (srr * m.reports.len() as f64).round() as usize,
                srr,
            });
        }
        let mut by_location = Vec::new();
        for &loc in CollisionLocation::ALL {
            let all: Vec<(String, Vec<bool>)> = maps
                .iter()
                .filter(|m| m.location == loc)
                .flat_map(|m| m.reports.iter().cloned())
                .collect();
            if all.is_empty() {
                continue;
            }
            let srr = compute_srr(&all)?;
            by_location.push(SrrRow {
                label: loc.label().to_string(),
                map: "*".into(),
                location: loc,
                lane_width: f64::NAN,
                num: all.len(),
                passed: (srr * all.len() as f64).round() as usize,
                srr,
            });
        }
        Ok(SrrReport { rows, by_location })
    }

    /// Plain-text table with one row per map followed by the road-type totals.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<14} {:<22} {:>6} {:>6} {:>10}\n", "Map", "Road type", "Width", "Num", "SRR");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<14} {:<22} {:>6.1} {:>6} {:>10}\n",
                r.label,
                r.location.label(),
                r.lane_width,
                r.num,
                format_percent(r.srr)
            ));
        }
        for r in &self.by_location {
            s.push_str(&format!(
                "{:<14} {:<22} {:>6} {:>6} {:>10}\n",
                "total",
                r.location.label(),
                "-",
                r.num,
                format_percent(r.srr)
            ));
        }
        s
    }
}

/// Ego start pose; heading in degrees counter-clockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoMission {
    pub id: String,
    pub start_pose: Pose,
    pub destination: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpcSchedule {
    pub id: String,
    pub kind: ParticipantKind,
    pub schedule: Vec<TimedWaypoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    #[serde(rename = "type")]
    pub kind: OracleKind,
    pub v_min_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    CollisionMovingEgo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub ego: EgoMission,
    pub npcs: Vec<NpcSchedule>,
    pub oracle: OracleSpec,
    pub environment: Environment,
}

impl TestCase {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("test case serializes")
    }
}

fn start_heading(p: &ScenarioParticipant) -> f64 {
    let pts: Vec<Vec2> = p.waypoints().map(TimedWaypoint::pos).collect();
    pts.windows(2)
        .map(|w| w[1] - w[0])
        .find(|d| d.norm() > 1e-9)
        .map_or(0.0, |d| d.y.atan2(d.x).to_degrees())
}

/// One test case per vehicle, with that vehicle as ego and every other
/// participant replaying its schedule.
pub fn generate_tests(scenario: &Scenario, v_min: f64) -> Vec<TestCase> {
    scenario
        .participants
        .iter()
        .filter(|p| p.kind == ParticipantKind::Vehicle)
        .filter_map(|ego| {
            let (first, last) = (ego.first()?, ego.last()?);
            Some(TestCase {
                ego: EgoMission {
                    id: ego.id.clone(),
                    start_pose: Pose { x: first.x, y: first.y, heading_deg: start_heading(ego), v: first.v },
                    destination: last.pos(),
                },
                npcs: scenario
                    .participants
                    .iter()
                    .filter(|p| p.id != ego.id)
                    .map(|p| NpcSchedule {
                        id: p.id.clone(),
                        kind: p.kind,
                        schedule: p.waypoints().copied().collect(),
                    })
                    .collect(),
                oracle: OracleSpec { kind: OracleKind::CollisionMovingEgo, v_min_mps: v_min },
                environment: scenario.environment,
            })
        })
        .collect()
}

/// Ego driver that holds its start heading and speed until it reaches the
/// distance to its destination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstantVelocityAgent {
    /// Replaces the start speed when set; `Some(0.0)` parks the ego.
    pub speed: Option<f64>,
}

impl ConstantVelocityAgent {
    pub fn drive(&self, mission: &EgoMission, horizon: f64, dt: f64) -> Channel {
        let p = &mission.start_pose;
        let v = self.speed.unwrap_or(p.v).max(0.0);
        let h = p.heading_deg.to_radians();
        let dir = Vec2::new(h.cos(), h.sin());
        let start = Vec2::new(p.x, p.y);
        let reach = (mission.destination - start).dot(dir).max(0.0);
        let n = (horizon / dt + 1e-9).floor() as usize;
        let states = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let s = v * t;
                let (s, v) = if s >= reach { (reach, 0.0) } else { (s, v) };
                let q = start + dir * s;
                State { t, x: q.x, y: q.y, v, heading: h, action: 0 }
            })
            .collect();
        Channel { id: mission.id.clone(), kind: ParticipantKind::Vehicle, states }
    }
}

/// Replays a test case with the NPC schedules and the agent's ego channel.
pub fn simulate_test(test: &TestCase, agent: &ConstantVelocityAgent, dt: f64) -> Result<ReplayTrace, ValidationError> {
    if !(dt > 0.0) {
        return Err(ValidationError::InvalidTick(dt));
    }
    let horizon = test
        .npcs
        .iter()
        .filter_map(|n| n.schedule.last().map(|w| w.t))
        .fold(0.0, f64::max);
    let mut channels = vec![agent.drive(&test.ego, horizon, dt)];
    for npc in &test.npcs {
        let pts: Vec<(usize, TimedWaypoint)> = npc.schedule.iter().map(|w| (0, *w)).collect();
        channels.push(Channel { id: npc.id.clone(), kind: npc.kind, states: sample_schedule(&pts, dt) });
    }
    Ok(ReplayTrace { dt, channels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Footprint {
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub pedestrian_size: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Footprint { vehicle_length: 4.5, vehicle_width: 1.8, pedestrian_size: 0.6 }
    }
}

impl Footprint {
    pub fn of(&self, kind: ParticipantKind, s: &State) -> OrientedBox {
        let (length, width) = match kind {
            ParticipantKind::Vehicle => (self.vehicle_length, self.vehicle_width),
            ParticipantKind::Pedestrian => (self.pedestrian_size, self.pedestrian_size),
        };
        OrientedBox { center: s.pos(), heading: s.heading, length, width }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum OracleVerdict {
    /// Footprints overlap while the ego moves at or above `v_min`.
    Collision { t: f64, npc: String, ego_speed: f64 },
    /// Footprints overlap only while the ego is (nearly) stopped.
    PassiveCollision { t: f64, npc: String, ego_speed: f64 },
    NoCollision,
}

impl OracleVerdict {
    pub fn counts(&self) -> bool {
        matches!(self, OracleVerdict::Collision { .. })
    }
}

/// Collision oracle: only overlaps with a moving ego are counted.
pub fn collision_oracle(
    trace: &ReplayTrace,
    ego_id: &str,
    v_min: f64,
    footprint: &Footprint,
) -> Result<OracleVerdict, ValidationError> {
    let ego = trace
        .channel(ego_id)
        .filter(|c| !c.states.is_empty())
        .ok_or_else(|| ValidationError::MissingEgoChannel(ego_id.to_string()))?;
    let mut passive = None;
    for k in 0..trace.ticks() {
        let Some(e) = ego.at(k) else { continue };
        let eb = footprint.of(ego.kind, e);
        for c in trace.channels.iter().filter(|c| c.id != ego_id) {
            let Some(s) = c.at(k) else { continue };
            if !eb.overlaps(&footprint.of(c.kind, s)) {
                continue;
            }
            if e.v >= v_min {
                return Ok(OracleVerdict::Collision { t: e.t, npc: c.id.clone(), ego_speed: e.v });
            }
            if passive.is_none() {
                passive = Some(OracleVerdict::PassiveCollision { t: e.t, npc: c.id.clone(), ego_speed: e.v });
            }
        }
    }
    Ok(passive.unwrap_or(OracleVerdict::NoCollision))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(x: f64, y: f64, v: f64, t: f64) -> TimedWaypoint {
        TimedWaypoint { x, y, v, t }
    }

    #[test]
    fn linear_interpolation_at_midpoint() {
        let s = sample_schedule(&[(0, wp(0.0, 0.0, 10.0, 0.0)), (0, wp(20.0, 0.0, 10.0, 2.0))], 0.05);
        let mid = s.iter().find(|s| (s.t - 1.0).abs() < 1e-9).unwrap();
        assert!((mid.x - 10.0).abs() < 1e-9 && mid.y.abs() < 1e-12);
        assert!((s.last().unwrap().t - 2.0).abs() < 1e-12);
        assert_eq!(s.len(), 41);
    }

    #[test]
    fn final_sample_lands_on_total_time() {
        let s = sample_schedule(&[(0, wp(0.0, 0.0, 1.0, 0.0)), (0, wp(1.03, 0.0, 1.0, 1.03))], 0.05);
        assert!((s.last().unwrap().t - 1.03).abs() < 1e-12);
        assert!((s.last().unwrap().x - 1.03).abs() < 1e-12);
    }

    #[test]
    fn empty_schedule_gives_empty_channel() {
        assert!(sample_schedule(&[], 0.05).is_empty());
    }

    #[test]
    fn srr_counts_reports_with_every_trajectory_passing() {
        let reports = vec![("a", vec![true, true]), ("b", vec![true, false]), ("c", vec![])];
        assert!((compute_srr(&reports).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let none: Vec<(&str, Vec<bool>)> = Vec::new();
        assert_eq!(compute_srr(&none), Err(ValidationError::EmptyInput));
    }

    #[test]
    fn direction_classes() {
        assert_eq!(DirectionClass::from_turn_deg(90.0), DirectionClass::Left);
        assert_eq!(DirectionClass::from_turn_deg(-88.0), DirectionClass::Right);
        assert_eq!(DirectionClass::from_turn_deg(3.0), DirectionClass::Straight);
        assert_eq!(DirectionClass::from_turn_deg(-179.0), DirectionClass::Reverse);
    }

    #[test]
    fn stopped_ego_overlap_is_passive() {
        let ch = |id: &str, x: f64, v: f64| Channel {
            id: id.into(),
            kind: ParticipantKind::Vehicle,
            states: vec![State { t: 0.0, x, y: 0.0, v, heading: 0.0, action: 0 }],
        };
        let fp = Footprint::default();
        let parked = ReplayTrace { dt: 0.05, channels: vec![ch("ego", 0.0, 0.0), ch("npc", 3.0, 8.0)] };
        assert!(matches!(collision_oracle(&parked, "ego", 0.5, &fp), Ok(OracleVerdict::PassiveCollision { .. })));
        let moving = ReplayTrace { dt: 0.05, channels: vec![ch("ego", 0.0, 5.0), ch("npc", 3.0, 8.0)] };
        assert!(matches!(collision_oracle(&moving, "ego", 0.5, &fp), Ok(OracleVerdict::Collision { .. })));
        let apart = ReplayTrace { dt: 0.05, channels: vec![ch("ego", 0.0, 5.0), ch("npc", 30.0, 8.0)] };
        assert_eq!(collision_oracle(&apart, "ego", 0.5, &fp), Ok(OracleVerdict::NoCollision));
        assert_eq!(
            collision_oracle(&apart, "nobody", 0.5, &fp),
            Err(ValidationError::MissingEgoChannel("nobody".into()))
        );
    }
}
