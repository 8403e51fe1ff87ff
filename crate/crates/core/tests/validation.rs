mod common;

use common::reconstruct;
use crashsynth::geometry::Vec2;
use crashsynth::model::{DrivingAction, Lighting, ParticipantKind, Weather};
use crashsynth::planner::Environment;
use crashsynth::scenario::TimedWaypoint;
use crashsynth::validation::{
    check_sim, collision_oracle, compute_srr, format_percent, generate_tests, replay, simulate_test,
    ConstantVelocityAgent, EgoMission, Footprint, NpcSchedule, OracleKind, OracleSpec, OracleVerdict, Pose,
    SimTolerances, TestCase, ValidationError, DEFAULT_DT, DEFAULT_V_MIN,
};

fn wp(x: f64, y: f64, v: f64, t: f64) -> TimedWaypoint {
    TimedWaypoint { x, y, v, t }
}

/// Ego on the x axis heading east; an NPC closes in from behind at 15 m/s.
fn rear_approach(ego_speed: f64) -> TestCase {
    TestCase {
        ego: EgoMission {
            id: "EGO".into(),
            start_pose: Pose { x: 0.0, y: 0.0, heading_deg: 0.0, v: ego_speed },
            destination: Vec2::new(60.0, 0.0),
        },
        npcs: vec![NpcSchedule {
            id: "NPC".into(),
            kind: ParticipantKind::Vehicle,
            schedule: vec![wp(-20.0, 0.0, 15.0, 0.0), wp(40.0, 0.0, 15.0, 4.0)],
        }],
        oracle: OracleSpec { kind: OracleKind::CollisionMovingEgo, v_min_mps: DEFAULT_V_MIN },
        environment: Environment { weather: Weather::Clear, lighting: Lighting::Daylight },
    }
}

fn oracle_for(test: &TestCase, agent: ConstantVelocityAgent) -> OracleVerdict {
    let trace = simulate_test(test, &agent, DEFAULT_DT).unwrap();
    collision_oracle(&trace, &test.ego.id, test.oracle.v_min_mps, &Footprint::default()).unwrap()
}

#[test]
fn left_turn_reconstruction_passes_sim() {
    let (s, m) = reconstruct("int_01_left_turn_vs_oncoming", "I1");
    let v = check_sim(&s, &m.network, &SimTolerances::default()).unwrap();
    assert!(v.overall, "{:?}", v.diagnostics);
    assert_eq!(v.overall, v.no_illegal_crossing && v.angle_match && v.simultaneity);
}

#[test]
fn lane_follower_shifted_two_metres_crosses_a_line() {
    let (mut s, m) = reconstruct("st_01_stopped_vehicle", "S1");
    assert_eq!(m.lane_width, 3.0);
    let p = s.participants.iter_mut().find(|p| p.plan[0].action == DrivingAction::FollowLane).unwrap();
    let lane = m.network.lane(&p.plan[0].start_lane).unwrap();
    let n = lane.dir().right_normal();
    for a in &mut p.plan {
        for w in &mut a.waypoints {
            w.x += 2.0 * n.x;
            w.y += 2.0 * n.y;
        }
    }
    let v = check_sim(&s, &m.network, &SimTolerances::default()).unwrap();
    assert!(!v.no_illegal_crossing);
    assert!(!v.overall);
    assert!(v.diagnostics.iter().any(|d| d.check == "illegal-crossing"));
}

#[test]
fn rear_end_rotated_to_a_right_angle_fails_the_angle_check() {
    let (mut s, m) = reconstruct("st_01_stopped_vehicle", "S1");
    let crash = s.participants[0].last().unwrap().pos();
    let victim = s.participants.iter_mut().find(|p| p.id == "V2").unwrap();
    for a in &mut victim.plan {
        for w in &mut a.waypoints {
            let d = (w.pos() - crash).rotated(std::f64::consts::FRAC_PI_2);
            w.x = crash.x + d.x;
            w.y = crash.y + d.y;
        }
    }
    let v = check_sim(&s, &m.network, &SimTolerances::default()).unwrap();
    assert!(!v.angle_match);
    assert!(!v.overall);
}

#[test]
fn replay_interpolates_linearly_and_ends_together() {
    let (s, _) = reconstruct("int_01_left_turn_vs_oncoming", "I2");
    let trace = replay(&s, DEFAULT_DT).unwrap();
    let ends: Vec<_> = trace.channels.iter().map(|c| *c.states.last().unwrap()).collect();
    assert!((ends[0].t - ends[1].t).abs() <= 1e-6);
    assert!(ends[0].pos().distance(ends[1].pos()) <= 1e-6);
    for (c, p) in trace.channels.iter().zip(&s.participants) {
        assert!((c.states.last().unwrap().t - p.total_time()).abs() < 1e-9);
    }
}

#[test]
fn two_vehicles_give_two_tests_with_verbatim_schedules() {
    let (s, _) = reconstruct("int_01_left_turn_vs_oncoming", "I1");
    let tests = generate_tests(&s, DEFAULT_V_MIN);
    assert_eq!(tests.len(), 2);
    for t in &tests {
        let ego = s.participant(&t.ego.id).unwrap();
        let first = ego.first().unwrap();
        assert_eq!((t.ego.start_pose.x, t.ego.start_pose.y), (first.x, first.y));
        assert_eq!(t.ego.destination, ego.last().unwrap().pos());
        assert!(t.npcs.iter().all(|n| n.id != t.ego.id));
        for n in &t.npcs {
            let src: Vec<TimedWaypoint> = s.participant(&n.id).unwrap().waypoints().copied().collect();
            assert_eq!(n.schedule, src);
        }
        let json: serde_json::Value = serde_json::from_str(&t.to_json_pretty()).unwrap();
        assert_eq!(json["oracle"]["type"], "collision_moving_ego");
        assert!(json["ego"].get("schedule").is_none());
    }
}

#[test]
fn pedestrians_are_never_ego() {
    let (s, _) = reconstruct("int_08_pedestrian_crosswalk", "I1");
    let tests = generate_tests(&s, DEFAULT_V_MIN);
    assert_eq!(tests.len(), 1);
    assert_eq!(tests[0].ego.id, "V1");
    assert_eq!(tests[0].npcs.len(), 1);
    assert_eq!(tests[0].npcs[0].kind, ParticipantKind::Pedestrian);
}

#[test]
fn parked_ego_is_a_passive_collision() {
    let v = oracle_for(&rear_approach(5.0), ConstantVelocityAgent { speed: Some(0.0) });
    assert!(matches!(v, OracleVerdict::PassiveCollision { .. }), "{v:?}");
    assert!(!v.counts());
}

#[test]
fn moving_ego_collision_is_counted() {
    let v = oracle_for(&rear_approach(5.0), ConstantVelocityAgent::default());
    match v {
        OracleVerdict::Collision { ego_speed, .. } => assert!((ego_speed - 5.0).abs() < 1e-12),
        other => panic!("expected a collision, got {other:?}"),
    }
}

#[test]
fn distant_traffic_is_no_collision() {
    let mut t = rear_approach(5.0);
    for w in &mut t.npcs[0].schedule {
        w.y += 10.0;
    }
    assert_eq!(oracle_for(&t, ConstantVelocityAgent::default()), OracleVerdict::NoCollision);
}

#[test]
fn oracle_needs_the_ego_channel() {
    let t = rear_approach(5.0);
    let trace = simulate_test(&t, &ConstantVelocityAgent::default(), DEFAULT_DT).unwrap();
    assert_eq!(
        collision_oracle(&trace, "GHOST", DEFAULT_V_MIN, &Footprint::default()),
        Err(ValidationError::MissingEgoChannel("GHOST".into()))
    );
}

#[test]
fn forty_seven_of_fifty_is_ninety_four_percent() {
    let reports: Vec<(usize, Vec<bool>)> = (0..50).map(|i| (i, vec![i >= 3, true])).collect();
    let srr = compute_srr(&reports).unwrap();
    assert_eq!(format_percent(srr), "94.000%");
}

#[test]
fn one_failing_trajectory_fails_its_report() {
    assert_eq!(compute_srr(&[("mixed", vec![true, false])]).unwrap(), 0.0);
    assert_eq!(compute_srr(&[("all", vec![true, true])]).unwrap(), 1.0);
}
