mod common;

use std::sync::OnceLock;

use common::checks::{left_turn_violations, plan_violations, EPS, SIMULTANEITY_S};
use common::corpus;
use common::oracle::{lane, solve_single};
use crashsynth::constraint::SolverConfig;
use crashsynth::fixtures::{load_corpus, micro_straight, rotated_four_way_map, srr_maps, MAP_SPEED};
use crashsynth::geometry::{convex_hull, ConvexPolygon, Vec2};
use crashsynth::model::{
    apply_defaults, parse_abstract, parse_partial, DrivingAction, Lighting, ParticipantKind, PartialAbstract, Weather,
};
use crashsynth::planner::{compute_collision_area, plan_scenario, AreaError, Environment, PlannerConfig};
use crashsynth::road::convert_info;
use crashsynth::scenario::{Scenario, TimedWaypoint};
use crashsynth::validation::{
    collision_oracle, compute_srr, replay, simulate_test, ConstantVelocityAgent, EgoMission, Footprint, NpcSchedule,
    OracleKind, OracleSpec, Pose, TestCase,
};
use proptest::prelude::*;

/// One reconstruction per corpus abstract on the first bundled map of its
/// road type.
fn reconstructions() -> &'static [(String, Scenario)] {
    static CELL: OnceLock<Vec<(String, Scenario)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let maps = srr_maps();
        load_corpus()
            .into_iter()
            .filter_map(|(name, abs)| {
                let m = maps.iter().find(|m| m.location == abs.collision_location)?;
                let out = plan_scenario(&abs, &m.network, &PlannerConfig::default()).ok()?;
                Some((name, Scenario::from_reconstruction(&out.scenarios[0])))
            })
            .collect()
    })
}

fn polygon(points: &[(f64, f64)]) -> ConvexPolygon {
    convex_hull(&points.iter().map(|&(x, y)| Vec2::new(x, y)).collect::<Vec<_>>())
}

fn rear_approach(ego_speed: f64, v_min: f64) -> TestCase {
    TestCase {
        ego: EgoMission {
            id: "EGO".into(),
            start_pose: Pose { x: 0.0, y: 0.0, heading_deg: 0.0, v: ego_speed },
            destination: Vec2::new(60.0, 0.0),
        },
        npcs: vec![NpcSchedule {
            id: "NPC".into(),
            kind: ParticipantKind::Vehicle,
            schedule: vec![
                TimedWaypoint { x: -20.0, y: 0.0, v: 15.0, t: 0.0 },
                TimedWaypoint { x: 40.0, y: 0.0, v: 15.0, t: 4.0 },
            ],
        }],
        oracle: OracleSpec { kind: OracleKind::CollisionMovingEgo, v_min_mps: v_min },
        environment: Environment { weather: Weather::Clear, lighting: Lighting::Daylight },
    }
}

fn counts(ego_speed: f64, v_min: f64) -> bool {
    let t = rear_approach(ego_speed, v_min);
    let trace = simulate_test(&t, &ConstantVelocityAgent::default(), 0.05).unwrap();
    collision_oracle(&trace, "EGO", v_min, &Footprint::default()).unwrap().counts()
}

fn heading_deg(v: Vec2) -> f64 {
    v.y.atan2(v.x).to_degrees()
}

fn wrap_deg(a: f64) -> f64 {
    (a + 540.0).rem_euclid(360.0) - 180.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn micro_lane_actions_keep_the_numeric_relations(
        stop in any::<bool>(),
        length in 20.0..120.0f64,
        width in 3.0..4.5f64,
        limit in 2.0..25.0f64,
    ) {
        let action = if stop { DrivingAction::Stop } else { DrivingAction::FollowLane };
        let net = micro_straight(1, width, length, MAP_SPEED);
        let l = lane(&net);
        let cfg = SolverConfig::default();
        let plan = &solve_single(action, width, length, limit, &cfg).unwrap();
        let v = plan_violations(plan, ParticipantKind::Vehicle, limit);
        prop_assert!(v.is_empty(), "{v:?}");
        let w = &plan.trajectories[0].waypoints;
        prop_assert_eq!(w.len(), cfg.waypoints_for(action));
        let half = (width - 1.8) / 2.0;
        for p in w {
            prop_assert!(l.lateral(p.pos()).abs() <= half + EPS);
            prop_assert!(l.along(p.pos()) >= -EPS && l.along(p.pos()) <= l.length() + EPS);
        }
        for pair in w.windows(2) {
            prop_assert!(l.along(pair[1].pos()) > l.along(pair[0].pos()));
        }
        for dt in &plan.trajectories[0].segment_durations {
            prop_assert!(*dt >= cfg.dt_min - EPS && *dt <= cfg.dt_max + EPS);
        }
    }

    #[test]
    fn srr_is_the_share_of_fully_passing_reports(
        reports in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..5), 1..40),
    ) {
        let rows: Vec<(usize, Vec<bool>)> = reports.iter().cloned().enumerate().collect();
        let srr = compute_srr(&rows).unwrap();
        let passing = reports.iter().filter(|r| r.iter().all(|&b| b)).count();
        prop_assert!((0.0..=1.0).contains(&srr));
        prop_assert!((srr - passing as f64 / reports.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn collision_area_is_commutative_and_inside_both(
        a in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..8),
        b in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..8),
        a_min in 0.01..2.0f64,
    ) {
        let (pa, pb) = (polygon(&a), polygon(&b));
        match (compute_collision_area(&pa, &pb, a_min), compute_collision_area(&pb, &pa, a_min)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.area() - y.area()).abs() < 1e-9);
                prop_assert!(x.area() >= a_min);
                prop_assert!(x.area() <= pa.area().min(pb.area()) + 1e-9);
                for &v in x.vertices() {
                    prop_assert!(pa.contains(v, 1e-7) && pb.contains(v, 1e-7));
                }
            }
            (Err(AreaError::NoOverlap { .. }), Err(AreaError::NoOverlap { .. })) => {}
            (x, y) => prop_assert!(false, "asymmetric outcome {x:?} / {y:?}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn serialized_abstracts_parse_back_unchanged(
        pick in 0usize..1000,
        weather in prop::sample::select(Weather::ALL.to_vec()),
        lighting in prop::sample::select(Lighting::ALL.to_vec()),
        speed in 1.0..40.0f64,
    ) {
        let pool = load_corpus();
        let mut abs = pool[pick % pool.len()].1.clone();
        abs.weather = weather;
        abs.lighting = lighting;
        abs.speed_limit = speed;
        let back = parse_abstract(&abs.to_json_pretty()).unwrap();
        prop_assert_eq!(&back, &abs);
    }

    #[test]
    fn defaults_are_idempotent(
        pick in 0usize..1000,
        drop_weather in any::<bool>(),
        drop_lighting in any::<bool>(),
        drop_lanes in any::<bool>(),
        drop_speed in any::<bool>(),
        drop_crash in any::<bool>(),
    ) {
        let pool = load_corpus();
        let abs = &pool[pick % pool.len()].1;
        let mut partial = PartialAbstract::from(abs);
        if drop_weather { partial.weather = None; }
        if drop_lighting { partial.lighting = None; }
        if drop_lanes { partial.lane_num = None; }
        if drop_speed { partial.speed_limit = None; }
        if drop_crash { partial.crash_type = None; }
        let once = apply_defaults(&partial).unwrap();
        let twice = apply_defaults(&PartialAbstract::from(&once)).unwrap();
        prop_assert_eq!(&once, &twice);
        let reparsed = apply_defaults(&parse_partial(&once.to_json_pretty()).unwrap()).unwrap();
        prop_assert_eq!(&once, &reparsed);
    }

    #[test]
    fn lower_speed_floor_never_drops_a_counted_collision(
        ego_speed in 0.0..8.0f64,
        a in 0.0..6.0f64,
        b in 0.0..6.0f64,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if counts(ego_speed, hi) {
            prop_assert!(counts(ego_speed, lo));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replayed_participants_arrive_together(pick in 0usize..1000, dt in 0.01..0.2f64) {
        let pool = reconstructions();
        let (name, s) = &pool[pick % pool.len()];
        let trace = replay(s, dt).unwrap();
        let ends: Vec<_> = trace.channels.iter().map(|c| *c.states.last().unwrap()).collect();
        for e in &ends[1..] {
            prop_assert!((e.t - ends[0].t).abs() <= 1e-6, "{}", name);
        }
        for (c, p) in trace.channels.iter().zip(&s.participants) {
            let last = c.states.last().unwrap();
            prop_assert!((last.t - p.total_time()).abs() < 1e-9, "{}", name);
            prop_assert!(last.pos().distance(p.last().unwrap().pos()) < 1e-9, "{}", name);
        }
    }

    #[test]
    fn bindings_preserve_relative_headings(pick in 0usize..1000, rotation in -180.0..180.0f64) {
        let pool = load_corpus();
        let intersection: Vec<_> = pool
            .iter()
            .filter(|(_, a)| a.collision_location == crashsynth::model::CollisionLocation::Intersection)
            .collect();
        let (name, abs) = intersection[pick % intersection.len()];
        let net = rotated_four_way_map(rotation);
        let Ok(binding) = convert_info(abs, &net, &net.sites[0]) else { return Ok(()) };
        let unit = |p: &crashsynth::model::ParticipantSpec| {
            let (x, y) = p.driving_direction.unit();
            Vec2::new(x, y)
        };
        let first = &abs.participants[0];
        let b0 = binding.participant(&first.id).unwrap();
        for p in &abs.participants[1..] {
            let bp = binding.participant(&p.id).unwrap();
            let want = wrap_deg(heading_deg(unit(p)) - heading_deg(unit(first)));
            let got = wrap_deg(heading_deg(bp.heading) - heading_deg(b0.heading));
            prop_assert!(wrap_deg(want - got).abs() <= 2.0, "{}: {} vs {}", name, want, got);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn left_turns_curve_left_on_rotated_junctions(rotation in -180.0..180.0f64) {
        let abs = corpus("int_01_left_turn_vs_oncoming");
        let net = rotated_four_way_map(rotation);
        let out = plan_scenario(&abs, &net, &PlannerConfig::default()).unwrap();
        let s = &out.scenarios[0];
        for p in &s.plans {
            for a in p.trajectories.iter().filter(|a| a.action == DrivingAction::TurnLeft) {
                prop_assert_eq!(left_turn_violations(a), 0);
            }
        }
        let ends: Vec<f64> = s.plans.iter().map(|p| p.total_time).collect();
        let spread = ends.iter().cloned().fold(f64::MIN, f64::max) - ends.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(spread <= SIMULTANEITY_S);
    }
}
