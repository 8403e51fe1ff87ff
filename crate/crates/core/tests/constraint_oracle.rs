//! Solver feasibility against exhaustive grid enumeration on micro maps.

mod common;

use common::oracle::{grid_feasible, lane, problems, route, solver_feasible, Problem};
use crashsynth::constraint::{build_chain_constraints, fd, PlanSkeleton, SolverConfig};
use crashsynth::fixtures::{micro_straight, MAP_SPEED};
use crashsynth::geometry::Vec2;
use crashsynth::model::{DrivingAction, ParticipantKind};

#[test]
fn solver_agrees_with_grid_enumeration() {
    let ps = problems();
    assert!(ps.len() >= 20);
    let mut feasible = 0;
    for p in &ps {
        let (s, g) = (solver_feasible(p), grid_feasible(p));
        assert_eq!(s, g, "disagreement on {p:?}");
        feasible += usize::from(g);
    }
    assert!(feasible > 0 && feasible < ps.len(), "the set mixes feasible and infeasible problems");
}

#[test]
fn zero_speed_limit_is_infeasible() {
    let p = Problem {
        action: DrivingAction::FollowLane,
        limit: 0.0,
        length: 40.0,
        width: 3.5,
        dt_min: 0.1,
        dt_max: 10.0,
    };
    assert!(!solver_feasible(&p));
}

#[test]
fn fd_sign_products() {
    let net = micro_straight(1, 3.0, 100.0, MAP_SPEED);
    let mut l = lane(&net).clone();
    l.entrance = Vec2::new(0.0, 0.0);
    l.exit = Vec2::new(100.0, 5.0);
    assert!(fd(Vec2::new(10.0, 1.0), Vec2::new(20.0, 2.0), &l));
    assert!(!fd(Vec2::new(20.0, 2.0), Vec2::new(10.0, 1.0), &l));
    l.exit = Vec2::new(100.0, 0.0);
    assert!(fd(Vec2::new(10.0, 0.0), Vec2::new(20.0, 0.0), &l));
}

#[test]
fn chaining_adds_one_equality_pair_per_joint() {
    let net = micro_straight(2, 3.5, 60.0, MAP_SPEED);
    let l = lane(&net);
    let cfg = SolverConfig::default();
    let plan = |n: usize| vec![route(l, DrivingAction::FollowLane); n];
    let skeleton = PlanSkeleton::declare(
        &[
            ("S".to_string(), ParticipantKind::Vehicle, plan(2)),
            ("V".to_string(), ParticipantKind::Vehicle, plan(3)),
            ("W".to_string(), ParticipantKind::Vehicle, plan(1)),
        ],
        &cfg,
        (Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0)),
        20.0,
    );
    let set = build_chain_constraints(&skeleton);
    assert_eq!(set.relations_in_group(4).count(), 2 * (1 + 2));
    assert!(set.relations.iter().all(|r| r.tag.participant != "W"));
}

