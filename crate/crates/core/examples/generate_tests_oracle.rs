//! Turns one reconstructed scenario into ego test cases and scores each
//! with the constant-velocity stub agent.

use anyhow::Result;
use crashsynth::fixtures::{four_way_map, load_corpus};
use crashsynth::planner::{plan_scenario, PlannerConfig};
use crashsynth::scenario::Scenario;
use crashsynth::validation::{
    collision_oracle, generate_tests, simulate_test, ConstantVelocityAgent, Footprint, DEFAULT_DT, DEFAULT_V_MIN,
};

fn main() -> Result<()> {
    let network = four_way_map(2, 3.5, 60.0);
    let config = PlannerConfig::default();
    for (name, abs) in load_corpus().iter().filter(|(n, _)| n.starts_with("int_0")).take(3) {
        let Ok(out) = plan_scenario(abs, &network, &config) else { continue };
        let scenario = Scenario::from_reconstruction(&out.scenarios[0]);
        for test in generate_tests(&scenario, DEFAULT_V_MIN) {
            for (label, agent) in [("moving", ConstantVelocityAgent::default()), ("parked", ConstantVelocityAgent { speed: Some(0.0) })] {
                let trace = simulate_test(&test, &agent, DEFAULT_DT)?;
                let v = collision_oracle(&trace, &test.ego.id, test.oracle.v_min_mps, &Footprint::default())?;
                println!("{name} ego {} {label}: {v:?} counted={}", test.ego.id, v.counts());
            }
        }
    }
    Ok(())
}
