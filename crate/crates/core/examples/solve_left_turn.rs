//! Reconstructs a left turn against oncoming traffic on a four-way junction
//! and prints the solved waypoints and re-verification result.

use anyhow::{Context, Result};
use crashsynth::fixtures::{four_way_map, load_corpus};
use crashsynth::planner::{plan_scenario, PlannerConfig};
use crashsynth::verify::{verify_plans, VerifyInput};

fn main() -> Result<()> {
    let corpus = load_corpus();
    let (_, abs) = corpus
        .iter()
        .find(|(n, _)| n == "int_01_left_turn_vs_oncoming")
        .context("bundled abstract")?;
    let network = four_way_map(2, 3.5, 60.0);
    let config = PlannerConfig::default();
    let out = plan_scenario(abs, &network, &config)?;
    let s = out.scenarios.first().context("no scenario")?;
    println!("site {} collision area {:.2} m^2", s.site_id, s.collision_area.polygon.area());
    for plan in &s.plans {
        println!("{} ({:.2} s)", plan.participant_id, plan.total_time);
        for a in &plan.trajectories {
            println!("  {}", a.action);
            for (i, w) in a.waypoints.iter().enumerate() {
                let dt = a.segment_durations.get(i).map_or(String::new(), |d| format!("  dt {d:.2}"));
                println!("    ({:7.2}, {:7.2}) v {:5.2}{dt}", w.x, w.y, w.v);
            }
        }
    }
    let site = network.site(&s.site_id).context("site")?;
    let violations = verify_plans(VerifyInput {
        network: &network,
        site,
        abstract_: abs,
        plans: &s.plans,
        collision_area: &s.collision_area.polygon,
        config: &config.solver,
    });
    println!("re-verification: {} violation(s)", violations.len());
    Ok(())
}
