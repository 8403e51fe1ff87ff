//! Plans each corpus abstract on a narrow fixture and its double-width twin
//! and compares the replayed action labels.

use anyhow::Result;
use crashsynth::fixtures::{generalization_pairs, load_corpus};
use crashsynth::planner::{plan_scenario, PlannerConfig};
use crashsynth::scenario::Scenario;
use crashsynth::validation::{action_labels, replay, DEFAULT_DT};

fn main() -> Result<()> {
    let corpus = load_corpus();
    let config = PlannerConfig::default();
    for (narrow, wide) in generalization_pairs() {
        println!("{} ({} m) vs {} ({} m)", narrow.name, narrow.lane_width, wide.name, wide.lane_width);
        for (name, abs) in corpus.iter().filter(|(_, a)| a.collision_location == narrow.location) {
            let (Ok(n), Ok(w)) = (plan_scenario(abs, &narrow.network, &config), plan_scenario(abs, &wide.network, &config))
            else {
                println!("  {name}: not solved on both");
                continue;
            };
            let sn = Scenario::from_reconstruction(&n.scenarios[0]);
            let sw = Scenario::from_reconstruction(&w.scenarios[0]);
            let ln = action_labels(&sn, &narrow.network, &replay(&sn, DEFAULT_DT)?)?;
            let lw = action_labels(&sw, &wide.network, &replay(&sw, DEFAULT_DT)?)?;
            let same = ln == lw && ln.iter().all(|l| l.correct);
            println!("  {name}: {}", if same { "labels kept" } else { "labels differ" });
        }
    }
    Ok(())
}
