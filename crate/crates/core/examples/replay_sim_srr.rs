//! Plans the bundled corpus on the evaluation maps, replays every scenario
//! through the SIM predicate and prints the reconstruction-rate table.

use anyhow::Result;
use crashsynth::fixtures::{load_corpus, srr_maps};
use crashsynth::planner::{plan_scenario, PlannerConfig};
use crashsynth::scenario::Scenario;
use crashsynth::validation::{check_sim, MapVerdicts, SimTolerances, SrrReport};

fn main() -> Result<()> {
    let corpus = load_corpus();
    let config = PlannerConfig::default();
    let tol = SimTolerances::default();
    let maps = srr_maps();
    let mut verdicts = Vec::new();
    for map in &maps {
        let mut reports = Vec::new();
        for (name, abs) in corpus.iter().filter(|(_, a)| a.collision_location == map.location) {
            let mut passes = Vec::new();
            if let Ok(out) = plan_scenario(abs, &map.network, &config) {
                for s in &out.scenarios {
                    let v = check_sim(&Scenario::from_reconstruction(s), &map.network, &tol)?;
                    for d in &v.diagnostics {
                        println!("{} {name} {}: {} {}", map.name, s.site_id, d.check, d.detail);
                    }
                    passes.push(v.overall);
                }
            } else {
                println!("{} {name}: no scenario", map.name);
            }
            reports.push((name.clone(), passes));
        }
        verdicts.push(MapVerdicts {
            label: &map.name,
            map: &map.name,
            location: map.location,
            lane_width: map.lane_width,
            reports,
        });
    }
    print!("{}", SrrReport::build(&verdicts)?.to_table());
    Ok(())
}
