//! Loads a bundled map, lists the candidate sites for one abstract and the
//! lane binding chosen at each.

use std::env;

use anyhow::Result;
use crashsynth::fixtures::{data_dir, load_corpus};
use crashsynth::road::{cal_max_lanes, convert_info, enumerate_candidates, parse_map};

fn main() -> Result<()> {
    let map = env::args().nth(1).unwrap_or_else(|| "grid_city".into());
    let network = parse_map(&std::fs::read_to_string(data_dir().join("maps").join(format!("{map}.json")))?)?;
    println!("{map}: {} roads, {} sites", network.roads.len(), network.sites.len());

    for (name, abs) in load_corpus().iter().take(3) {
        let lanes = cal_max_lanes(abs);
        let sites = enumerate_candidates(&network, abs.collision_location, lanes);
        println!("\n{name}: needs {lanes} lane(s), {} candidate site(s)", sites.len());
        for site in sites {
            match convert_info(abs, &network, site) {
                Ok(b) => {
                    println!("  {} rotated {:.0} deg", site.id, b.rotation_deg);
                    for p in &b.participants {
                        println!("    {} -> {} lane {} heading {:?}", p.participant_id, p.road_id, p.lane_index, p.direction);
                    }
                }
                Err(e) => println!("  {}: {e}", site.id),
            }
        }
    }
    Ok(())
}
