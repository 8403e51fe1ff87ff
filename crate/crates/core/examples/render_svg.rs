//! Writes an SVG drawing of one reconstruction to the given path.

use std::env;

use anyhow::{Context, Result};
use crashsynth::fixtures::{load_corpus, t_junction_map};
use crashsynth::planner::{plan_scenario, PlannerConfig};
use crashsynth::render::render_svg;
use crashsynth::scenario::Scenario;

fn main() -> Result<()> {
    let path = env::args().nth(1).unwrap_or_else(|| "scenario.svg".into());
    let corpus = load_corpus();
    let (_, abs) = corpus.iter().find(|(n, _)| n.starts_with("tj_01")).context("bundled abstract")?;
    let network = t_junction_map(2, 3.5, 60.0);
    let out = plan_scenario(abs, &network, &PlannerConfig::default())?;
    let scenario = Scenario::from_reconstruction(out.scenarios.first().context("no scenario")?);
    std::fs::write(&path, render_svg(&scenario, &network))?;
    println!("wrote {path}");
    Ok(())
}
