//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use crashsynth::fixtures::{load_corpus, srr_maps, NamedMap};
use crashsynth::model::AccidentAbstract;
use crashsynth::planner::{plan_scenario, PlannerConfig};
use crashsynth::scenario::Scenario;

pub fn map(name: &str) -> NamedMap {
    srr_maps().into_iter().find(|m| m.name == name).expect("bundled map")
}

pub fn corpus(name: &str) -> AccidentAbstract {
    load_corpus()
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, a)| a)
        .expect("bundled abstract")
}

/// First reconstruction of a corpus abstract on a bundled map.
pub fn reconstruct(abstract_name: &str, map_name: &str) -> (Scenario, NamedMap) {
    let m = map(map_name);
    let out = plan_scenario(&corpus(abstract_name), &m.network, &PlannerConfig::default())
        .unwrap_or_else(|e| panic!("{abstract_name} on {map_name}: {e}"));
    (Scenario::from_reconstruction(&out.scenarios[0]), m)
}
