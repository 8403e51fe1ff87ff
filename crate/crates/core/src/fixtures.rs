//! Parametric maps and bundled data used by tests, examples and the CLI.

use std::fs;
use std::path::{Path, PathBuf};

use crate::geometry::Vec2;
use crate::model::{parse_abstract, AccidentAbstract, CollisionLocation};
use crate::road::{ArmSpec, MapBuilder, RoadNetwork};

/// Urban default used by every bundled map.
pub const MAP_SPEED: f64 = 13.4;

/// Directory holding the bundled corpus, maps and report fixtures.
pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Single four-way intersection `X1` centered at the origin.
pub fn four_way_map(lanes: u32, lane_width: f64, arm_length: f64) -> RoadNetwork {
    MapBuilder::new()
        .four_way("X1", Vec2::ZERO, lanes, lane_width, arm_length, MAP_SPEED, 0.0)
        .build()
        .expect("four-way fixture is valid")
}

/// Two-lane four-way intersection rotated about the origin.
pub fn rotated_four_way_map(rotation_deg: f64) -> RoadNetwork {
    MapBuilder::new()
        .four_way("X1", Vec2::ZERO, 2, 3.5, 60.0, MAP_SPEED, rotation_deg)
        .build()
        .expect("rotated fixture is valid")
}

/// Single T-junction `T1`: through road east-west, stem to the south.
pub fn t_junction_map(lanes: u32, lane_width: f64, arm_length: f64) -> RoadNetwork {
    MapBuilder::new()
        .t_junction("T1", Vec2::ZERO, lanes, lane_width, arm_length, MAP_SPEED, 0.0)
        .build()
        .expect("T-junction fixture is valid")
}

/// Single two-way straight carriageway `S1` running east-west.
pub fn straight_map(lanes: u32, lane_width: f64, length: f64) -> RoadNetwork {
    MapBuilder::new()
        .straight("S1", Vec2::ZERO, lanes, lane_width, length, MAP_SPEED, 0.0)
        .build()
        .expect("straight fixture is valid")
}

/// T-junction whose through road is one-way westbound.
pub fn one_way_t_map() -> RoadNetwork {
    let arms = [
        ArmSpec {
            lanes_in: 2,
            lanes_out: 0,
            ..ArmSpec::two_way(0.0, 2, 3.5, 60.0, MAP_SPEED)
        },
        ArmSpec {
            lanes_in: 0,
            lanes_out: 2,
            ..ArmSpec::two_way(180.0, 2, 3.5, 60.0, MAP_SPEED)
        },
        ArmSpec::two_way(270.0, 2, 3.5, 60.0, MAP_SPEED),
    ];
    MapBuilder::new()
        .junction("T1", Vec2::ZERO, &arms, 0.0)
        .build()
        .expect("one-way fixture is valid")
}

/// Twelve-site city grid: six intersections (four with two lanes on every
/// leg), four T-junctions and two straight segments, 400 m apart.
pub fn grid_city() -> RoadNetwork {
    let mut b = MapBuilder::new();
    let at = |col: u32, row: u32| Vec2::new(col as f64 * 400.0, row as f64 * 400.0);
    let lanes_x = [2, 2, 1, 2, 1, 2];
    for (k, &lanes) in lanes_x.iter().enumerate() {
        let id = format!("X{}", k + 1);
        b.four_way(&id, at(k as u32 % 3, k as u32 / 3), lanes, 3.5, 80.0, MAP_SPEED, 0.0);
    }
    for k in 0..4u32 {
        let id = format!("T{}", k + 1);
        let lanes = if k % 2 == 0 { 2 } else { 1 };
        b.t_junction(&id, at(k % 2, 2 + k / 2), lanes, 3.25, 80.0, MAP_SPEED, 0.0);
    }
    b.straight("S1", at(2, 2), 2, 3.5, 200.0, 22.4, 0.0);
    b.straight("S2", at(2, 3), 1, 3.75, 160.0, 22.4, 90.0);
    b.build().expect("grid fixture is valid")
}

/// One bundled single-site map used for reconstruction-rate runs.
#[derive(Debug, Clone)]
pub struct NamedMap {
    pub name: String,
    pub location: CollisionLocation,
    pub lane_width: f64,
    pub network: RoadNetwork,
}

/// Three maps per road type with lane widths 3.0, 3.5 and 4.0 m and
/// differing arm lengths, named I1-I3, T1-T3, S1-S3.
pub fn srr_maps() -> Vec<NamedMap> {
    let widths = [3.0, 3.5, 4.0];
    let junction_lengths = [50.0, 70.0, 90.0];
    let straight_lengths = [160.0, 220.0, 300.0];
    let mut out = Vec::new();
    for (k, (&w, &len)) in widths.iter().zip(&junction_lengths).enumerate() {
        let name = format!("I{}", k + 1);
        let network = MapBuilder::new()
            .four_way(&name, Vec2::ZERO, 2, w, len, MAP_SPEED, 0.0)
            .build()
            .expect("srr intersection");
        out.push(NamedMap {
            name,
            location: CollisionLocation::Intersection,
            lane_width: w,
            network,
        });
    }
    for (k, (&w, &len)) in widths.iter().zip(&junction_lengths).enumerate() {
        let name = format!("T{}", k + 1);
        let network = MapBuilder::new()
            .t_junction(&name, Vec2::ZERO, 2, w, len, MAP_SPEED, 0.0)
            .build()
            .expect("srr T-junction");
        out.push(NamedMap {
            name,
            location: CollisionLocation::TJunction,
            lane_width: w,
            network,
        });
    }
    for (k, (&w, &len)) in widths.iter().zip(&straight_lengths).enumerate() {
        let name = format!("S{}", k + 1);
        let network = MapBuilder::new()
            .straight(&name, Vec2::ZERO, 2, w, len, 22.4, 0.0)
            .build()
            .expect("srr straight");
        out.push(NamedMap {
            name,
            location: CollisionLocation::StraightRoad,
            lane_width: w,
            network,
        });
    }
    out
}

/// Site pairs identical except that the second has twice the lane width.
pub fn generalization_pairs() -> Vec<(NamedMap, NamedMap)> {
    let mut out = Vec::new();
    for &(w, loc) in &[
        (3.0, CollisionLocation::Intersection),
        (3.5, CollisionLocation::TJunction),
        (3.5, CollisionLocation::StraightRoad),
    ] {
        let make = |width: f64| {
            let mut b = MapBuilder::new();
            let name = match loc {
                CollisionLocation::Intersection => {
                    b.four_way("G", Vec2::ZERO, 2, width, 80.0, MAP_SPEED, 0.0);
                    format!("GI-{width}")
                }
                CollisionLocation::TJunction => {
                    b.t_junction("G", Vec2::ZERO, 2, width, 80.0, MAP_SPEED, 0.0);
                    format!("GT-{width}")
                }
                CollisionLocation::StraightRoad => {
                    b.straight("G", Vec2::ZERO, 2, width, 260.0, 22.4, 0.0);
                    format!("GS-{width}")
                }
            };
            NamedMap {
                name,
                location: loc,
                lane_width: width,
                network: b.build().expect("generalization map"),
            }
        };
        out.push((make(w), make(2.0 * w)));
    }
    out
}

/// One-direction-per-road straight micro map for small planning problems.
pub fn micro_straight(lanes: u32, lane_width: f64, length: f64, speed: f64) -> RoadNetwork {
    MapBuilder::new()
        .straight("M1", Vec2::ZERO, lanes, lane_width, length, speed, 0.0)
        .build()
        .expect("micro map")
}

/// Abstract file paths of the bundled corpus, sorted by name.
pub fn corpus_paths() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = fs::read_dir(data_dir().join("corpus"))
        .map(|rd| {
            rd.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect()
        })
        .unwrap_or_default();
    paths.sort();
    paths
}

/// The bundled corpus as `(name, abstract)` pairs.
pub fn load_corpus() -> Vec<(String, AccidentAbstract)> {
    corpus_paths()
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).expect("readable corpus file");
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let abs = parse_abstract(&text)
                .unwrap_or_else(|e| panic!("corpus file {name} is invalid: {e}"));
            (name, abs)
        })
        .collect()
}

/// Directory of `{report.txt, gold.json}` extraction fixtures.
pub fn reports_dir() -> PathBuf {
    data_dir().join("reports")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_by_type() {
        let net = grid_city();
        assert_eq!(net.sites.len(), 12);
        let count = |t| net.sites.iter().filter(|s| s.site_type == t).count();
        assert_eq!(count(CollisionLocation::Intersection), 6);
        assert_eq!(count(CollisionLocation::TJunction), 4);
        assert_eq!(count(CollisionLocation::StraightRoad), 2);
    }

    #[test]
    fn srr_maps_cover_each_type_three_times() {
        let maps = srr_maps();
        assert_eq!(maps.len(), 9);
        for loc in CollisionLocation::ALL {
            let widths: Vec<f64> = maps
                .iter()
                .filter(|m| m.location == *loc)
                .map(|m| m.lane_width)
                .collect();
            assert_eq!(widths, vec![3.0, 3.5, 4.0]);
        }
    }
}
