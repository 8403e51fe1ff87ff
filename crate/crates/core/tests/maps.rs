use std::fs;

use crashsynth::fixtures::{data_dir, srr_maps};
use crashsynth::road::parse_map;

#[test]
fn bundled_maps_survive_a_json_round_trip() {
    let mut seen = 0;
    for entry in fs::read_dir(data_dir().join("maps")).unwrap() {
        let path = entry.unwrap().path();
        let net = parse_map(&fs::read_to_string(&path).unwrap()).unwrap();
        let again = parse_map(&net.to_json_pretty()).unwrap();
        assert_eq!(net, again, "{}", path.display());
        assert!(!net.sites.is_empty(), "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 9);
}

#[test]
fn srr_maps_have_uniform_declared_lane_widths() {
    let maps = srr_maps();
    assert_eq!(maps.len(), 9);
    for m in &maps {
        for l in m.network.all_lanes() {
            assert!((l.width - m.lane_width).abs() < 1e-9, "{} lane {}", m.name, l.id);
        }
        assert!(m.network.sites.iter().any(|s| s.site_type == m.location), "{}", m.name);
    }
}
