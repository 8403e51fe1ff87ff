mod common;

use common::reconstruct;
use crashsynth::render::render_svg;

#[test]
fn svg_draws_one_polyline_per_action() {
    let (s, m) = reconstruct("int_01_left_turn_vs_oncoming", "I1");
    let svg = render_svg(&s, &m.network);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let polylines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    let actions: usize = s.participants.iter().map(|p| p.plan.len()).sum();
    assert_eq!(polylines.len(), actions);
    for p in &s.participants {
        let group = doc
            .descendants()
            .find(|n| n.has_tag_name("g") && n.attribute("id") == Some(p.id.as_str()))
            .unwrap();
        let drawn: Vec<_> = group.children().filter(|n| n.has_tag_name("polyline")).collect();
        assert_eq!(drawn.len(), p.plan.len());
        for (line, a) in drawn.iter().zip(&p.plan) {
            let pts = line.attribute("points").unwrap().split_whitespace().count();
            assert_eq!(pts, a.waypoints.len());
        }
    }
    assert_eq!(
        doc.descendants().filter(|n| n.attribute("class") == Some("collision-area")).count(),
        1
    );
}
