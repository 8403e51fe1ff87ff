//! SVG drawing of a scenario: lanes, junction, collision area and one
//! labelled polyline per action.

use std::fmt::Write;

use crate::geometry::{ConvexPolygon, Vec2};
use crate::road::RoadNetwork;
use crate::scenario::Scenario;

const SCALE: f64 = 6.0;
const PAD: f64 = 20.0;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Frame {
    min: Vec2,
    max: Vec2,
}

impl Frame {
    fn map(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.min.x) * SCALE + PAD, (self.max.y - p.y) * SCALE + PAD)
    }

    fn size(&self) -> (f64, f64) {
        (
            (self.max.x - self.min.x) * SCALE + 2.0 * PAD,
            (self.max.y - self.min.y) * SCALE + 2.0 * PAD,
        )
    }
}

fn points(frame: &Frame, pts: impl IntoIterator<Item = Vec2>) -> String {
    pts.into_iter()
        .map(|p| {
            let (x, y) = frame.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn polygon(out: &mut String, frame: &Frame, poly: &ConvexPolygon, class: &str, style: &str) {
    if poly.is_empty() {
        return;
    }
    let _ = writeln!(
        out,
        r#"  <polygon class="{class}" points="{}" {style}/>"#,
        points(frame, poly.vertices().iter().copied())
    );
}

/// Renders `scenario` over the roads of its site.
pub fn render_svg(scenario: &Scenario, network: &RoadNetwork) -> String {
    let site = network.site(&scenario.site_id);
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Vec2| {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    };
    let roads: Vec<_> = match site {
        Some(s) => network.site_roads(s).collect(),
        None => network.roads.iter().collect(),
    };
    for r in &roads {
        for v in r.rect().vertices() {
            grow(*v);
        }
    }
    for p in &scenario.participants {
        for w in p.waypoints() {
            grow(w.pos());
        }
    }
    if !lo.x.is_finite() {
        lo = Vec2::ZERO;
        hi = Vec2::new(1.0, 1.0);
    }
    let frame = Frame { min: lo, max: hi };
    let (w, h) = frame.size();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(out, r##"  <rect width="100%" height="100%" fill="#ffffff"/>"##);
    for r in &roads {
        for l in &r.lanes {
            polygon(&mut out, &frame, &l.rect(), "lane", r##"fill="#e6e6e6" stroke="#999999" stroke-width="1""##);
        }
    }
    if let Some(s) = site.filter(|s| s.has_junction()) {
        polygon(&mut out, &frame, &s.junction_polygon, "junction", r##"fill="#d9d9d9" stroke="none""##);
    }
    let ca = ConvexPolygon::new(scenario.collision_area.iter().map(|&v| Vec2::from(v)).collect());
    polygon(&mut out, &frame, &ca, "collision-area", r##"fill="#ffd70080" stroke="#b8860b" stroke-width="1.5""##);

    for (i, p) in scenario.participants.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(out, r#"  <g class="participant" id="{}">"#, p.id);
        let mut n = 0;
        for a in &p.plan {
            let _ = writeln!(
                out,
                r#"    <polyline class="action" data-action="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                a.action,
                points(&frame, a.waypoints.iter().map(|w| w.pos()))
            );
            for wp in &a.waypoints {
                n += 1;
                let (x, y) = frame.map(wp.pos());
                let _ = writeln!(out, r#"    <circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
                let _ = writeln!(
                    out,
                    r#"    <text x="{:.2}" y="{:.2}" font-size="9" fill="{color}">{}{n}</text>"#,
                    x + 3.0,
                    y - 3.0,
                    p.id
                );
            }
        }
        let _ = writeln!(out, "  </g>");
    }
    out.push_str("</svg>\n");
    out
}
