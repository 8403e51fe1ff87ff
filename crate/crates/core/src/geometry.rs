//! Planar geometry: points, oriented rectangles and convex polygons.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is
    /// counter-clockwise from `self`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    /// Normal pointing to the right of the direction of travel.
    pub fn right_normal(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn left_normal(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Unsigned angle between two directions, in degrees within [0, 180].
pub fn angle_between_deg(a: Vec2, b: Vec2) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Convex polygon with counter-clockwise vertices and no repeated closing vertex.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

/// Half-plane `normal · p <= offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Vec2,
    pub offset: f64,
}

impl HalfPlane {
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

impl ConvexPolygon {
    /// Builds a polygon from vertices that are already convex, in either
    /// orientation. Collinear and duplicate vertices are dropped.
    pub fn new(vertices: Vec<Vec2>) -> Self {
        convex_hull(&vertices)
    }

    pub fn empty() -> Self {
        ConvexPolygon { vertices: Vec::new() }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Axis-aligned rectangle.
    pub fn rect(min: Vec2, max: Vec2) -> Self {
        ConvexPolygon::new(vec![
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
        ])
    }

    /// Rectangle in a local frame: `origin + along*dir + lateral*right`.
    pub fn oriented_rect(
        origin: Vec2,
        dir: Vec2,
        along: (f64, f64),
        lateral: (f64, f64),
    ) -> Self {
        let d = dir.normalized();
        let r = d.right_normal();
        let p = |s: f64, l: f64| origin + d * s + r * l;
        ConvexPolygon::new(vec![
            p(along.0, lateral.0),
            p(along.1, lateral.0),
            p(along.1, lateral.1),
            p(along.0, lateral.1),
        ])
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
            * 0.5
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        if n == 0 {
            return Vec2::ZERO;
        }
        let a = self.signed_area();
        if a.abs() < 1e-12 {
            let s = self.vertices.iter().fold(Vec2::ZERO, |acc, v| acc + *v);
            return s * (1.0 / n as f64);
        }
        let mut c = Vec2::ZERO;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            c = c + (p + q) * p.cross(q);
        }
        c * (1.0 / (6.0 * a))
    }

    /// Edge half-planes; a point is inside when every signed distance is <= 0.
    pub fn half_planes(&self) -> Vec<HalfPlane> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let normal = (b - a).right_normal().normalized();
                HalfPlane {
                    normal,
                    offset: normal.dot(a),
                }
            })
            .collect()
    }

    /// Boundary-inclusive containment with absolute tolerance `tol`.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        !self.is_empty() && self.half_planes().iter().all(|h| h.signed_distance(p) <= tol)
    }

    /// Strict interior test.
    pub fn contains_strictly(&self, p: Vec2, margin: f64) -> bool {
        !self.is_empty() && self.half_planes().iter().all(|h| h.signed_distance(p) < -margin)
    }

    /// Intersection with another convex polygon (Sutherland–Hodgman).
    pub fn intersection(&self, other: &ConvexPolygon) -> ConvexPolygon {
        if self.is_empty() || other.is_empty() {
            return ConvexPolygon::empty();
        }
        let mut out = self.vertices.clone();
        for h in other.half_planes() {
            if out.is_empty() {
                break;
            }
            out = clip(&out, &h);
        }
        ConvexPolygon::new(out)
    }

    pub fn union_hull(&self, other: &ConvexPolygon) -> ConvexPolygon {
        let mut pts = self.vertices.clone();
        pts.extend_from_slice(&other.vertices);
        convex_hull(&pts)
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    /// Nearest point of the polygon (boundary or interior) to `p`.
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        if self.contains(p, 0.0) || self.vertices.is_empty() {
            return p;
        }
        let n = self.vertices.len();
        let mut best = self.vertices[0];
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let q = closest_on_segment(p, a, b);
            let d = q.distance(p);
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }

    /// Polygon shrunk toward its centroid by `factor` in (0, 1].
    pub fn scaled_about_centroid(&self, factor: f64) -> ConvexPolygon {
        let c = self.centroid();
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| c + (*v - c) * factor).collect(),
        }
    }
}

pub fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

fn clip(poly: &[Vec2], h: &HalfPlane) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let dc = h.signed_distance(cur);
        let dn = h.signed_distance(next);
        if dc <= 0.0 {
            out.push(cur);
        }
        if (dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0) {
            let t = dc / (dc - dn);
            out.push(cur.lerp(next, t));
        }
    }
    out
}

/// Andrew's monotone chain; returns a counter-clockwise hull without
/// collinear points.
pub fn convex_hull(points: &[Vec2]) -> ConvexPolygon {
    let mut pts: Vec<Vec2> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
    if pts.len() < 3 {
        return ConvexPolygon { vertices: pts };
    }
    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 1e-12 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 1e-12 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    ConvexPolygon { vertices: lower }
}

/// Oriented rectangle used for vehicle footprints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedBox {
    pub fn corners(&self) -> [Vec2; 4] {
        let d = Vec2::new(self.heading.cos(), self.heading.sin());
        let r = d.right_normal();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [
            self.center + d * hl + r * hw,
            self.center + d * hl - r * hw,
            self.center - d * hl - r * hw,
            self.center - d * hl + r * hw,
        ]
    }

    /// Separating-axis overlap test (touching counts as overlap).
    pub fn overlaps(&self, other: &OrientedBox) -> bool {
        let a = self.corners();
        let b = other.corners();
        let axes = [
            a[0] - a[1],
            a[1] - a[2],
            b[0] - b[1],
            b[1] - b[2],
        ];
        for axis in axes {
            let proj = |pts: &[Vec2; 4]| {
                pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let v = p.dot(axis);
                    (lo.min(v), hi.max(v))
                })
            };
            let (a0, a1) = proj(&a);
            let (b0, b1) = proj(&b);
            if a1 < b0 || b1 < a0 {
                return false;
            }
        }
        true
    }
}
