//! Road networks: lanes, roads, typed sites and their JSON map format.

mod builder;
mod convert;

pub use builder::{ArmSpec, MapBuilder};
pub use convert::{
    binding_candidates, cal_max_lanes, convert_info, enumerate_candidates, ConvertError, ParticipantBinding,
    SidewalkSide, SiteBinding,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{convex_hull, ConvexPolygon, Vec2};
use crate::model::{CollisionLocation, Direction};

/// Lanes of one road must be parallel within this angle.
const PARALLEL_TOL_DEG: f64 = 2.0;
/// Roads whose outward directions differ by less than this belong to one arm.
const ARM_CLUSTER_DEG: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("map schema error: {0}")]
    Schema(String),
    #[error("map geometry error: {0}")]
    Geometry(String),
    #[error("map connectivity error: {0}")]
    Connectivity(String),
}

/// A straight lane segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: String,
    pub road_id: String,
    /// 1 = leftmost lane in the travel direction.
    pub index: u32,
    pub entrance: Vec2,
    pub exit: Vec2,
    pub width: f64,
}

impl Lane {
    pub fn dir(&self) -> Vec2 {
        (self.exit - self.entrance).normalized()
    }

    pub fn length(&self) -> f64 {
        self.exit.distance(self.entrance)
    }

    /// Signed distance along the lane from its entrance.
    pub fn along(&self, p: Vec2) -> f64 {
        (p - self.entrance).dot(self.dir())
    }

    /// Signed lateral offset from the centerline, positive to the right.
    pub fn lateral(&self, p: Vec2) -> f64 {
        (p - self.entrance).dot(self.dir().right_normal())
    }

    pub fn centerline(&self) -> Vec<Vec2> {
        vec![self.entrance, self.exit]
    }

    pub fn point_at(&self, along: f64, lateral: f64) -> Vec2 {
        self.entrance + self.dir() * along + self.dir().right_normal() * lateral
    }

    pub fn rect(&self) -> ConvexPolygon {
        self.band(0.0, self.length(), self.width / 2.0)
    }

    /// Rectangle over `[s0, s1]` along the lane with half-width `half`.
    pub fn band(&self, s0: f64, s1: f64, half: f64) -> ConvexPolygon {
        ConvexPolygon::oriented_rect(self.entrance, self.dir(), (s0, s1), (-half, half))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: String,
    pub direction: Direction,
    /// m/s
    pub speed_limit: f64,
    /// Ordered by lane index, left to right.
    pub lanes: Vec<Lane>,
}

impl Road {
    pub fn heading(&self) -> Vec2 {
        self.lanes[0].dir()
    }

    pub fn length(&self) -> f64 {
        self.lanes.iter().map(Lane::length).fold(0.0, f64::max)
    }

    pub fn lane_width(&self) -> f64 {
        self.lanes.iter().map(|l| l.width).sum::<f64>() / self.lanes.len() as f64
    }

    pub fn lane(&self, index: u32) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.index == index)
    }

    pub fn lane_count(&self) -> u32 {
        self.lanes.len() as u32
    }

    pub fn total_width(&self) -> f64 {
        self.lanes.iter().map(|l| l.width).sum()
    }

    /// Frame anchored at the left edge of lane 1 at its entrance.
    pub fn frame(&self) -> RoadFrame {
        let l1 = &self.lanes[0];
        let dir = l1.dir();
        let origin = l1.entrance - dir.right_normal() * (l1.width / 2.0);
        let s_min = self
            .lanes
            .iter()
            .map(|l| (l.entrance - origin).dot(dir))
            .fold(f64::INFINITY, f64::min);
        let s_max = self
            .lanes
            .iter()
            .map(|l| (l.exit - origin).dot(dir))
            .fold(f64::NEG_INFINITY, f64::max);
        RoadFrame {
            origin,
            dir,
            s_min,
            s_max,
            width: self.total_width(),
        }
    }

    pub fn rect(&self) -> ConvexPolygon {
        let f = self.frame();
        f.band((f.s_min, f.s_max), (0.0, f.width))
    }
}

/// Road-aligned frame: `along` from the entrance line, `lateral` to the
/// right of the road's left edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadFrame {
    pub origin: Vec2,
    pub dir: Vec2,
    pub s_min: f64,
    pub s_max: f64,
    pub width: f64,
}

impl RoadFrame {
    pub fn along(&self, p: Vec2) -> f64 {
        (p - self.origin).dot(self.dir)
    }

    pub fn lateral(&self, p: Vec2) -> f64 {
        (p - self.origin).dot(self.dir.right_normal())
    }

    pub fn point(&self, along: f64, lateral: f64) -> Vec2 {
        self.origin + self.dir * along + self.dir.right_normal() * lateral
    }

    pub fn band(&self, along: (f64, f64), lateral: (f64, f64)) -> ConvexPolygon {
        ConvexPolygon::oriented_rect(self.origin, self.dir, along, lateral)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: String,
    pub site_type: CollisionLocation,
    /// Ids of every road touching the site (incoming and outgoing).
    pub legs: Vec<String>,
    /// Empty for straight-road sites.
    pub junction_polygon: ConvexPolygon,
    /// Number of distinct arms (2 for a straight carriageway).
    pub arm_count: usize,
}

impl Site {
    pub fn has_junction(&self) -> bool {
        !self.junction_polygon.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub sites: Vec<Site>,
    pub roads: Vec<Road>,
    pub connectivity: Vec<(String, String)>,
    road_index: BTreeMap<String, usize>,
}

impl RoadNetwork {
    pub fn new(
        sites: Vec<Site>,
        roads: Vec<Road>,
        connectivity: Vec<(String, String)>,
    ) -> Result<Self, MapError> {
        let mut road_index = BTreeMap::new();
        for (i, r) in roads.iter().enumerate() {
            if road_index.insert(r.id.clone(), i).is_some() {
                return Err(MapError::Schema(format!("duplicate road id {}", r.id)));
            }
        }
        let net = RoadNetwork {
            sites,
            roads,
            connectivity,
            road_index,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn road(&self, id: &str) -> Option<&Road> {
        self.road_index.get(id).map(|&i| &self.roads[i])
    }

    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.roads.iter().flat_map(|r| r.lanes.iter()).find(|l| l.id == id)
    }

    pub fn site(&self, id: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.id == id)
    }

    pub fn all_lanes(&self) -> impl Iterator<Item = &Lane> {
        self.roads.iter().flat_map(|r| r.lanes.iter())
    }

    pub fn site_roads<'a>(&'a self, site: &'a Site) -> impl Iterator<Item = &'a Road> + 'a {
        site.legs.iter().filter_map(move |id| self.road(id))
    }

    /// Roads that lead into the junction; for straight sites, both directions.
    pub fn incoming_roads<'a>(&'a self, site: &'a Site) -> Vec<&'a Road> {
        if !site.has_junction() {
            return self.site_roads(site).collect();
        }
        let c = site.junction_polygon.centroid();
        self.site_roads(site)
            .filter(|r| r.lanes[0].exit.distance(c) < r.lanes[0].entrance.distance(c))
            .collect()
    }

    /// Roads that lead away from the junction (empty for straight sites).
    pub fn outgoing_roads<'a>(&'a self, site: &'a Site) -> Vec<&'a Road> {
        if !site.has_junction() {
            return Vec::new();
        }
        let c = site.junction_polygon.centroid();
        self.site_roads(site)
            .filter(|r| r.lanes[0].exit.distance(c) >= r.lanes[0].entrance.distance(c))
            .collect()
    }

    /// The road sharing this road's left edge and running the other way.
    pub fn opposing_road<'a>(&'a self, site: &'a Site, road: &Road) -> Option<&'a Road> {
        let f = road.frame();
        self.site_roads(site)
            .filter(|r| r.id != road.id)
            .filter(|r| r.heading().dot(road.heading()) < -0.99)
            .filter(|r| {
                let g = r.frame();
                f.lateral(g.origin).abs() < 0.5
            })
            .min_by(|a, b| {
                let da = f.lateral(a.frame().origin).abs();
                let db = f.lateral(b.frame().origin).abs();
                da.total_cmp(&db)
            })
    }

    /// Smallest lane count over the site's roads.
    pub fn min_lanes(&self, site: &Site) -> u32 {
        self.site_roads(site).map(Road::lane_count).min().unwrap_or(0)
    }

    fn validate(&self) -> Result<(), MapError> {
        let geo = |m: String| Err(MapError::Geometry(m));
        let mut lane_ids = BTreeSet::new();
        for r in &self.roads {
            if r.lanes.is_empty() {
                return geo(format!("road {} has no lanes", r.id));
            }
            if !(r.speed_limit.is_finite() && r.speed_limit >= 0.0) {
                return geo(format!("road {} has invalid speed limit", r.id));
            }
            for (k, l) in r.lanes.iter().enumerate() {
                if !lane_ids.insert(l.id.clone()) {
                    return Err(MapError::Schema(format!("duplicate lane id {}", l.id)));
                }
                if !(l.entrance.is_finite() && l.exit.is_finite()) {
                    return geo(format!("lane {} has non-finite coordinates", l.id));
                }
                if l.entrance.distance(l.exit) < 1e-9 {
                    return geo(format!("lane {} has identical entrance and exit", l.id));
                }
                if !(l.width.is_finite() && l.width > 0.0) {
                    return geo(format!("lane {} has non-positive width", l.id));
                }
                if l.index as usize != k + 1 {
                    return geo(format!("road {} lane indices are not 1..n in order", r.id));
                }
            }
            let d0 = r.lanes[0].dir();
            for pair in r.lanes.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                if b.dir().dot(d0) < PARALLEL_TOL_DEG.to_radians().cos() {
                    return geo(format!("lanes of road {} are not parallel", r.id));
                }
                if a.lateral(b.entrance) <= 0.0 {
                    return geo(format!(
                        "lane {} is not to the right of lane {}",
                        b.id, a.id
                    ));
                }
            }
            if Direction::from_heading(d0.x, d0.y) != r.direction {
                return geo(format!(
                    "road {} is labelled {} but runs {}",
                    r.id,
                    r.direction,
                    Direction::from_heading(d0.x, d0.y)
                ));
            }
        }
        let mut site_ids = BTreeSet::new();
        for s in &self.sites {
            if !site_ids.insert(s.id.as_str()) {
                return Err(MapError::Schema(format!("duplicate site id {}", s.id)));
            }
            for leg in &s.legs {
                if self.road(leg).is_none() {
                    return Err(MapError::Connectivity(format!(
                        "site {} references unknown road {leg}",
                        s.id
                    )));
                }
            }
        }
        for (a, b) in &self.connectivity {
            for id in [a, b] {
                if self.road(id).is_none() {
                    return Err(MapError::Connectivity(format!(
                        "connectivity references unknown road {id}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            sites: self
                .sites
                .iter()
                .map(|s| SiteDoc {
                    id: s.id.clone(),
                    site_type: Some(s.site_type),
                    legs: s.legs.clone(),
                    junction_polygon: s.junction_polygon.vertices().iter().map(|v| [v.x, v.y]).collect(),
                })
                .collect(),
            roads: self
                .roads
                .iter()
                .map(|r| RoadDoc {
                    id: r.id.clone(),
                    direction: r.direction,
                    speed_limit_mps: r.speed_limit,
                    lanes: r
                        .lanes
                        .iter()
                        .map(|l| LaneDoc {
                            id: l.id.clone(),
                            index: l.index,
                            width_m: l.width,
                            entrance: [l.entrance.x, l.entrance.y],
                            exit: [l.exit.x, l.exit.y],
                        })
                        .collect(),
                })
                .collect(),
            connectivity: self
                .connectivity
                .iter()
                .map(|(a, b)| [a.clone(), b.clone()])
                .collect(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("map serializes")
    }
}

// ---------------------------------------------------------------------------
// JSON map format

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub sites: Vec<SiteDoc>,
    pub roads: Vec<RoadDoc>,
    #[serde(default)]
    pub connectivity: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDoc {
    pub id: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub site_type: Option<CollisionLocation>,
    pub legs: Vec<String>,
    #[serde(default)]
    pub junction_polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadDoc {
    pub id: String,
    pub direction: Direction,
    pub speed_limit_mps: f64,
    pub lanes: Vec<LaneDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneDoc {
    pub id: String,
    pub index: u32,
    pub width_m: f64,
    pub entrance: [f64; 2],
    pub exit: [f64; 2],
}

/// Parses and validates a map document.
pub fn parse_map(text: &str) -> Result<RoadNetwork, MapError> {
    let doc: MapDocument =
        serde_json::from_str(text).map_err(|e| MapError::Schema(e.to_string()))?;
    network_from_document(&doc)
}

pub fn network_from_document(doc: &MapDocument) -> Result<RoadNetwork, MapError> {
    let roads: Vec<Road> = doc
        .roads
        .iter()
        .map(|r| {
            let mut lanes: Vec<Lane> = r
                .lanes
                .iter()
                .map(|l| Lane {
                    id: l.id.clone(),
                    road_id: r.id.clone(),
                    index: l.index,
                    entrance: l.entrance.into(),
                    exit: l.exit.into(),
                    width: l.width_m,
                })
                .collect();
            lanes.sort_by_key(|l| l.index);
            Road {
                id: r.id.clone(),
                direction: r.direction,
                speed_limit: r.speed_limit_mps,
                lanes,
            }
        })
        .collect();
    let by_id: BTreeMap<&str, &Road> = roads.iter().map(|r| (r.id.as_str(), r)).collect();

    let mut sites = Vec::with_capacity(doc.sites.len());
    for s in &doc.sites {
        let legs: Vec<&Road> = s
            .legs
            .iter()
            .map(|id| {
                by_id.get(id.as_str()).copied().ok_or_else(|| {
                    MapError::Connectivity(format!("site {} references unknown road {id}", s.id))
                })
            })
            .collect::<Result<_, _>>()?;
        if legs.iter().any(|r| r.lanes.is_empty()) {
            return Err(MapError::Geometry(format!("site {} has a road without lanes", s.id)));
        }
        let raw: Vec<Vec2> = s.junction_polygon.iter().map(|p| Vec2::from(*p)).collect();
        let junction = if raw.is_empty() {
            ConvexPolygon::empty()
        } else {
            let hull = convex_hull(&raw);
            if hull.is_empty() || hull.area() < 1e-6 {
                return Err(MapError::Geometry(format!(
                    "site {} has a degenerate junction polygon",
                    s.id
                )));
            }
            if hull.vertices().len() != raw.len() {
                return Err(MapError::Geometry(format!(
                    "site {} junction polygon is not convex",
                    s.id
                )));
            }
            hull
        };
        let (inferred, arms) = infer_site_type(&s.id, &legs, &junction)?;
        if let Some(declared) = s.site_type {
            if declared != inferred {
                return Err(MapError::Geometry(format!(
                    "site {} is declared {declared} but its legs form a {inferred}",
                    s.id
                )));
            }
        }
        sites.push(Site {
            id: s.id.clone(),
            site_type: inferred,
            legs: s.legs.clone(),
            junction_polygon: junction,
            arm_count: arms,
        });
    }
    let connectivity = doc
        .connectivity
        .iter()
        .map(|[a, b]| (a.clone(), b.clone()))
        .collect();
    RoadNetwork::new(sites, roads, connectivity)
}

fn infer_site_type(
    id: &str,
    legs: &[&Road],
    junction: &ConvexPolygon,
) -> Result<(CollisionLocation, usize), MapError> {
    if junction.is_empty() {
        let opposed = legs.len() == 2 && legs[0].heading().dot(legs[1].heading()) < -0.99;
        if !opposed {
            return Err(MapError::Geometry(format!(
                "site {id} has no junction polygon and is not a two-way straight road"
            )));
        }
        return Ok((CollisionLocation::StraightRoad, 2));
    }
    let c = junction.centroid();
    let mut arms: Vec<Vec2> = Vec::new();
    for r in legs {
        let l = &r.lanes[0];
        let far = if l.entrance.distance(c) > l.exit.distance(c) {
            l.entrance
        } else {
            l.exit
        };
        let out = (far - c).normalized();
        let cos_tol = ARM_CLUSTER_DEG.to_radians().cos();
        if !arms.iter().any(|a| a.dot(out) >= cos_tol) {
            arms.push(out);
        }
    }
    match arms.len() {
        4 => Ok((CollisionLocation::Intersection, 4)),
        3 => Ok((CollisionLocation::TJunction, 3)),
        n => Err(MapError::Geometry(format!(
            "site {id} has {n} arms; expected 3 or 4"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn four_way_fixture_has_one_intersection_with_four_arms() {
        let net = fixtures::four_way_map(2, 3.5, 60.0);
        assert_eq!(net.sites.len(), 1);
        let s = &net.sites[0];
        assert_eq!(s.site_type, CollisionLocation::Intersection);
        assert_eq!(s.arm_count, 4);
        assert_eq!(net.incoming_roads(s).len(), 4);
        assert_eq!(net.outgoing_roads(s).len(), 4);
    }

    #[test]
    fn degenerate_lane_is_rejected() {
        let mut doc = fixtures::four_way_map(2, 3.5, 60.0).to_document();
        doc.roads[0].lanes[0].exit = doc.roads[0].lanes[0].entrance;
        assert!(matches!(network_from_document(&doc), Err(MapError::Geometry(_))));
    }

    #[test]
    fn zero_width_is_rejected() {
        let mut doc = fixtures::four_way_map(2, 3.5, 60.0).to_document();
        doc.roads[1].lanes[1].width_m = 0.0;
        assert!(matches!(network_from_document(&doc), Err(MapError::Geometry(_))));
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let mut doc = fixtures::four_way_map(2, 3.5, 60.0).to_document();
        doc.connectivity.push(["nope".into(), doc.roads[0].id.clone()]);
        assert!(matches!(network_from_document(&doc), Err(MapError::Connectivity(_))));
        let mut doc = fixtures::four_way_map(2, 3.5, 60.0).to_document();
        doc.sites[0].legs.push("ghost".into());
        assert!(matches!(network_from_document(&doc), Err(MapError::Connectivity(_))));
    }

    #[test]
    fn declared_type_must_match_arms() {
        let mut doc = fixtures::four_way_map(2, 3.5, 60.0).to_document();
        doc.sites[0].site_type = Some(CollisionLocation::TJunction);
        assert!(matches!(network_from_document(&doc), Err(MapError::Geometry(_))));
    }

    #[test]
    fn opposing_road_pairs_up_arms() {
        let net = fixtures::four_way_map(2, 3.5, 60.0);
        let s = &net.sites[0];
        for r in net.incoming_roads(s) {
            let o = net.opposing_road(s, r).expect("every arm is two-way");
            assert!(o.heading().dot(r.heading()) < -0.99);
        }
    }

    #[test]
    fn malformed_document_is_schema_error() {
        assert!(matches!(parse_map("{\"sites\": 3}"), Err(MapError::Schema(_))));
    }
}
