//! Convex regions that the action catalog pins waypoints to.

use serde::{Deserialize, Serialize};

use crate::geometry::{convex_hull, ConvexPolygon, Vec2};
use crate::road::{Lane, Road, RoadNetwork, SidewalkSide, Site};

/// Geometric parameters of the action catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogParams {
    /// Vehicle footprint width; lane corridors leave this much room.
    pub vehicle_width: f64,
    pub vehicle_length: f64,
    /// Width of the off-road strip beside a road's right edge.
    pub roadside_width: f64,
    pub sidewalk_width: f64,
    pub pedestrian_speed_max: f64,
    /// Depth of the crosswalk band next to a junction.
    pub crosswalk_depth: f64,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams {
            vehicle_width: 1.8,
            vehicle_length: 4.5,
            roadside_width: 3.0,
            sidewalk_width: 2.0,
            pedestrian_speed_max: 2.0,
            crosswalk_depth: 8.0,
        }
    }
}

impl CatalogParams {
    /// Largest centerline offset that keeps the footprint inside the lane.
    pub fn corridor_half(&self, lane: &Lane) -> f64 {
        ((lane.width - self.vehicle_width) / 2.0).max(0.0)
    }

    /// Lane-keeping corridor over the lane's full length.
    pub fn corridor(&self, lane: &Lane) -> ConvexPolygon {
        let h = self.corridor_half(lane);
        lane.band(0.0, lane.length(), h)
    }

    /// Continuation of the corridor beyond the lane exit.
    pub fn strip_after(&self, lane: &Lane, depth: f64) -> ConvexPolygon {
        let h = self.corridor_half(lane);
        let l = lane.length();
        lane.band(l, l + depth, h)
    }

    /// Continuation of the corridor before the lane entrance.
    pub fn strip_before(&self, lane: &Lane, depth: f64) -> ConvexPolygon {
        let h = self.corridor_half(lane);
        lane.band(-depth, 0.0, h)
    }

    /// Off-road strip along the road's right edge.
    pub fn roadside(&self, road: &Road) -> ConvexPolygon {
        let f = road.frame();
        f.band((f.s_min, f.s_max), (f.width, f.width + self.roadside_width))
    }

    /// Band between the lane corridor and the outer edge of the roadside,
    /// traversed by vehicles entering or leaving the road.
    pub fn roadside_transfer(&self, road: &Road, lane: &Lane) -> ConvexPolygon {
        let f = road.frame();
        let centre = f.lateral(lane.entrance);
        let h = self.corridor_half(lane);
        f.band(
            (f.s_min, f.s_max),
            (centre - h, f.width + self.roadside_width),
        )
    }

    /// Lateral extent `[left, right]` of the carriageway in `road`'s frame,
    /// including the opposing road when there is one.
    pub fn carriageway_lateral(&self, network: &RoadNetwork, site: &Site, road: &Road) -> (f64, f64) {
        let opp = network
            .opposing_road(site, road)
            .map(Road::total_width)
            .unwrap_or(0.0);
        (-opp, road.total_width())
    }

    pub fn sidewalk(
        &self,
        network: &RoadNetwork,
        site: &Site,
        road: &Road,
        side: SidewalkSide,
    ) -> ConvexPolygon {
        let f = road.frame();
        let (left, right) = self.carriageway_lateral(network, site, road);
        let lat = match side {
            SidewalkSide::Right => (right, right + self.sidewalk_width),
            SidewalkSide::Left => (left - self.sidewalk_width, left),
        };
        f.band((f.s_min, f.s_max), lat)
    }

    /// Along-road interval where pedestrians cross: next to the junction on
    /// junction arms, the middle stretch on straight roads.
    pub fn crossing_span(&self, site: &Site, road: &Road) -> (f64, f64) {
        let f = road.frame();
        if site.has_junction() {
            let c = site.junction_polygon.centroid();
            let s_c = f.along(c);
            if (s_c - f.s_max).abs() < (s_c - f.s_min).abs() {
                (f.s_max - self.crosswalk_depth, f.s_max - 1.0)
            } else {
                (f.s_min + 1.0, f.s_min + self.crosswalk_depth)
            }
        } else {
            let len = f.s_max - f.s_min;
            (f.s_min + 0.25 * len, f.s_max - 0.25 * len)
        }
    }

    /// Rectangle spanning both sidewalks and the carriageway over the
    /// crossing span.
    pub fn crossing_band(&self, network: &RoadNetwork, site: &Site, road: &Road) -> ConvexPolygon {
        let f = road.frame();
        let (left, right) = self.carriageway_lateral(network, site, road);
        f.band(
            self.crossing_span(site, road),
            (left - self.sidewalk_width, right + self.sidewalk_width),
        )
    }

    /// Both directions of a straight carriageway.
    pub fn carriageway(&self, network: &RoadNetwork, site: &Site, road: &Road) -> ConvexPolygon {
        let f = road.frame();
        let (left, right) = self.carriageway_lateral(network, site, road);
        f.band((f.s_min, f.s_max), (left, right))
    }
}

/// Convex hull of several regions.
pub fn hull_of(polys: &[ConvexPolygon]) -> ConvexPolygon {
    let pts: Vec<Vec2> = polys
        .iter()
        .flat_map(|p| p.vertices().iter().copied())
        .collect();
    convex_hull(&pts)
}
