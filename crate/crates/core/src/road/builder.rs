use crate::geometry::{ConvexPolygon, Vec2};
use crate::model::Direction;

use super::{Lane, MapError, Road, RoadNetwork, Site};
use crate::model::CollisionLocation;

/// One arm of a junction, described by its outward bearing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSpec {
    /// Outward direction from the junction center, degrees counter-clockwise from east.
    pub bearing_deg: f64,
    /// Lanes driving toward the junction (0 for an exit-only arm).
    pub lanes_in: u32,
    /// Lanes driving away from the junction (0 for an entry-only arm).
    pub lanes_out: u32,
    pub lane_width: f64,
    pub length: f64,
    pub speed_limit: f64,
}

impl ArmSpec {
    pub fn two_way(bearing_deg: f64, lanes: u32, lane_width: f64, length: f64, speed: f64) -> Self {
        ArmSpec {
            bearing_deg,
            lanes_in: lanes,
            lanes_out: lanes,
            lane_width,
            length,
            speed_limit: speed,
        }
    }
}

/// Programmatic construction of parametric test maps.
#[derive(Debug, Default)]
pub struct MapBuilder {
    sites: Vec<Site>,
    roads: Vec<Road>,
    connectivity: Vec<(String, String)>,
}

fn snap(p: Vec2) -> Vec2 {
    let r = |v: f64| (v * 1e6).round() / 1e6;
    Vec2::new(r(p.x), r(p.y))
}

fn make_road(
    id: String,
    heading: Vec2,
    start: Vec2,
    end: Vec2,
    lanes: u32,
    width: f64,
    speed: f64,
) -> Road {
    let right = heading.right_normal();
    let lanes = (1..=lanes)
        .map(|k| {
            let off = right * ((k as f64 - 0.5) * width);
            Lane {
                id: format!("{id}_l{k}"),
                road_id: id.clone(),
                index: k,
                entrance: snap(start + off),
                exit: snap(end + off),
                width,
            }
        })
        .collect();
    Road {
        direction: Direction::from_heading(heading.x, heading.y),
        id,
        speed_limit: speed,
        lanes,
    }
}

fn arm_name(bearing: f64) -> String {
    let d = Vec2::new(bearing.to_radians().cos(), bearing.to_radians().sin());
    let base = match Direction::from_heading(d.x, d.y) {
        Direction::North => "n",
        Direction::South => "s",
        Direction::East => "e",
        Direction::West => "w",
    };
    base.to_string()
}

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a junction whose box is a square sized to the widest arm.
    ///
    /// `rotation_deg` rotates the whole site about `center`.
    pub fn junction(
        &mut self,
        id: &str,
        center: Vec2,
        arms: &[ArmSpec],
        rotation_deg: f64,
    ) -> &mut Self {
        let half = arms
            .iter()
            .map(|a| a.lanes_in.max(a.lanes_out) as f64 * a.lane_width)
            .fold(0.0, f64::max);
        let rot = rotation_deg.to_radians();
        let corner = |x: f64, y: f64| snap(center + Vec2::new(x, y).rotated(rot));
        let junction = ConvexPolygon::new(vec![
            corner(-half, -half),
            corner(half, -half),
            corner(half, half),
            corner(-half, half),
        ]);
        let site_type = match arms.len() {
            4 => CollisionLocation::Intersection,
            3 => CollisionLocation::TJunction,
            _ => CollisionLocation::Intersection,
        };
        let mut legs = Vec::new();
        let mut incoming = Vec::new();
        let mut outgoing = Vec::new();
        for arm in arms {
            let u = Vec2::new(
                (arm.bearing_deg.to_radians() + rot).cos(),
                (arm.bearing_deg.to_radians() + rot).sin(),
            );
            let name = arm_name(arm.bearing_deg);
            let near = center + u * half;
            let far = center + u * (half + arm.length);
            if arm.lanes_in > 0 {
                let rid = format!("{id}_{name}_in");
                self.roads.push(make_road(
                    rid.clone(),
                    -u,
                    far,
                    near,
                    arm.lanes_in,
                    arm.lane_width,
                    arm.speed_limit,
                ));
                legs.push(rid.clone());
                incoming.push(rid);
            }
            if arm.lanes_out > 0 {
                let rid = format!("{id}_{name}_out");
                self.roads.push(make_road(
                    rid.clone(),
                    u,
                    near,
                    far,
                    arm.lanes_out,
                    arm.lane_width,
                    arm.speed_limit,
                ));
                legs.push(rid.clone());
                outgoing.push(rid);
            }
        }
        for a in &incoming {
            for b in &outgoing {
                self.connectivity.push((a.clone(), b.clone()));
            }
        }
        self.sites.push(Site {
            id: id.to_string(),
            site_type,
            legs,
            junction_polygon: junction,
            arm_count: arms.len(),
        });
        self
    }

    pub fn four_way(
        &mut self,
        id: &str,
        center: Vec2,
        lanes: u32,
        lane_width: f64,
        arm_length: f64,
        speed: f64,
        rotation_deg: f64,
    ) -> &mut Self {
        let arms: Vec<ArmSpec> = [0.0, 90.0, 180.0, 270.0]
            .iter()
            .map(|&b| ArmSpec::two_way(b, lanes, lane_width, arm_length, speed))
            .collect();
        self.junction(id, center, &arms, rotation_deg)
    }

    /// T-junction with the through road running east-west and the stem to the south.
    pub fn t_junction(
        &mut self,
        id: &str,
        center: Vec2,
        lanes: u32,
        lane_width: f64,
        arm_length: f64,
        speed: f64,
        rotation_deg: f64,
    ) -> &mut Self {
        let arms: Vec<ArmSpec> = [0.0, 180.0, 270.0]
            .iter()
            .map(|&b| ArmSpec::two_way(b, lanes, lane_width, arm_length, speed))
            .collect();
        self.junction(id, center, &arms, rotation_deg)
    }

    /// Two-way straight carriageway centered at `center`; the forward road heads
    /// along `heading_deg`.
    pub fn straight(
        &mut self,
        id: &str,
        center: Vec2,
        lanes: u32,
        lane_width: f64,
        length: f64,
        speed: f64,
        heading_deg: f64,
    ) -> &mut Self {
        let u = Vec2::new(heading_deg.to_radians().cos(), heading_deg.to_radians().sin());
        let a = center - u * (length / 2.0);
        let b = center + u * (length / 2.0);
        let fwd = format!("{id}_fwd");
        let back = format!("{id}_back");
        self.roads
            .push(make_road(fwd.clone(), u, a, b, lanes, lane_width, speed));
        self.roads
            .push(make_road(back.clone(), -u, b, a, lanes, lane_width, speed));
        self.sites.push(Site {
            id: id.to_string(),
            site_type: CollisionLocation::StraightRoad,
            legs: vec![fwd, back],
            junction_polygon: ConvexPolygon::empty(),
            arm_count: 2,
        });
        self
    }

    /// Validates through the document path so builder output and parsed
    /// maps are indistinguishable.
    pub fn build(&self) -> Result<RoadNetwork, MapError> {
        let draft = RoadNetwork {
            sites: self.sites.clone(),
            roads: self.roads.clone(),
            connectivity: self.connectivity.clone(),
            road_index: Default::default(),
        };
        super::network_from_document(&draft.to_document())
    }
}
