use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::model::{
    AccidentAbstract, CollisionLocation, Direction, DrivingAction, LaneSide, ParticipantKind,
    Role,
};

use super::{Road, RoadNetwork, Site};

/// Headings within this angle count as the same direction when remapping.
const HEADING_TOL_DEG: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvertError {
    #[error("site {site} cannot host the participants' relative directions: {reason}")]
    UnmappableDirections { site: String, reason: String },
}

/// Which sidewalk of a road a pedestrian starts on, relative to the road's
/// direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidewalkSide {
    Left,
    Right,
}

/// Where a participant starts at a chosen site.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantBinding {
    pub participant_id: String,
    pub kind: ParticipantKind,
    /// Travel direction in the site frame.
    pub heading: Vec2,
    /// Compass label of `heading`.
    pub direction: Direction,
    pub road_id: String,
    pub lane_index: u32,
    pub lane_id: String,
    /// Start sidewalk for pedestrians.
    pub sidewalk: Option<SidewalkSide>,
}

/// Result of remapping an abstract onto one candidate site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteBinding {
    pub site_id: String,
    /// Rotation applied to every compass heading of the abstract.
    pub rotation_deg: f64,
    pub participants: Vec<ParticipantBinding>,
}

impl SiteBinding {
    pub fn participant(&self, id: &str) -> Option<&ParticipantBinding> {
        self.participants.iter().find(|p| p.participant_id == id)
    }

    /// Remapped driving directions, in participant order.
    pub fn driving_directions(&self) -> Vec<(String, Direction)> {
        self.participants
            .iter()
            .map(|p| (p.participant_id.clone(), p.direction))
            .collect()
    }

    /// Remapped running lanes, in participant order.
    pub fn running_lanes(&self) -> Vec<(String, u32)> {
        self.participants
            .iter()
            .map(|p| (p.participant_id.clone(), p.lane_index))
            .collect()
    }
}

/// Sites of the requested type whose every road offers at least
/// `required_lanes` lanes, in map order.
pub fn enumerate_candidates<'a>(
    network: &'a RoadNetwork,
    location: CollisionLocation,
    required_lanes: u32,
) -> Vec<&'a Site> {
    network
        .sites
        .iter()
        .filter(|s| s.site_type == location)
        .filter(|s| network.min_lanes(s) >= required_lanes.max(1))
        .collect()
}

/// Largest lane index any vehicle occupies while executing its actions.
///
/// Each participant contributes its running lane plus the peak rightward
/// displacement accumulated by its lane changes, never less than the
/// running lane itself.
pub fn cal_max_lanes(abs: &AccidentAbstract) -> u32 {
    abs.participants
        .iter()
        .filter(|p| p.kind == ParticipantKind::Vehicle)
        .map(|p| {
            let mut offset: i64 = 0;
            let mut peak: i64 = 0;
            for a in &p.actions {
                match a {
                    DrivingAction::ChangeLane(LaneSide::Right) => offset += 1,
                    DrivingAction::ChangeLane(LaneSide::Left) => offset -= 1,
                    _ => {}
                }
                peak = peak.max(offset);
            }
            (p.running_lane as i64 + peak).max(p.running_lane as i64) as u32
        })
        .max()
        .unwrap_or(1)
}

fn aligned(a: Vec2, b: Vec2) -> bool {
    a.dot(b) >= HEADING_TOL_DEG.to_radians().cos()
}

fn perpendicular(a: Vec2, b: Vec2) -> bool {
    a.dot(b).abs() <= HEADING_TOL_DEG.to_radians().sin()
}

fn vec_of(d: Direction) -> Vec2 {
    let (x, y) = d.unit();
    Vec2::new(x, y)
}

/// Maps the abstract's compass directions and lanes onto the site.
///
/// All headings are rotated by one common angle, chosen by anchoring the
/// first vehicle on each incoming road in map order; the first rotation
/// under which every participant finds a compatible road wins. Rotation
/// preserves every pairwise orientation class and turn side.
pub fn convert_info(
    abs: &AccidentAbstract,
    network: &RoadNetwork,
    site: &Site,
) -> Result<SiteBinding, ConvertError> {
    binding_candidates(abs, network, site).map(|mut v| v.remove(0))
}

/// Every distinct rotation under which the abstract binds to the site, in
/// the order [`convert_info`] tries them.
pub fn binding_candidates(
    abs: &AccidentAbstract,
    network: &RoadNetwork,
    site: &Site,
) -> Result<Vec<SiteBinding>, ConvertError> {
    let fail = |reason: String| ConvertError::UnmappableDirections {
        site: site.id.clone(),
        reason,
    };
    let start_roads = network.incoming_roads(site);
    let all_roads: Vec<&Road> = network.site_roads(site).collect();
    let mut vehicles: Vec<_> = abs
        .participants
        .iter()
        .filter(|p| p.kind == ParticipantKind::Vehicle)
        .collect();
    vehicles.sort_by_key(|p| p.role != Role::Striker);
    let anchor = *vehicles
        .first()
        .ok_or_else(|| fail("no vehicle participant to anchor the mapping".into()))?;

    let mut last_reason = String::from("no incoming road can host the first vehicle");
    let mut out: Vec<SiteBinding> = Vec::new();
    for anchor_road in &start_roads {
        if anchor_road.lane_count() < anchor.running_lane {
            continue;
        }
        let rot = anchor_road.heading().angle() - vec_of(anchor.driving_direction).angle();
        match bind_all(abs, &start_roads, &all_roads, rot) {
            Ok(participants) => {
                let mut deg = rot.to_degrees().rem_euclid(360.0);
                if (deg - 360.0).abs() < 1e-9 {
                    deg = 0.0;
                }
                if out.iter().any(|b| b.participants == participants) {
                    continue;
                }
                out.push(SiteBinding {
                    site_id: site.id.clone(),
                    rotation_deg: deg,
                    participants,
                });
            }
            Err(reason) => last_reason = reason,
        }
    }
    if out.is_empty() {
        return Err(fail(last_reason));
    }
    Ok(out)
}

fn bind_all(
    abs: &AccidentAbstract,
    start_roads: &[&Road],
    all_roads: &[&Road],
    rot: f64,
) -> Result<Vec<ParticipantBinding>, String> {
    let striker_road = {
        let s = abs.striker();
        let h = vec_of(s.driving_direction).rotated(rot);
        start_roads
            .iter()
            .find(|r| aligned(r.heading(), h) && r.lane_count() >= s.running_lane)
            .copied()
    };
    let mut out = Vec::with_capacity(abs.participants.len());
    for p in &abs.participants {
        let heading = vec_of(p.driving_direction).rotated(rot);
        let direction = Direction::from_heading(heading.x, heading.y);
        match p.kind {
            ParticipantKind::Vehicle => {
                let road = start_roads
                    .iter()
                    .find(|r| aligned(r.heading(), heading) && r.lane_count() >= p.running_lane)
                    .ok_or_else(|| {
                        format!(
                            "no incoming road runs {direction} with {} lanes for {}",
                            p.running_lane, p.id
                        )
                    })?;
                let lane = road.lane(p.running_lane).expect("lane count checked");
                out.push(ParticipantBinding {
                    participant_id: p.id.clone(),
                    kind: p.kind,
                    heading: road.heading(),
                    direction: road.direction,
                    road_id: road.id.clone(),
                    lane_index: lane.index,
                    lane_id: lane.id.clone(),
                    sidewalk: None,
                });
            }
            ParticipantKind::Pedestrian => {
                let crossing = p.actions.first() == Some(&DrivingAction::PedestrianCross);
                let mut candidates: Vec<&Road> = Vec::new();
                if let Some(r) = striker_road {
                    candidates.push(r);
                }
                candidates.extend(start_roads.iter().copied());
                candidates.extend(all_roads.iter().copied());
                let road = candidates
                    .into_iter()
                    .find(|r| {
                        if crossing {
                            perpendicular(r.heading(), heading)
                        } else {
                            r.heading().dot(heading).abs() >= HEADING_TOL_DEG.to_radians().cos()
                        }
                    })
                    .ok_or_else(|| {
                        format!("no road at the site suits pedestrian {} heading {direction}", p.id)
                    })?;
                let side = if crossing {
                    if heading.dot(road.heading().right_normal()) > 0.0 {
                        SidewalkSide::Left
                    } else {
                        SidewalkSide::Right
                    }
                } else {
                    SidewalkSide::Right
                };
                let lane = &road.lanes[0];
                out.push(ParticipantBinding {
                    participant_id: p.id.clone(),
                    kind: p.kind,
                    heading,
                    direction,
                    road_id: road.id.clone(),
                    lane_index: lane.index,
                    lane_id: lane.id.clone(),
                    sidewalk: Some(side),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{parse_abstract, CrashType};

    fn abstract_with(
        location: &str,
        p1: (&str, u32, &[&str]),
        p2: (&str, u32, &[&str]),
        crash: CrashType,
    ) -> AccidentAbstract {
        let doc = serde_json::json!({
            "environment": {"weather": "clear", "lighting": "daylight"},
            "road": {"lane_num": 3, "collision_location": location, "speed_limit_mph": 30},
            "dynamic": {
                "participants": [
                    {"id": "P1", "role": "striker", "driving_direction": p1.0,
                     "running_lane": p1.1, "actions": p1.2},
                    {"id": "P2", "role": "victim", "driving_direction": p2.0,
                     "running_lane": p2.1, "actions": p2.2}
                ],
                "crash_type": crash.label()
            }
        });
        parse_abstract(&doc.to_string()).unwrap()
    }

    #[test]
    fn max_lanes_counts_rightward_changes() {
        let a = abstract_with(
            "straight road",
            ("eastbound", 1, &["change lane right"]),
            ("eastbound", 2, &["follow lane"]),
            CrashType::RearEnd,
        );
        assert_eq!(cal_max_lanes(&a), 2);
        let a = abstract_with(
            "straight road",
            ("eastbound", 1, &["follow lane"]),
            ("eastbound", 2, &["follow lane"]),
            CrashType::RearEnd,
        );
        assert_eq!(cal_max_lanes(&a), 2);
        let a = abstract_with(
            "straight road",
            ("eastbound", 1, &["follow lane"]),
            ("eastbound", 1, &["stop"]),
            CrashType::RearEnd,
        );
        assert_eq!(cal_max_lanes(&a), 1);
        let a = abstract_with(
            "straight road",
            ("eastbound", 2, &["change lane left", "change lane right"]),
            ("eastbound", 1, &["stop"]),
            CrashType::RearEnd,
        );
        assert_eq!(cal_max_lanes(&a), 2);
    }

    #[test]
    fn left_turn_pair_maps_onto_opposing_legs() {
        let net = fixtures::four_way_map(2, 3.5, 60.0);
        let a = abstract_with(
            "intersection",
            ("northbound", 1, &["follow lane", "turn left"]),
            ("southbound", 1, &["follow lane", "vehicle cross"]),
            CrashType::Frontal,
        );
        let b = convert_info(&a, &net, &net.sites[0]).unwrap();
        let h1 = b.participants[0].heading;
        let h2 = b.participants[1].heading;
        assert!(h1.dot(h2) < -0.99);
        assert_eq!(b.running_lanes(), vec![("P1".into(), 1), ("P2".into(), 1)]);
    }

    #[test]
    fn rotated_site_preserves_relative_orientation() {
        let net = fixtures::rotated_four_way_map(30.0);
        let a = abstract_with(
            "intersection",
            ("northbound", 1, &["vehicle cross"]),
            ("eastbound", 1, &["vehicle cross"]),
            CrashType::FrontToSide,
        );
        let b = convert_info(&a, &net, &net.sites[0]).unwrap();
        let (h1, h2) = (b.participants[0].heading, b.participants[1].heading);
        assert!(h1.dot(h2).abs() < 1e-9);
        // eastbound is clockwise of northbound; the mapping must keep that.
        assert!(h1.cross(h2) < 0.0);
    }

    #[test]
    fn same_direction_on_straight_road_shares_carriageway() {
        let net = fixtures::straight_map(2, 3.5, 200.0);
        let a = abstract_with(
            "straight road",
            ("eastbound", 1, &["follow lane"]),
            ("eastbound", 1, &["stop"]),
            CrashType::RearEnd,
        );
        let b = convert_info(&a, &net, &net.sites[0]).unwrap();
        assert_eq!(b.participants[0].road_id, b.participants[1].road_id);
    }

    #[test]
    fn one_way_through_road_cannot_host_opposing_pair() {
        let net = fixtures::one_way_t_map();
        let a = abstract_with(
            "t-junction",
            ("northbound", 1, &["follow lane", "turn left"]),
            ("southbound", 1, &["follow lane"]),
            CrashType::Frontal,
        );
        let err = convert_info(&a, &net, &net.sites[0]).unwrap_err();
        assert!(matches!(err, ConvertError::UnmappableDirections { .. }));
    }

    #[test]
    fn candidates_filter_type_and_capacity() {
        let net = fixtures::grid_city();
        assert!(enumerate_candidates(&net, CollisionLocation::Intersection, 99).is_empty());
        let s = enumerate_candidates(&net, CollisionLocation::StraightRoad, 1);
        assert_eq!(s.len(), 2);
    }
}
