//! Lane-level routes for each participant's action sequence, and the
//! drivable areas they induce.

use crate::constraint::{hull_of, ActionRoute, CatalogParams, ConstraintError};
use crate::geometry::{ConvexPolygon, Vec2};
use crate::model::{DrivingAction, LaneSide, ParticipantKind, ParticipantSpec};
use crate::road::{Lane, ParticipantBinding, RoadNetwork, SidewalkSide, Site};

/// Route alternatives kept per participant.
const MAX_ALTERNATIVES: usize = 4;

fn perpendicular_side(u: Vec2, w: Vec2, left: bool) -> bool {
    let tol = 2f64.to_radians().tan();
    let c = u.cross(w);
    tol * c.abs() - u.dot(w).abs() >= 0.0 && (c > 0.0) == left
}

/// Destination lanes of a turn from `lane`, preferred first.
pub fn turn_destinations<'n>(network: &'n RoadNetwork, site: &'n Site, lane: &Lane, left: bool) -> Vec<&'n Lane> {
    let u = lane.dir();
    let mut out = Vec::new();
    for r in network.outgoing_roads(site) {
        if !perpendicular_side(u, r.heading(), left) {
            continue;
        }
        let mut lanes: Vec<&Lane> = r.lanes.iter().collect();
        if !left {
            lanes.reverse();
        }
        out.extend(lanes);
    }
    out
}

/// Destination lanes of a straight crossing, preferred first.
pub fn cross_destinations<'n>(network: &'n RoadNetwork, site: &'n Site, lane: &Lane) -> Vec<&'n Lane> {
    let u = lane.dir();
    let mut roads: Vec<_> = network
        .outgoing_roads(site)
        .into_iter()
        .filter(|r| u.dot(r.heading()) > 2f64.to_radians().sin())
        .collect();
    roads.sort_by(|a, b| u.dot(b.heading()).total_cmp(&u.dot(a.heading())));
    let mut out = Vec::new();
    for r in roads {
        let mut lanes: Vec<&Lane> = r.lanes.iter().collect();
        lanes.sort_by_key(|l| (l.index != lane.index, l.index));
        out.extend(lanes);
    }
    out
}

/// First lane of the road running against `lane` at this site.
pub fn opposing_lane<'n>(network: &'n RoadNetwork, site: &'n Site, lane: &Lane) -> Option<&'n Lane> {
    let road = network.road(&lane.road_id)?;
    network.opposing_road(site, road).and_then(|r| r.lane(1))
}

fn adjacent(network: &RoadNetwork, lane: &Lane, side: LaneSide) -> Option<Lane> {
    let road = network.road(&lane.road_id)?;
    let idx = match side {
        LaneSide::Right => lane.index + 1,
        LaneSide::Left => lane.index.checked_sub(1)?,
    };
    road.lane(idx).cloned()
}

fn simple(action: DrivingAction, lane: &Lane) -> ActionRoute {
    ActionRoute {
        action,
        start_lane: lane.id.clone(),
        end_lane: None,
        sidewalk: None,
        reversed: false,
    }
}

/// Route alternatives for one participant, preferred first.
pub fn participant_routes(
    network: &RoadNetwork,
    site: &Site,
    binding: &ParticipantBinding,
    spec: &ParticipantSpec,
) -> Result<Vec<Vec<ActionRoute>>, String> {
    let start = network
        .lane(&binding.lane_id)
        .ok_or_else(|| format!("lane {} is missing", binding.lane_id))?
        .clone();
    if spec.kind == ParticipantKind::Pedestrian {
        let road = network
            .road(&start.road_id)
            .ok_or_else(|| format!("road {} is missing", start.road_id))?;
        let reversed = binding.heading.dot(road.heading()) < 0.0;
        let route = spec
            .actions
            .iter()
            .map(|&a| ActionRoute {
                action: a,
                start_lane: start.id.clone(),
                end_lane: None,
                sidewalk: Some(match a {
                    DrivingAction::PedestrianCross => binding.sidewalk.unwrap_or(SidewalkSide::Right),
                    _ => SidewalkSide::Right,
                }),
                reversed: a == DrivingAction::PedestrianWalk && reversed,
            })
            .collect();
        return Ok(vec![route]);
    }

    let mut partial: Vec<(Vec<ActionRoute>, Lane)> = vec![(Vec::new(), start)];
    let n = spec.actions.len();
    for (k, &action) in spec.actions.iter().enumerate() {
        let mut next = Vec::new();
        for (route, lane) in &partial {
            let mut push = |r: ActionRoute, l: Lane| {
                let mut v = route.clone();
                v.push(r);
                next.push((v, l));
            };
            match action {
                DrivingAction::FollowLane | DrivingAction::Stop | DrivingAction::DriveIntoRoads => {
                    push(simple(action, lane), lane.clone());
                }
                DrivingAction::DriveOffRoad | DrivingAction::Retrograde if k + 1 != n => {
                    return Err(format!("{action} must be the last action of {}", spec.id));
                }
                DrivingAction::DriveOffRoad => push(simple(action, lane), lane.clone()),
                DrivingAction::Retrograde => {
                    let opp = opposing_lane(network, site, lane)
                        .ok_or_else(|| format!("no opposing lane next to {}", lane.id))?;
                    push(simple(action, opp), opp.clone());
                }
                DrivingAction::ChangeLane(side) => {
                    if let Some(t) = adjacent(network, lane, side) {
                        let mut r = simple(action, lane);
                        r.end_lane = Some(t.id.clone());
                        push(r, t);
                    }
                }
                DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn => {
                    let dests: Vec<&Lane> = match action {
                        DrivingAction::TurnLeft => turn_destinations(network, site, lane, true),
                        DrivingAction::TurnRight => turn_destinations(network, site, lane, false),
                        DrivingAction::VehicleCross => cross_destinations(network, site, lane),
                        _ => opposing_lane(network, site, lane).into_iter().collect(),
                    };
                    for d in dests.into_iter().take(MAX_ALTERNATIVES) {
                        let mut r = simple(action, lane);
                        r.end_lane = Some(d.id.clone());
                        push(r, d.clone());
                    }
                }
                DrivingAction::PedestrianCross | DrivingAction::PedestrianWalk => {
                    return Err(format!("vehicle {} cannot {action}", spec.id));
                }
            }
        }
        next.truncate(MAX_ALTERNATIVES);
        if next.is_empty() {
            return Err(format!("no lane at site {} supports {action} for {}", site.id, spec.id));
        }
        partial = next;
    }
    Ok(partial.into_iter().map(|(r, _)| r).collect())
}

fn lane<'n>(network: &'n RoadNetwork, id: &str) -> Result<&'n Lane, ConstraintError> {
    network
        .lane(id)
        .ok_or_else(|| ConstraintError::UnboundLane(id.to_string()))
}

/// Convex hull of the regions a participant can occupy while executing the
/// final action of `route`, starting from that action's bound lane.
pub fn drivable_area(
    network: &RoadNetwork,
    site: &Site,
    route: &[ActionRoute],
    catalog: &CatalogParams,
) -> Result<ConvexPolygon, ConstraintError> {
    let last = route
        .last()
        .ok_or_else(|| ConstraintError::UnsupportedAction("empty route".into()))?;
    let start = lane(network, &last.start_lane)?;
    let road = network
        .road(&start.road_id)
        .ok_or_else(|| ConstraintError::UnboundLane(start.id.clone()))?;
    let poly = match last.action {
        DrivingAction::FollowLane | DrivingAction::Stop | DrivingAction::Retrograde => start.rect(),
        DrivingAction::ChangeLane(_) => {
            let t = lane(network, last.end_lane.as_deref().unwrap_or(""))?;
            hull_of(&[start.rect(), t.rect()])
        }
        DrivingAction::TurnLeft | DrivingAction::TurnRight | DrivingAction::VehicleCross | DrivingAction::UTurn => {
            if site.has_junction() {
                let dests = match last.action {
                    DrivingAction::TurnLeft => turn_destinations(network, site, start, true),
                    DrivingAction::TurnRight => turn_destinations(network, site, start, false),
                    DrivingAction::VehicleCross => cross_destinations(network, site, start),
                    _ => opposing_lane(network, site, start).into_iter().collect(),
                };
                let mut parts = vec![site.junction_polygon.clone()];
                parts.extend(dests.iter().map(|l| l.rect()));
                hull_of(&parts)
            } else if last.action == DrivingAction::UTurn {
                catalog.carriageway(network, site, road)
            } else {
                return Err(ConstraintError::UnsupportedAction(format!(
                    "{} needs a junction",
                    last.action
                )));
            }
        }
        DrivingAction::DriveIntoRoads | DrivingAction::DriveOffRoad => {
            hull_of(&[start.rect(), catalog.roadside(road)])
        }
        DrivingAction::PedestrianCross => catalog.crossing_band(network, site, road),
        DrivingAction::PedestrianWalk => catalog.sidewalk(network, site, road, SidewalkSide::Right),
    };
    Ok(poly)
}
