use crate::error::PlanError;
use crate::geometry::{Polyline, Pose, Vec2};
use crate::scenario::{LaneId, LaneMap, Mission};

/// Waypoint spacing of planned routes, meters.
pub const ROUTE_SPACING: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutePoint {
    pub position: Vec2,
    pub lane: LaneId,
    /// Distance along the route from its start.
    pub s: f64,
    pub speed_limit: f64,
    /// Signed curvature, 1/m.
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub points: Vec<RoutePoint>,
    pub lanes: Vec<LaneId>,
    pub line: Polyline,
}

impl Route {
    pub fn length(&self) -> f64 {
        self.line.length()
    }

    /// Index of the route point at or just before arc length `s`.
    pub fn index_at(&self, s: f64) -> usize {
        self.points.partition_point(|p| p.s <= s).saturating_sub(1)
    }
}

fn locate(map: &LaneMap, pose: &Pose) -> Result<(LaneId, f64), PlanError> {
    let err = PlanError::OffLane {
        x: pose.position.x,
        y: pose.position.y,
    };
    let m = map
        .nearest_lane_anywhere(pose.position, Some(pose.heading))
        .ok_or(err.clone())?;
    if m.projection.distance > map.lane(m.lane).width * 0.5 {
        return Err(err);
    }
    Ok((m.lane, m.projection.s))
}

/// Shortest lane-graph route from the mission start to its goal as dense
/// waypoints.
pub fn plan_global(map: &LaneMap, mission: &Mission) -> Result<Route, PlanError> {
    let (l0, s0) = locate(map, &mission.initial)?;
    let (l1, s1) = locate(map, &mission.goal)?;
    let lanes = map
        .lane_path(l0, s0, l1, s1)
        .ok_or(PlanError::UnreachableGoal)?;
    let mut raw: Vec<(Vec2, LaneId)> = Vec::new();
    for (k, &id) in lanes.iter().enumerate() {
        let lane = map.lane(id);
        let a = if k == 0 { s0 } else { 0.0 };
        let b = if k + 1 == lanes.len() {
            s1
        } else {
            lane.length()
        };
        let n = (((b - a) / ROUTE_SPACING).ceil() as usize).max(1);
        let first = if raw.is_empty() { 0 } else { 1 };
        for i in first..=n {
            let s = a + (b - a) * i as f64 / n as f64;
            raw.push((lane.centerline.point_at(s), id));
        }
    }
    if raw.len() < 2 {
        raw.push((mission.goal.position, l1));
    }
    let line = Polyline::new(raw.iter().map(|r| r.0).collect());
    let mut points = Vec::with_capacity(raw.len());
    let mut s = 0.0;
    for (i, &(p, lane)) in raw.iter().enumerate() {
        if i > 0 {
            s += p.dist(raw[i - 1].0);
        }
        points.push(RoutePoint {
            position: p,
            lane,
            s,
            speed_limit: map.lane(lane).speed_limit,
            curvature: line.curvature_at(s, 4.0),
        });
    }
    Ok(Route {
        points,
        lanes,
        line,
    })
}
