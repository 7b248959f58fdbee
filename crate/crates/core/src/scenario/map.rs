//! Lane-graph maps.

use crate::error::MapError;
use crate::geometry::{Obb, Polyline, Pose, Projection, Vec2};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt;
use std::path::Path;

pub const MAP_FORMAT_VERSION: u32 = 1;

pub type LaneId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Marking {
    Crossable,
    Solid,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum RoadComponent {
    Urban,
    Highway,
    Interchange,
    Intersection,
    Roundabout,
}

impl RoadComponent {
    pub const ALL: [RoadComponent; 5] = [
        RoadComponent::Urban,
        RoadComponent::Highway,
        RoadComponent::Interchange,
        RoadComponent::Intersection,
        RoadComponent::Roundabout,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            RoadComponent::Urban => "urban",
            RoadComponent::Highway => "highway",
            RoadComponent::Interchange => "interchange",
            RoadComponent::Intersection => "intersection",
            RoadComponent::Roundabout => "roundabout",
        }
    }
}

impl fmt::Display for RoadComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Lane {
    pub id: LaneId,
    pub centerline: Polyline,
    pub width: f64,
    pub speed_limit: f64,
    pub successors: Vec<LaneId>,
    pub predecessors: Vec<LaneId>,
    pub adjacent_left: Option<LaneId>,
    pub adjacent_right: Option<LaneId>,
    pub left_marking: Marking,
    pub right_marking: Marking,
    /// Lane segment inside a junction.
    #[serde(default)]
    pub connector: bool,
}

impl Lane {
    pub fn length(&self) -> f64 {
        self.centerline.length()
    }

    pub fn project(&self, p: Vec2) -> Projection {
        self.centerline.project(p)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.centerline.within(p, self.width * 0.5)
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        let pad = self.width * 0.5;
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.centerline.points() {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (
            Vec2::new(lo.x - pad, lo.y - pad),
            Vec2::new(hi.x + pad, hi.y + pad),
        )
    }
}

/// Light cycle in seconds; phase at time `t` is read from
/// `(t + phase_offset) mod (green + yellow + red)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LightCycle {
    pub green_s: f64,
    pub yellow_s: f64,
    pub red_s: f64,
    pub phase_offset_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LightPhase {
    Green,
    Yellow,
    Red,
}

impl LightCycle {
    pub fn length(&self) -> f64 {
        self.green_s + self.yellow_s + self.red_s
    }

    pub fn phase_at(&self, t: f64) -> LightPhase {
        let u = (t + self.phase_offset_s).rem_euclid(self.length());
        if u < self.green_s {
            LightPhase::Green
        } else if u < self.green_s + self.yellow_s {
            LightPhase::Yellow
        } else {
            LightPhase::Red
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn midpoint(&self) -> Vec2 {
        self.a.lerp(self.b, 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TrafficLight {
    pub id: usize,
    pub stop_line: Segment,
    pub lanes: Vec<LaneId>,
    pub cycle: LightCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StopSign {
    pub stop_line: Segment,
    pub lane: LaneId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Waypoint {
    pub id: usize,
    pub position: Vec2,
    pub lane: LaneId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LaneMap {
    pub format_version: u32,
    pub map_id: String,
    pub lanes: Vec<Lane>,
    /// Drivable junction surfaces (no markings inside).
    #[serde(default)]
    pub junctions: Vec<Obb>,
    pub traffic_lights: Vec<TrafficLight>,
    pub stop_signs: Vec<StopSign>,
    pub static_obstacles: Vec<Obb>,
    pub waypoints: Vec<Waypoint>,
    pub road_components: BTreeMap<RoadComponent, Vec<usize>>,
    #[serde(skip)]
    lane_bounds: Vec<(Vec2, Vec2)>,
}

/// Closest lane match for a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneMatch {
    pub lane: LaneId,
    pub projection: Projection,
}

impl LaneMap {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        map_id: impl Into<String>,
        lanes: Vec<Lane>,
        junctions: Vec<Obb>,
        traffic_lights: Vec<TrafficLight>,
        stop_signs: Vec<StopSign>,
        static_obstacles: Vec<Obb>,
        waypoints: Vec<Waypoint>,
        road_components: BTreeMap<RoadComponent, Vec<usize>>,
    ) -> Self {
        let mut m = Self {
            format_version: MAP_FORMAT_VERSION,
            map_id: map_id.into(),
            lanes,
            junctions,
            traffic_lights,
            stop_signs,
            static_obstacles,
            waypoints,
            road_components,
            lane_bounds: Vec::new(),
        };
        m.reindex();
        m
    }

    fn reindex(&mut self) {
        self.lane_bounds = self.lanes.iter().map(Lane::bounds).collect();
    }

    pub fn lane(&self, id: LaneId) -> &Lane {
        &self.lanes[id]
    }

    /// Lanes whose padded bounding box contains `p`.
    pub fn lanes_near(&self, p: Vec2, pad: f64) -> impl Iterator<Item = &Lane> + '_ {
        self.lanes
            .iter()
            .zip(self.lane_bounds.iter())
            .filter(move |(_, (lo, hi))| {
                p.x >= lo.x - pad && p.x <= hi.x + pad && p.y >= lo.y - pad && p.y <= hi.y + pad
            })
            .map(|(l, _)| l)
    }

    pub fn on_road(&self, p: Vec2) -> bool {
        self.junctions.iter().any(|j| j.contains(p))
            || self.lanes_near(p, 0.0).any(|l| l.contains(p))
    }

    /// Nearest lane to `p`, optionally requiring the lane direction to be
    /// within 90 degrees of `heading`.
    pub fn nearest_lane(&self, p: Vec2, heading: Option<f64>, pad: f64) -> Option<LaneMatch> {
        let mut best: Option<LaneMatch> = None;
        for lane in self.lanes_near(p, pad) {
            let proj = lane.project(p);
            if let Some(h) = heading {
                let lh = lane.centerline.heading_at(proj.s);
                if (h - lh).cos() < 0.0 {
                    continue;
                }
            }
            if best.is_none_or(|b| proj.distance < b.projection.distance) {
                best = Some(LaneMatch {
                    lane: lane.id,
                    projection: proj,
                });
            }
        }
        best
    }

    /// Nearest lane searching the whole map when the local search fails.
    pub fn nearest_lane_anywhere(&self, p: Vec2, heading: Option<f64>) -> Option<LaneMatch> {
        self.nearest_lane(p, heading, 10.0)
            .or_else(|| self.nearest_lane(p, heading, f64::INFINITY))
    }

    pub fn waypoint_pose(&self, wp: &Waypoint) -> Pose {
        let lane = self.lane(wp.lane);
        let proj = lane.project(wp.position);
        Pose {
            position: wp.position,
            heading: lane.centerline.heading_at(proj.s),
        }
    }

    pub fn lights_for_lane(&self, lane: LaneId) -> impl Iterator<Item = &TrafficLight> + '_ {
        self.traffic_lights
            .iter()
            .filter(move |l| l.lanes.contains(&lane))
    }

    /// Lanes reachable from `from` following successors.
    pub fn reachable_from(&self, from: LaneId) -> Vec<bool> {
        let mut seen = vec![false; self.lanes.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(id) = queue.pop_front() {
            for &s in &self.lanes[id].successors {
                if !seen[s] {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
        }
        seen
    }

    /// Shortest lane sequence (by driven length) from `(from, from_s)` to
    /// `(to, to_s)` following successors. A goal behind the start on the
    /// same lane requires a loop back around.
    pub fn lane_path(
        &self,
        from: LaneId,
        from_s: f64,
        to: LaneId,
        to_s: f64,
    ) -> Option<Vec<LaneId>> {
        if from == to && to_s >= from_s {
            return Some(vec![from]);
        }
        #[derive(PartialEq)]
        struct Item(f64, LaneId);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
            }
        }
        let n = self.lanes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<LaneId>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        for &s in &self.lanes[from].successors {
            if dist[s] > 0.0 {
                dist[s] = 0.0;
                heap.push(Item(0.0, s));
            }
        }
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == to {
                let mut path = vec![u];
                let mut cur = u;
                while let Some(p) = prev[cur] {
                    path.push(p);
                    cur = p;
                }
                path.push(from);
                path.reverse();
                return Some(path);
            }
            let nd = d + self.lanes[u].length();
            for &v in &self.lanes[u].successors {
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = Some(u);
                    heap.push(Item(nd, v));
                }
            }
        }
        None
    }

    /// Checks structural invariants and returns the first violation.
    pub fn check(&self) -> Result<(), MapError> {
        if self.format_version != MAP_FORMAT_VERSION {
            return Err(MapError::UnsupportedVersion(self.format_version));
        }
        let n = self.lanes.len();
        if n == 0 {
            return Err(MapError::Invalid {
                field: "lanes".into(),
                rule: "empty".into(),
            });
        }
        for (i, lane) in self.lanes.iter().enumerate() {
            let field = format!("lanes[{i}]");
            if lane.id != i {
                return Err(MapError::Invalid {
                    field: format!("{field}.id"),
                    rule: "lane_id_not_index".into(),
                });
            }
            if lane.speed_limit.is_nan() || lane.speed_limit <= 0.0 {
                return Err(MapError::Invalid {
                    field: format!("{field}.speed_limit"),
                    rule: "speed_limit_nonpositive".into(),
                });
            }
            if lane.width.is_nan() || lane.width <= 0.0 {
                return Err(MapError::Invalid {
                    field: format!("{field}.width"),
                    rule: "width_nonpositive".into(),
                });
            }
            if lane.centerline.points().len() < 2 {
                return Err(MapError::Invalid {
                    field: format!("{field}.centerline"),
                    rule: "too_few_points".into(),
                });
            }
            let refs = lane
                .successors
                .iter()
                .chain(&lane.predecessors)
                .chain(lane.adjacent_left.iter())
                .chain(lane.adjacent_right.iter());
            for &r in refs {
                if r >= n {
                    return Err(MapError::Invalid {
                        field: field.clone(),
                        rule: "dangling_lane_reference".into(),
                    });
                }
            }
            for &s in &lane.successors {
                if !self.lanes[s].predecessors.contains(&i) {
                    return Err(MapError::Invalid {
                        field: format!("{field}.successors"),
                        rule: "asymmetric_successor".into(),
                    });
                }
            }
        }
        // Connectivity: every lane must have a successor or predecessor and
        // the undirected lane graph must be a single component.
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(id) = queue.pop_front() {
            let l = &self.lanes[id];
            for &o in l.successors.iter().chain(&l.predecessors) {
                if !seen[o] {
                    seen[o] = true;
                    queue.push_back(o);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(MapError::Invalid {
                field: format!("lanes[{i}]"),
                rule: "lane_graph_disconnected".into(),
            });
        }
        for (i, light) in self.traffic_lights.iter().enumerate() {
            let c = &light.cycle;
            if !(c.green_s > 0.0 && c.yellow_s > 0.0 && c.red_s > 0.0) {
                return Err(MapError::Invalid {
                    field: format!("traffic_lights[{i}].cycle"),
                    rule: "cycle_duration_nonpositive".into(),
                });
            }
            if light.lanes.iter().any(|&l| l >= n) {
                return Err(MapError::Invalid {
                    field: format!("traffic_lights[{i}].lanes"),
                    rule: "dangling_lane_reference".into(),
                });
            }
        }
        for (i, sign) in self.stop_signs.iter().enumerate() {
            if sign.lane >= n {
                return Err(MapError::Invalid {
                    field: format!("stop_signs[{i}].lane"),
                    rule: "dangling_lane_reference".into(),
                });
            }
        }
        for (i, wp) in self.waypoints.iter().enumerate() {
            if wp.id != i {
                return Err(MapError::Invalid {
                    field: format!("waypoints[{i}].id"),
                    rule: "waypoint_id_not_index".into(),
                });
            }
            if wp.lane >= n || !self.lanes[wp.lane].contains(wp.position) {
                return Err(MapError::Invalid {
                    field: format!("waypoints[{i}]"),
                    rule: "waypoint_off_lane".into(),
                });
            }
        }
        for (comp, ids) in &self.road_components {
            if ids.iter().any(|&w| w >= self.waypoints.len()) {
                return Err(MapError::Invalid {
                    field: format!("road_components.{comp}"),
                    rule: "dangling_waypoint_reference".into(),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let mut map: LaneMap = serde_json::from_str(text).map_err(|e| MapError::Schema {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        map.reindex();
        map.check()?;
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        crate::scenario::canonical_json(self)
    }
}

/// Loads and checks a map file.
pub fn load_map(path: impl AsRef<Path>) -> Result<LaneMap, MapError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MapError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    LaneMap::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn light_phase_closed_form() {
        let c = LightCycle {
            green_s: 10.0,
            yellow_s: 2.0,
            red_s: 8.0,
            phase_offset_s: 5.0,
        };
        assert_eq!(c.phase_at(0.0), LightPhase::Green);
        assert_eq!(c.phase_at(5.0), LightPhase::Yellow);
        assert_eq!(c.phase_at(7.0), LightPhase::Red);
        assert_eq!(c.phase_at(15.0), LightPhase::Green);
        assert_eq!(c.phase_at(20.0 * 3.0 + 7.5), LightPhase::Red);
    }
}
