//! Built-in maps and the road-network builder that produces them.
//!
//! Roads run between junction nodes; each road carries lanes in one or both
//! directions (right-hand traffic). Junction connectors are generated as
//! smooth curves from every incoming lane to the lanes of every other road
//! at the node.

use crate::error::MapError;
use crate::geometry::{arc, bezier_connector, filleted_path, Obb, Polyline, Vec2};
use crate::scenario::map::{
    Lane, LaneId, LaneMap, LightCycle, Marking, RoadComponent, Segment, StopSign, TrafficLight,
    Waypoint,
};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::sync::{Arc, OnceLock};

pub const LANE_WIDTH: f64 = 3.5;
const SPACING: f64 = 1.0;
const WAYPOINT_SPACING: f64 = 10.0;

pub const TOWN_GRID: &str = "town_grid";
pub const STRAIGHT_ROAD: &str = "straight_road";
pub const SIGNAL_ROAD: &str = "signal_road";
pub const CROSSROADS: &str = "crossroads";
pub const CURVE_ROAD: &str = "curve_road";

pub const BUILTIN_IDS: [&str; 5] = [
    TOWN_GRID,
    STRAIGHT_ROAD,
    SIGNAL_ROAD,
    CROSSROADS,
    CURVE_ROAD,
];

pub type NodeId = usize;
pub type RoadId = usize;

struct Node {
    pos: Vec2,
    radius: f64,
    signal: Option<SignalPlan>,
    /// Junction surface orientation.
    heading: f64,
}

#[derive(Clone, Copy)]
pub struct SignalPlan {
    /// Cycle for approaches running along the x axis.
    pub east_west: LightCycle,
    /// Cycle for approaches running along the y axis.
    pub north_south: LightCycle,
}

struct Road {
    from: NodeId,
    to: NodeId,
    fwd: Vec<LaneId>,
    bwd: Vec<LaneId>,
}

/// Incrementally assembles a [`LaneMap`].
pub struct MapBuilder {
    map_id: String,
    nodes: Vec<Node>,
    roads: Vec<Road>,
    lanes: Vec<Lane>,
    obstacles: Vec<Obb>,
    stop_signs: Vec<(RoadId, NodeId)>,
}

impl MapBuilder {
    pub fn new(map_id: impl Into<String>) -> Self {
        Self {
            map_id: map_id.into(),
            nodes: Vec::new(),
            roads: Vec::new(),
            lanes: Vec::new(),
            obstacles: Vec::new(),
            stop_signs: Vec::new(),
        }
    }

    pub fn node(&mut self, x: f64, y: f64, radius: f64) -> NodeId {
        self.nodes.push(Node {
            pos: Vec2::new(x, y),
            radius,
            signal: None,
            heading: 0.0,
        });
        self.nodes.len() - 1
    }

    pub fn set_heading(&mut self, node: NodeId, heading: f64) {
        self.nodes[node].heading = heading;
    }

    pub fn signalize(&mut self, node: NodeId, plan: SignalPlan) {
        self.nodes[node].signal = Some(plan);
    }

    pub fn obstacle(&mut self, center: Vec2, half: Vec2, heading: f64) {
        self.obstacles.push(Obb::new(center, half, heading));
    }

    /// Stop sign on the lanes of `road` that enter `node`.
    pub fn stop_sign(&mut self, road: RoadId, node: NodeId) {
        self.stop_signs.push((road, node));
    }

    /// Straight or corner-filleted road through `via`.
    pub fn road(
        &mut self,
        from: NodeId,
        to: NodeId,
        via: &[Vec2],
        fwd: usize,
        bwd: usize,
        speed_limit: f64,
    ) -> RoadId {
        let mut corners = vec![self.nodes[from].pos];
        corners.extend_from_slice(via);
        corners.push(self.nodes[to].pos);
        let path = filleted_path(&corners, 35.0, SPACING);
        self.road_along(from, to, &path, fwd, bwd, speed_limit)
    }

    /// Road following `path`, which runs from node center to node center.
    pub fn road_along(
        &mut self,
        from: NodeId,
        to: NodeId,
        path: &Polyline,
        fwd: usize,
        bwd: usize,
        speed_limit: f64,
    ) -> RoadId {
        let s0 = self.nodes[from].radius;
        let s1 = path.length() - self.nodes[to].radius;
        assert!(
            s1 > s0 + 2.0,
            "road between nodes {from} and {to} is too short"
        );
        let n = ((s1 - s0) / SPACING).ceil() as usize;
        let trimmed = Polyline::new(
            (0..=n)
                .map(|i| path.point_at(s0 + (s1 - s0) * i as f64 / n as f64))
                .collect(),
        );
        let one_way = bwd == 0;
        let make = |base: &Polyline, count: usize, lanes: &mut Vec<Lane>| -> Vec<LaneId> {
            let first = lanes.len();
            let ids: Vec<LaneId> = (first..first + count).collect();
            for k in 0..count {
                let offset = if one_way {
                    -(k as f64 - (count as f64 - 1.0) / 2.0) * LANE_WIDTH
                } else {
                    -(k as f64 + 0.5) * LANE_WIDTH
                };
                let left_marking = if k == 0 {
                    Marking::Solid
                } else {
                    Marking::Crossable
                };
                let right_marking = if k + 1 == count {
                    Marking::Solid
                } else {
                    Marking::Crossable
                };
                lanes.push(Lane {
                    id: first + k,
                    centerline: base.offset(offset),
                    width: LANE_WIDTH,
                    speed_limit,
                    successors: Vec::new(),
                    predecessors: Vec::new(),
                    adjacent_left: (k > 0).then(|| first + k - 1),
                    adjacent_right: (k + 1 < count).then(|| first + k + 1),
                    left_marking,
                    right_marking,
                    connector: false,
                });
            }
            ids
        };
        let fwd_ids = make(&trimmed, fwd, &mut self.lanes);
        let bwd_ids = make(&trimmed.reversed(), bwd, &mut self.lanes);
        self.roads.push(Road {
            from,
            to,
            fwd: fwd_ids,
            bwd: bwd_ids,
        });
        self.roads.len() - 1
    }

    fn incoming(&self, node: NodeId) -> Vec<(RoadId, Vec<LaneId>)> {
        self.roads
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                if r.to == node && !r.fwd.is_empty() {
                    Some((i, r.fwd.clone()))
                } else if r.from == node && !r.bwd.is_empty() {
                    Some((i, r.bwd.clone()))
                } else {
                    None
                }
            })
            .collect()
    }

    fn outgoing(&self, node: NodeId) -> Vec<(RoadId, Vec<LaneId>)> {
        self.roads
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                if r.from == node && !r.fwd.is_empty() {
                    Some((i, r.fwd.clone()))
                } else if r.to == node && !r.bwd.is_empty() {
                    Some((i, r.bwd.clone()))
                } else {
                    None
                }
            })
            .collect()
    }

    fn connect(&mut self, a: LaneId, b: LaneId) {
        let la = &self.lanes[a];
        let lb = &self.lanes[b];
        let p0 = la.centerline.end();
        let h0 = la.centerline.heading_at(la.length());
        let p3 = lb.centerline.start();
        let h3 = lb.centerline.heading_at(0.0);
        let curve = bezier_connector(p0, h0, p3, h3, SPACING);
        let id = self.lanes.len();
        let limit = la.speed_limit.min(lb.speed_limit);
        self.lanes.push(Lane {
            id,
            centerline: curve,
            width: LANE_WIDTH,
            speed_limit: limit,
            successors: vec![b],
            predecessors: vec![a],
            adjacent_left: None,
            adjacent_right: None,
            left_marking: Marking::Crossable,
            right_marking: Marking::Crossable,
            connector: true,
        });
        self.lanes[a].successors.push(id);
        self.lanes[b].predecessors.push(id);
    }

    fn build_junction(&mut self, node: NodeId) {
        let ins = self.incoming(node);
        let outs = self.outgoing(node);
        let mut pairs: Vec<(LaneId, LaneId)> = Vec::new();
        for (ri, in_lanes) in &ins {
            for (ro, out_lanes) in &outs {
                if ri == ro && ins.len() + outs.len() > 2 {
                    continue;
                }
                let (ni, no) = (in_lanes.len(), out_lanes.len());
                for j in 0..ni.min(no) {
                    pairs.push((in_lanes[ni - 1 - j], out_lanes[no - 1 - j]));
                }
            }
        }
        // Lanes left without a connection get merged into the nearest one.
        let connected_in =
            |pairs: &Vec<(LaneId, LaneId)>, l: LaneId| pairs.iter().any(|p| p.0 == l);
        let connected_out =
            |pairs: &Vec<(LaneId, LaneId)>, l: LaneId| pairs.iter().any(|p| p.1 == l);
        let mut extra = Vec::new();
        for (ri, in_lanes) in &ins {
            for (k, &l) in in_lanes.iter().enumerate() {
                if connected_in(&pairs, l) {
                    continue;
                }
                for (ro, out_lanes) in &outs {
                    if ri == ro && ins.len() + outs.len() > 2 {
                        continue;
                    }
                    let idx = (out_lanes.len() as isize - in_lanes.len() as isize + k as isize)
                        .clamp(0, out_lanes.len() as isize - 1)
                        as usize;
                    extra.push((l, out_lanes[idx]));
                }
            }
        }
        for (ro, out_lanes) in &outs {
            for (k, &l) in out_lanes.iter().enumerate() {
                if connected_out(&pairs, l) || extra.iter().any(|p| p.1 == l) {
                    continue;
                }
                for (ri, in_lanes) in &ins {
                    if ri == ro && ins.len() + outs.len() > 2 {
                        continue;
                    }
                    let idx = (in_lanes.len() as isize - out_lanes.len() as isize + k as isize)
                        .clamp(0, in_lanes.len() as isize - 1)
                        as usize;
                    extra.push((in_lanes[idx], l));
                }
            }
        }
        pairs.extend(extra);
        pairs.sort_unstable();
        pairs.dedup();
        for (a, b) in pairs {
            self.connect(a, b);
        }
    }

    pub fn build(mut self, components: impl Fn(&Waypoint, &Lane) -> Vec<RoadComponent>) -> LaneMap {
        let road_lane_count = self.lanes.len();
        for node in 0..self.nodes.len() {
            self.build_junction(node);
        }
        let junctions = self
            .nodes
            .iter()
            .filter(|n| n.radius > 0.0)
            .map(|n| Obb::new(n.pos, Vec2::new(n.radius, n.radius), n.heading))
            .collect();

        let mut lights = Vec::new();
        for (ni, node) in self.nodes.iter().enumerate() {
            let Some(plan) = node.signal else { continue };
            for (_, in_lanes) in self.incoming(ni) {
                let first = &self.lanes[in_lanes[0]];
                let h = first.centerline.heading_at(first.length());
                let cycle = if h.cos().abs() >= h.sin().abs() {
                    plan.east_west
                } else {
                    plan.north_south
                };
                for &l in &in_lanes {
                    let lane = &self.lanes[l];
                    let end = lane.centerline.end();
                    let across = Vec2::from_heading(h).perp() * (lane.width * 0.5);
                    lights.push(TrafficLight {
                        id: lights.len(),
                        stop_line: Segment {
                            a: end + across,
                            b: end - across,
                        },
                        lanes: vec![l],
                        cycle,
                    });
                }
            }
        }

        let mut stop_signs = Vec::new();
        for &(road, node) in &self.stop_signs {
            let r = &self.roads[road];
            let lanes = if r.to == node { &r.fwd } else { &r.bwd };
            for &l in lanes {
                let lane = &self.lanes[l];
                let end = lane.centerline.end();
                let h = lane.centerline.heading_at(lane.length());
                let across = Vec2::from_heading(h).perp() * (lane.width * 0.5);
                stop_signs.push(StopSign {
                    stop_line: Segment {
                        a: end + across,
                        b: end - across,
                    },
                    lane: l,
                });
            }
        }

        let mut waypoints = Vec::new();
        for lane in self.lanes.iter().take(road_lane_count) {
            let len = lane.length();
            let mut s = WAYPOINT_SPACING * 0.5;
            while s < len - 2.0 {
                waypoints.push(Waypoint {
                    id: waypoints.len(),
                    position: lane.centerline.point_at(s),
                    lane: lane.id,
                });
                s += WAYPOINT_SPACING;
            }
        }
        let mut road_components: BTreeMap<RoadComponent, Vec<usize>> = BTreeMap::new();
        for wp in &waypoints {
            for c in components(wp, &self.lanes[wp.lane]) {
                road_components.entry(c).or_default().push(wp.id);
            }
        }
        LaneMap::new(
            self.map_id,
            self.lanes,
            junctions,
            lights,
            stop_signs,
            self.obstacles,
            waypoints,
            road_components,
        )
    }
}

pub const URBAN_LIMIT: f64 = 11.0;
pub const HIGHWAY_LIMIT: f64 = 22.0;

/// Standard two-phase plan: north-south green first, east-west offset by
/// half a cycle.
pub fn two_phase_plan(green: f64, yellow: f64) -> SignalPlan {
    let red = green + yellow;
    let cycle = green + yellow + red;
    SignalPlan {
        north_south: LightCycle {
            green_s: green,
            yellow_s: yellow,
            red_s: red,
            phase_offset_s: 0.0,
        },
        east_west: LightCycle {
            green_s: green,
            yellow_s: yellow,
            red_s: red,
            phase_offset_s: cycle / 2.0,
        },
    }
}

/// Town map with all five road components: a 3x3 urban grid with a
/// signalized center intersection, a roundabout to the west, and a highway
/// to the south joined to the grid at an interchange.
pub fn town_grid() -> LaneMap {
    let mut b = MapBuilder::new(TOWN_GRID);
    let spacing = 150.0;
    let mut g = [[0usize; 3]; 3];
    for (i, row) in g.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = b.node(spacing * i as f64, spacing * j as f64, 12.0);
        }
    }
    b.signalize(g[1][1], two_phase_plan(20.0, 3.0));
    for i in 0..3 {
        for j in 0..3 {
            if i + 1 < 3 {
                b.road(g[i][j], g[i + 1][j], &[], 1, 1, URBAN_LIMIT);
            }
            if j + 1 < 3 {
                b.road(g[i][j], g[i][j + 1], &[], 1, 1, URBAN_LIMIT);
            }
        }
    }
    // Buildings in each block and poles just off the curb at the corners of
    // every grid junction.
    for i in 0..2 {
        for j in 0..2 {
            let c = Vec2::new(spacing * (i as f64 + 0.5), spacing * (j as f64 + 0.5));
            b.obstacle(c, Vec2::new(52.0, 52.0), 0.0);
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let c = Vec2::new(spacing * i as f64, spacing * j as f64);
            for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
                b.obstacle(c + Vec2::new(sx * 14.5, sy * 6.0), Vec2::new(0.2, 0.2), 0.0);
            }
        }
    }

    // Roundabout west of the grid.
    let center = Vec2::new(-130.0, 150.0);
    let ring_r = 20.0;
    let ring: Vec<NodeId> = (0..4)
        .map(|k| {
            let a = k as f64 * FRAC_PI_2;
            let p = center + Vec2::from_heading(a) * ring_r;
            let n = b.node(p.x, p.y, 10.0);
            b.set_heading(n, a);
            n
        })
        .collect();
    for k in 0..4 {
        let a0 = k as f64 * FRAC_PI_2;
        let path = arc(center, ring_r, a0, a0 + FRAC_PI_2, 0.5);
        b.road_along(ring[k], ring[(k + 1) % 4], &path, 1, 0, 8.0);
    }
    b.obstacle(center, Vec2::new(9.0, 9.0), PI / 4.0);
    let spoke = b.road(ring[0], g[0][1], &[], 1, 1, URBAN_LIMIT);
    b.stop_sign(spoke, g[0][1]);
    b.road(
        ring[1],
        g[0][2],
        &[Vec2::new(-130.0, 300.0)],
        1,
        1,
        URBAN_LIMIT,
    );
    b.road(
        ring[3],
        g[0][0],
        &[Vec2::new(-130.0, 0.0)],
        1,
        1,
        URBAN_LIMIT,
    );

    // Highway with an interchange node feeding the grid.
    let hw_west = b.node(-240.0, -120.0, 14.0);
    let interchange = b.node(150.0, -120.0, 18.0);
    let hw_east = b.node(450.0, -120.0, 14.0);
    b.road(ring[2], hw_west, &[Vec2::new(-240.0, 150.0)], 1, 1, 14.0);
    b.road(hw_west, interchange, &[], 2, 2, HIGHWAY_LIMIT);
    b.road(interchange, hw_east, &[], 2, 2, HIGHWAY_LIMIT);
    b.road(interchange, g[1][0], &[], 1, 1, 14.0);
    b.road(hw_east, g[2][0], &[Vec2::new(450.0, 0.0)], 1, 1, 14.0);

    let center_node = Vec2::new(spacing, spacing);
    let interchange_pos = Vec2::new(150.0, -120.0);
    let highway_lanes_y = -120.0;
    b.build(move |wp, _lane| {
        let p = wp.position;
        let mut out = Vec::new();
        let on_grid = p.x >= -4.0 && p.x <= 304.0 && p.y >= -4.0 && p.y <= 304.0;
        if on_grid && p.dist(center_node) > 30.0 {
            out.push(RoadComponent::Urban);
        }
        if p.dist(center_node) <= 60.0 {
            out.push(RoadComponent::Intersection);
        }
        if p.dist(center) <= 60.0 {
            out.push(RoadComponent::Roundabout);
        }
        let on_highway = (p.y - highway_lanes_y).abs() < 8.0 && p.x > -226.0 && p.x < 436.0;
        if on_highway && p.dist(interchange_pos) > 80.0 {
            out.push(RoadComponent::Highway);
        }
        if p.dist(interchange_pos) <= 80.0 {
            out.push(RoadComponent::Interchange);
        }
        out
    })
}

/// 600 m straight two-way road along +x, one lane per direction.
pub fn straight_road() -> LaneMap {
    let mut b = MapBuilder::new(STRAIGHT_ROAD);
    let a = b.node(0.0, 0.0, 0.0);
    let e = b.node(600.0, 0.0, 0.0);
    b.road(a, e, &[], 1, 1, 10.0);
    b.build(|_, _| vec![RoadComponent::Urban])
}

/// Straight road with a junction at x = 200 whose eastbound light is red
/// for the first 300 s.
pub fn signal_road() -> LaneMap {
    let mut b = MapBuilder::new(SIGNAL_ROAD);
    let a = b.node(0.0, 0.0, 0.0);
    let j = b.node(200.0, 0.0, 10.0);
    let e = b.node(500.0, 0.0, 0.0);
    let long_red = LightCycle {
        green_s: 5.0,
        yellow_s: 3.0,
        red_s: 300.0,
        phase_offset_s: 8.0,
    };
    b.signalize(
        j,
        SignalPlan {
            east_west: long_red,
            north_south: long_red,
        },
    );
    b.road(a, j, &[], 1, 1, 10.0);
    b.road(j, e, &[], 1, 1, 10.0);
    b.build(|_, _| vec![RoadComponent::Intersection])
}

/// Single unsignalized four-way junction at the origin with 150 m arms.
pub fn crossroads() -> LaneMap {
    let mut b = MapBuilder::new(CROSSROADS);
    let c = b.node(0.0, 0.0, 12.0);
    let arms = [(150.0, 0.0), (0.0, 150.0), (-150.0, 0.0), (0.0, -150.0)];
    for (x, y) in arms {
        let n = b.node(x, y, 0.0);
        b.road(n, c, &[], 1, 1, URBAN_LIMIT);
    }
    b.build(|_, _| vec![RoadComponent::Intersection])
}

/// Long sweeping left-hand curve between two straights.
pub fn curve_road() -> LaneMap {
    let mut b = MapBuilder::new(CURVE_ROAD);
    let a = b.node(0.0, 0.0, 0.0);
    let e = b.node(300.0, 300.0, 0.0);
    let path = filleted_path(
        &[
            Vec2::new(0.0, 0.0),
            Vec2::new(300.0, 0.0),
            Vec2::new(300.0, 300.0),
        ],
        60.0,
        SPACING,
    );
    b.road_along(a, e, &path, 1, 1, 16.0);
    b.build(|_, _| vec![RoadComponent::Urban])
}

fn build_builtin(id: &str) -> Option<LaneMap> {
    Some(match id {
        TOWN_GRID => town_grid(),
        STRAIGHT_ROAD => straight_road(),
        SIGNAL_ROAD => signal_road(),
        CROSSROADS => crossroads(),
        CURVE_ROAD => curve_road(),
        _ => return None,
    })
}

/// Shared, lazily built instance of a built-in map.
pub fn builtin(id: &str) -> Option<Arc<LaneMap>> {
    static CACHE: OnceLock<BTreeMap<&'static str, Arc<LaneMap>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        BUILTIN_IDS
            .iter()
            .map(|&k| (k, Arc::new(build_builtin(k).expect("built-in id"))))
            .collect()
    });
    cache.get(id).cloned()
}

/// Resolves a map id: built-ins first, then `<dir>/<id>.json`.
pub fn resolve(id: &str, dir: Option<&Path>) -> Result<Arc<LaneMap>, MapError> {
    if let Some(m) = builtin(id) {
        return Ok(m);
    }
    if let Some(dir) = dir {
        let path = dir.join(format!("{id}.json"));
        if path.exists() {
            let m = crate::scenario::load_map(&path)?;
            if m.map_id != id {
                return Err(MapError::UnknownMap(id.to_string()));
            }
            return Ok(Arc::new(m));
        }
    }
    Err(MapError::UnknownMap(id.to_string()))
}
