//! Per-frame driving test oracles: collision, speeding, lane invasion,
//! red-light running and immobility.
//!
//! Every check is a function of logged frame data plus the map and the
//! scenario, so replaying a trace recomputes exactly the flags recorded
//! while it was simulated.

use crate::geometry::{Obb, Vec2};
use crate::scenario::map::{LightPhase, Marking};
use crate::scenario::trace::FrameRecord;
use crate::scenario::{LaneMap, Scenario};
use crate::sim::lanes::LaneTracker;
use crate::sim::Entity;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum MisbehaviorKind {
    Collision,
    Speeding,
    LaneInvasion,
    RedLight,
    Immobility,
}

impl MisbehaviorKind {
    pub const ALL: [MisbehaviorKind; 5] = [
        MisbehaviorKind::Collision,
        MisbehaviorKind::Speeding,
        MisbehaviorKind::LaneInvasion,
        MisbehaviorKind::RedLight,
        MisbehaviorKind::Immobility,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            MisbehaviorKind::Collision => "collision",
            MisbehaviorKind::Speeding => "speeding",
            MisbehaviorKind::LaneInvasion => "lane_invasion",
            MisbehaviorKind::RedLight => "red_light",
            MisbehaviorKind::Immobility => "immobility",
        }
    }
}

impl fmt::Display for MisbehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Oracle verdicts for one frame.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct OracleFlags {
    /// Entities overlapping the ego, sorted.
    pub collision: Vec<Entity>,
    pub speeding: bool,
    pub lane_invasion: bool,
    pub red_light: bool,
    pub immobility: bool,
}

impl OracleFlags {
    pub fn has(&self, kind: MisbehaviorKind) -> bool {
        match kind {
            MisbehaviorKind::Collision => !self.collision.is_empty(),
            MisbehaviorKind::Speeding => self.speeding,
            MisbehaviorKind::LaneInvasion => self.lane_invasion,
            MisbehaviorKind::RedLight => self.red_light,
            MisbehaviorKind::Immobility => self.immobility,
        }
    }

    /// First raised kind in a fixed priority order.
    pub fn first(&self) -> Option<MisbehaviorKind> {
        MisbehaviorKind::ALL.into_iter().find(|&k| self.has(k))
    }

    pub fn any(&self) -> bool {
        self.first().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct OracleConfig {
    /// Speed must exceed the limit this long, s.
    pub speeding_persistence: f64,
    pub immobility_window: f64,
    /// Speed below which the ego counts as stopped, m/s.
    pub immobility_speed: f64,
    /// Distance upstream of a red stop line where stops are legitimate, m.
    pub red_light_zone: f64,
    pub exclude_red_light_stops: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            speeding_persistence: 1.0,
            immobility_window: 60.0,
            immobility_speed: 0.1,
            red_light_zone: 25.0,
            exclude_red_light_stops: true,
        }
    }
}

/// Stateful per-episode oracle evaluation over consecutive frames.
pub struct OracleMonitor<'a> {
    map: &'a LaneMap,
    cfg: OracleConfig,
    ego_half: Vec2,
    actor_half: Vec<Vec2>,
    tracker: LaneTracker,
    last_limit: Option<f64>,
    speeding_since: Option<f64>,
    still_since: Option<f64>,
    prev_bumper: Option<Vec2>,
    /// Per traffic light: stop-line midpoint, travel direction, half length.
    stop_lines: Vec<(Vec2, Vec2, f64)>,
}

fn front_bumper(fp: &Obb) -> Vec2 {
    fp.center + Vec2::from_heading(fp.heading) * fp.half_extents.x
}

/// Stop-line midpoint, travel direction of the controlled lane, and
/// half the line length.
fn stop_line_frame(map: &LaneMap, light: &crate::scenario::map::TrafficLight) -> (Vec2, Vec2, f64) {
    let (a, b) = (light.stop_line.a, light.stop_line.b);
    let mid = light.stop_line.midpoint();
    let normal = match light.lanes.first() {
        Some(&id) => {
            let lane = map.lane(id);
            Vec2::from_heading(lane.centerline.heading_at(lane.project(mid).s))
        }
        None => (b - a).normalized().perp(),
    };
    (mid, normal, a.dist(b) * 0.5)
}

impl<'a> OracleMonitor<'a> {
    pub fn new(map: &'a LaneMap, scenario: &Scenario, ego_half: Vec2, cfg: OracleConfig) -> Self {
        Self {
            map,
            cfg,
            ego_half,
            actor_half: scenario.actors.iter().map(|a| a.half_extents).collect(),
            tracker: LaneTracker::default(),
            last_limit: None,
            speeding_since: None,
            still_since: None,
            prev_bumper: None,
            stop_lines: map
                .traffic_lights
                .iter()
                .map(|l| stop_line_frame(map, l))
                .collect(),
        }
    }

    pub fn observe(&mut self, frame: &FrameRecord) -> OracleFlags {
        let ego = &frame.ego;
        let fp = Obb::from_pose(&ego.pose(), self.ego_half);
        let t = ego.sim_time;
        let lane = self.tracker.update(self.map, &ego.pose());
        let flags = OracleFlags {
            collision: self.collisions(frame, &fp),
            speeding: self.speeding(lane, ego.speed(), t),
            lane_invasion: self.lane_invasion(lane, &fp),
            red_light: self.red_light(frame, &fp),
            immobility: self.immobility(frame, &fp, t),
        };
        self.prev_bumper = Some(front_bumper(&fp));
        flags
    }

    fn collisions(&self, frame: &FrameRecord, fp: &Obb) -> Vec<Entity> {
        let mut hit = Vec::new();
        for (i, a) in frame.actors.iter().enumerate() {
            let other = Obb::from_pose(&a.pose, self.actor_half[i]);
            if fp.overlaps(&other) {
                hit.push(Entity::Actor(i));
            }
        }
        for (i, o) in self.map.static_obstacles.iter().enumerate() {
            if fp.overlaps(o) {
                hit.push(Entity::Static(i));
            }
        }
        hit
    }

    fn speeding(&mut self, lane: Option<usize>, speed: f64, t: f64) -> bool {
        if let Some(l) = lane {
            self.last_limit = Some(self.map.lane(l).speed_limit);
        }
        let Some(limit) = self.last_limit else {
            return false;
        };
        if speed > limit {
            let since = *self.speeding_since.get_or_insert(t);
            t - since >= self.cfg.speeding_persistence - 1e-9
        } else {
            self.speeding_since = None;
            false
        }
    }

    fn lane_invasion(&self, lane: Option<usize>, fp: &Obb) -> bool {
        let in_junction = |p: Vec2| self.map.junctions.iter().any(|j| j.contains(p));
        for c in fp.corners() {
            if !self.map.on_road(c) {
                return true;
            }
            let Some(id) = lane else { continue };
            let l = self.map.lane(id);
            let proj = l.project(c);
            if proj.s <= 0.05 || proj.s >= l.length() - 0.05 || proj.lateral.abs() <= l.width * 0.5
            {
                continue;
            }
            let marking = if proj.lateral > 0.0 {
                l.left_marking
            } else {
                l.right_marking
            };
            if marking == Marking::Solid && !in_junction(c) {
                return true;
            }
        }
        false
    }

    fn red_light(&self, frame: &FrameRecord, fp: &Obb) -> bool {
        let Some(prev) = self.prev_bumper else {
            return false;
        };
        let cur = front_bumper(fp);
        for (light, &(mid, normal, half_len)) in
            self.map.traffic_lights.iter().zip(&self.stop_lines)
        {
            if frame.lights.get(light.id) != Some(&LightPhase::Red) {
                continue;
            }
            let d0 = (prev - mid).dot(normal);
            let d1 = (cur - mid).dot(normal);
            let lateral = (cur - mid).dot(normal.perp()).abs();
            if d0 < 0.0 && d1 >= 0.0 && lateral <= half_len + self.ego_half.y {
                return true;
            }
        }
        false
    }

    fn in_red_zone(&self, frame: &FrameRecord, fp: &Obb) -> bool {
        let bumper = front_bumper(fp);
        self.map.traffic_lights.iter().zip(&self.stop_lines).any(
            |(light, &(mid, normal, half_len))| {
                if frame.lights.get(light.id) != Some(&LightPhase::Red) {
                    return false;
                }
                let upstream = (mid - bumper).dot(normal);
                let lateral = (bumper - mid).dot(normal.perp()).abs();
                (0.0..=self.cfg.red_light_zone).contains(&upstream)
                    && lateral <= half_len + self.ego_half.y
            },
        )
    }

    fn immobility(&mut self, frame: &FrameRecord, fp: &Obb, t: f64) -> bool {
        let still = frame.ego.speed() < self.cfg.immobility_speed;
        let excused = self.cfg.exclude_red_light_stops && self.in_red_zone(frame, fp);
        if !still || excused {
            self.still_since = None;
            return false;
        }
        let since = *self.still_since.get_or_insert(t);
        t - since >= self.cfg.immobility_window - 1e-9
    }
}

/// Recomputes oracle flags for every frame of a logged episode.
pub fn recompute_flags(
    map: &LaneMap,
    scenario: &Scenario,
    ego_half: Vec2,
    cfg: OracleConfig,
    frames: &[FrameRecord],
) -> Vec<OracleFlags> {
    let mut m = OracleMonitor::new(map, scenario, ego_half, cfg);
    frames.iter().map(|f| m.observe(f)).collect()
}
