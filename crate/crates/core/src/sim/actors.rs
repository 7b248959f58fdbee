//! Non-ego actors and their navigation methods.

use crate::geometry::{wrap_angle, Obb, Pose, Vec2};
use crate::scenario::map::LightPhase;
use crate::scenario::{ActorKind, ActorSpec, LaneId, LaneMap, Maneuver, ManeuverAction, NavMethod};

/// Constant time gap for autopilot car following, seconds.
pub const TIME_GAP: f64 = 1.5;
/// Comfortable deceleration for autopilot actors, m/s^2.
pub const COMFORT_DECEL: f64 = 3.0;
const MAX_DECEL: f64 = 8.0;
const MAX_ACCEL: f64 = 2.0;
const STANDSTILL_GAP: f64 = 2.0;
const STOP_LINE_MARGIN: f64 = 1.0;
const LOOKAHEAD: f64 = 60.0;
const PATH_STEP: f64 = 2.0;

/// Snapshot of another body used for car following.
#[derive(Debug, Clone, Copy)]
pub struct Body {
    pub id: Option<usize>,
    pub footprint: Obb,
}

pub struct StepContext<'a> {
    pub map: &'a LaneMap,
    pub dt: f64,
    pub light_phases: &'a [LightPhase],
    pub bodies: &'a [Body],
}

#[derive(Debug, Clone)]
pub struct ActorRuntime {
    pub id: usize,
    pub kind: ActorKind,
    pub nav: NavMethod,
    pub pose: Pose,
    pub speed: f64,
    pub velocity: Vec2,
    pub half_extents: Vec2,
    target_speed: f64,
    destination: Vec2,
    lanes: Vec<LaneId>,
    lane_idx: usize,
    s: f64,
    offset: f64,
    maneuvers: Vec<Maneuver>,
    maneuver_idx: usize,
    maneuver_t: f64,
    maneuver_start_offset: f64,
    /// Arc length on the last route lane where an autopilot route ends.
    route_end_s: Option<f64>,
    stopped_for_good: bool,
}

fn follows_lanes(kind: ActorKind, nav: NavMethod) -> bool {
    kind == ActorKind::Vehicle && matches!(nav, NavMethod::Autopilot | NavMethod::Maneuver)
}

/// Successor with the smallest heading change.
fn straightest_successor(map: &LaneMap, lane: LaneId) -> Option<LaneId> {
    let l = map.lane(lane);
    let h = l.centerline.heading_at(l.length());
    l.successors.iter().copied().min_by(|&a, &b| {
        let ea = map.lane(a);
        let eb = map.lane(b);
        let da = wrap_angle(ea.centerline.heading_at(ea.length()) - h).abs();
        let db = wrap_angle(eb.centerline.heading_at(eb.length()) - h).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    })
}

impl ActorRuntime {
    pub fn new(id: usize, spec: &ActorSpec, map: &LaneMap) -> Self {
        let mut a = Self {
            id,
            kind: spec.kind,
            nav: spec.nav,
            pose: spec.initial,
            speed: if spec.nav == NavMethod::Immobile {
                0.0
            } else {
                spec.target_speed
            },
            velocity: Vec2::ZERO,
            half_extents: spec.half_extents,
            target_speed: spec.target_speed,
            destination: spec.destination,
            lanes: Vec::new(),
            lane_idx: 0,
            s: 0.0,
            offset: 0.0,
            maneuvers: spec.maneuvers.clone(),
            maneuver_idx: 0,
            maneuver_t: 0.0,
            maneuver_start_offset: 0.0,
            route_end_s: None,
            stopped_for_good: false,
        };
        if follows_lanes(spec.kind, spec.nav) {
            match map.nearest_lane_anywhere(spec.initial.position, Some(spec.initial.heading)) {
                Some(m) => {
                    a.s = m.projection.s;
                    a.offset = m.projection.lateral;
                    a.maneuver_start_offset = a.offset;
                    a.lanes = vec![m.lane];
                    if spec.nav == NavMethod::Autopilot {
                        if let Some(dest) = map.nearest_lane_anywhere(spec.destination, None) {
                            if let Some(path) =
                                map.lane_path(m.lane, m.projection.s, dest.lane, dest.projection.s)
                            {
                                a.lanes = path;
                                a.route_end_s = Some(dest.projection.s);
                            }
                        }
                    }
                }
                None => a.stopped_for_good = true,
            }
        }
        a.velocity = Vec2::from_heading(a.pose.heading) * a.speed;
        a
    }

    pub fn footprint(&self) -> Obb {
        Obb::from_pose(&self.pose, self.half_extents)
    }

    fn lane(&self) -> LaneId {
        self.lanes[self.lane_idx]
    }

    /// Next lane after the current one, extending the route when needed.
    fn next_lane(&mut self, map: &LaneMap) -> Option<LaneId> {
        if self.lane_idx + 1 >= self.lanes.len() {
            if self.route_end_s.is_some() {
                return None;
            }
            let next = straightest_successor(map, self.lane())?;
            self.lanes.push(next);
        }
        Some(self.lanes[self.lane_idx + 1])
    }

    /// Points ahead along the route at `PATH_STEP` spacing, with the lane
    /// each one lies on.
    fn path_ahead(&self, map: &LaneMap) -> Vec<(f64, Vec2, LaneId)> {
        let mut out = Vec::new();
        let mut idx = self.lane_idx;
        let mut s = self.s;
        let mut d = 0.0;
        let mut lanes = self.lanes.clone();
        while d <= LOOKAHEAD {
            let lane = map.lane(lanes[idx]);
            if s > lane.length() {
                s -= lane.length();
                if idx + 1 >= lanes.len() {
                    if self.route_end_s.is_some() {
                        break;
                    }
                    match straightest_successor(map, lanes[idx]) {
                        Some(n) => lanes.push(n),
                        None => break,
                    }
                }
                idx += 1;
                continue;
            }
            out.push((d, lane.centerline.point_at(s), lane.id));
            s += PATH_STEP;
            d += PATH_STEP;
        }
        out
    }

    fn remaining_route(&self, map: &LaneMap, end_s: f64) -> f64 {
        let mut rem = -self.s;
        for &l in &self.lanes[self.lane_idx..self.lanes.len() - 1] {
            rem += map.lane(l).length();
        }
        rem + end_s
    }

    /// Autopilot target speed from leaders, red lights and the route end.
    fn autopilot_speed(&self, ctx: &StepContext<'_>) -> f64 {
        let map = ctx.map;
        let limit = map.lane(self.lane()).speed_limit;
        let v0 = self.target_speed.min(limit);
        let front = self.half_extents.x;
        let mut gap = f64::INFINITY;
        let path = self.path_ahead(map);
        if !path.is_empty() {
            for body in ctx.bodies {
                if body.id == Some(self.id) {
                    continue;
                }
                let c = body.footprint.center;
                if c.dist(self.pose.position) > LOOKAHEAD + 10.0 {
                    continue;
                }
                let reach = self.half_extents.y + body.footprint.half_extents.y + 0.3;
                let hit = path
                    .iter()
                    .find(|(_, p, _)| p.dist(c) <= reach)
                    .map(|(d, _, _)| *d);
                if let Some(d) = hit {
                    if d > 0.0 {
                        gap = gap.min(d - front - body.footprint.half_extents.x);
                    }
                }
            }
        }
        // Stop lines of red (or unclearable yellow) lights along the route.
        let mut dist = map.lane(self.lane()).length() - self.s;
        for (k, &l) in self.lanes[self.lane_idx..].iter().enumerate() {
            if k > 0 {
                dist += map.lane(l).length();
            }
            if dist - map.lane(l).length() > LOOKAHEAD {
                break;
            }
            for light in map.lights_for_lane(l) {
                let phase = ctx.light_phases[light.id];
                let line = dist - front;
                let must_stop = match phase {
                    LightPhase::Red => true,
                    LightPhase::Yellow => line > self.speed * self.speed / (2.0 * COMFORT_DECEL),
                    LightPhase::Green => false,
                };
                if must_stop && line > -0.5 {
                    gap = gap.min(line - STOP_LINE_MARGIN + STANDSTILL_GAP);
                }
            }
        }
        if let Some(end_s) = self.route_end_s {
            gap = gap.min(self.remaining_route(map, end_s) + STANDSTILL_GAP - front);
        }
        let free = (gap - STANDSTILL_GAP).max(0.0);
        v0.min(free / TIME_GAP)
            .min((2.0 * COMFORT_DECEL * free).sqrt())
    }

    pub fn step(&mut self, ctx: &StepContext<'_>) {
        let old = self.pose.position;
        match (self.kind, self.nav) {
            (_, NavMethod::Immobile) => {
                self.speed = 0.0;
            }
            (ActorKind::Vehicle, NavMethod::Autopilot) if !self.stopped_for_good => {
                let v_des = self.autopilot_speed(ctx);
                let a = ((v_des - self.speed) / 0.5).clamp(-MAX_DECEL, MAX_ACCEL);
                let v_new = (self.speed + a * ctx.dt).max(0.0);
                let ds = 0.5 * (self.speed + v_new) * ctx.dt;
                self.speed = v_new;
                self.advance_on_lanes(ctx.map, ds, 0.0);
            }
            (ActorKind::Vehicle, NavMethod::Maneuver) if !self.stopped_for_good => {
                let offset_rate = self.advance_maneuver(ctx.map, ctx.dt);
                let ds = self.speed * ctx.dt;
                self.advance_on_lanes(ctx.map, ds, offset_rate);
            }
            (ActorKind::Pedestrian, NavMethod::Autopilot | NavMethod::Maneuver) => {
                let blocked = ctx.bodies.iter().any(|b| {
                    b.id != Some(self.id) && {
                        let rel = self.pose.to_local(b.footprint.center);
                        rel.x > 0.0
                            && rel.x < 3.0 + b.footprint.half_extents.x
                            && rel.y.abs() < 1.0 + b.footprint.half_extents.y
                    }
                });
                self.speed = if blocked { 0.0 } else { self.target_speed };
                self.walk_straight(ctx.dt);
            }
            (_, NavMethod::Linear) => {
                self.speed = self.target_speed;
                self.walk_straight(ctx.dt);
            }
            _ => {
                self.speed = 0.0;
            }
        }
        self.velocity = (self.pose.position - old) * (1.0 / ctx.dt);
    }

    fn walk_straight(&mut self, dt: f64) {
        let to = self.destination - self.pose.position;
        let dist = to.norm();
        let step = self.speed * dt;
        if dist <= step || dist < 1e-9 {
            if dist > 1e-9 {
                self.pose.heading = to.angle();
            }
            self.pose.position = self.destination;
            self.speed = 0.0;
            return;
        }
        self.pose.heading = to.angle();
        self.pose.position += to * (step / dist);
    }

    /// Returns the lateral offset rate for this frame.
    fn advance_maneuver(&mut self, map: &LaneMap, dt: f64) -> f64 {
        let Some(mv) = self.maneuvers.get(self.maneuver_idx).copied() else {
            return 0.0;
        };
        let width = map.lane(self.lane()).width;
        let dir = match mv.action {
            ManeuverAction::Forward => 0.0,
            ManeuverAction::LaneLeft => 1.0,
            ManeuverAction::LaneRight => -1.0,
        };
        let before = self.offset;
        self.maneuver_t += dt;
        let u = (self.maneuver_t / mv.duration).min(1.0);
        let smooth = u * u * (3.0 - 2.0 * u);
        self.offset = self.maneuver_start_offset + dir * width * smooth;
        let rate = (self.offset - before) / dt;
        if u >= 1.0 {
            let lane = map.lane(self.lane());
            let adjacent = match mv.action {
                ManeuverAction::LaneLeft => lane.adjacent_left,
                ManeuverAction::LaneRight => lane.adjacent_right,
                ManeuverAction::Forward => None,
            };
            if let Some(adj) = adjacent {
                let p = lane.centerline.point_at(self.s)
                    + Vec2::from_heading(lane.centerline.heading_at(self.s)).perp() * self.offset;
                let proj = map.lane(adj).project(p);
                self.lanes.truncate(self.lane_idx);
                self.lanes.push(adj);
                self.s = proj.s;
                self.offset = proj.lateral;
            }
            self.maneuver_idx += 1;
            self.maneuver_t = 0.0;
            self.maneuver_start_offset = self.offset;
        }
        rate
    }

    fn advance_on_lanes(&mut self, map: &LaneMap, ds: f64, offset_rate: f64) {
        self.s += ds;
        loop {
            let len = map.lane(self.lane()).length();
            if self.s <= len {
                break;
            }
            match self.next_lane(map) {
                Some(_) => {
                    self.s -= len;
                    self.lane_idx += 1;
                }
                None => {
                    self.s = len;
                    self.speed = 0.0;
                    self.stopped_for_good = true;
                    break;
                }
            }
        }
        let lane = map.lane(self.lane());
        let h = lane.centerline.heading_at(self.s);
        let base = lane.centerline.point_at(self.s);
        self.pose.position = base + Vec2::from_heading(h).perp() * self.offset;
        let slip = if self.speed > 0.1 {
            (offset_rate / self.speed).atan()
        } else {
            0.0
        };
        self.pose.heading = wrap_angle(h + slip);
    }
}
