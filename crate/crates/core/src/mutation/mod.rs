//! Scenario generation and mutation under the four strategies.
//!
//! `generate` adds exactly one component; `mutate` perturbs only the newest
//! component (or, under `all`, possibly one weather scalar). Every
//! placement is redrawn until the spatial and temporal constraints hold or
//! the retry cap is hit.

pub mod constraints;

use crate::error::MutationError;
use crate::geometry::{wrap_angle, Pose, Vec2};
use crate::scenario::{
    ActorKind, ActorSpec, ComponentRef, LaneMap, Maneuver, ManeuverAction, NavMethod, PuddleSpec,
    Scenario, DEFAULT_DRY_FRICTION, INTERACTION_RANGE,
};
use crate::sut::{plan_global, Route};
use constraints::{check_spatial, check_temporal};
use rand::seq::IndexedRandom;
use rand::Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Maneuver-based: adversarial lane changes.
    Man,
    /// Congestion: lawful autopilot traffic.
    Con,
    /// Entropy: linear and immobile actors.
    Ent,
    /// Instability: puddles only.
    Ins,
    /// One of the four above, chosen per cycle.
    All,
}

impl Strategy {
    pub const CONCRETE: [Strategy; 4] =
        [Strategy::Man, Strategy::Con, Strategy::Ent, Strategy::Ins];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Man => "man",
            Strategy::Con => "con",
            Strategy::Ent => "ent",
            Strategy::Ins => "ins",
            Strategy::All => "all",
        }
    }

    /// Whether `nav` is a navigation method this strategy creates.
    pub fn allows(self, nav: NavMethod) -> bool {
        match self {
            Strategy::Man => nav == NavMethod::Maneuver,
            Strategy::Con => nav == NavMethod::Autopilot,
            Strategy::Ent => matches!(nav, NavMethod::Linear | NavMethod::Immobile),
            Strategy::Ins => false,
            Strategy::All => true,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "man" => Ok(Strategy::Man),
            "con" => Ok(Strategy::Con),
            "ent" => Ok(Strategy::Ent),
            "ins" => Ok(Strategy::Ins),
            "all" => Ok(Strategy::All),
            other => Err(format!(
                "unknown strategy {other:?} (expected man, con, ent, ins or all)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct MutationConfig {
    pub retry_cap: u32,
    /// Uniform position perturbation per axis, m.
    pub position_step: f64,
    /// Multiplicative speed perturbation, fraction.
    pub speed_step: f64,
    /// Additive weather perturbation (scaled to each field's range).
    pub weather_step: f64,
    /// Probability that a mutation under `all` touches the weather.
    pub weather_share: f64,
    pub dry_friction: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            retry_cap: 2000,
            position_step: 10.0,
            speed_step: 0.2,
            weather_step: 0.2,
            weather_share: 0.25,
            dry_friction: DEFAULT_DRY_FRICTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct MutationStats {
    pub retries_spatial: u64,
    pub retries_temporal: u64,
    pub components_added: u64,
}

impl MutationStats {
    pub fn add(&mut self, o: &MutationStats) {
        self.retries_spatial += o.retries_spatial;
        self.retries_temporal += o.retries_temporal;
        self.components_added += o.components_added;
    }
}

/// Mutation engine bound to one seed's map and mission.
pub struct Mutator<'a> {
    map: &'a LaneMap,
    cfg: MutationConfig,
    /// Ego route points within the interaction range.
    anchors: Vec<Pose>,
    origin: Vec2,
    pub stats: MutationStats,
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn sym(rng: &mut impl Rng, r: f64) -> f64 {
    uniform(rng, -r, r)
}

impl<'a> Mutator<'a> {
    pub fn new(map: &'a LaneMap, scenario: &Scenario, cfg: MutationConfig) -> Self {
        let origin = scenario.mission.initial.position;
        let anchors = match plan_global(map, &scenario.mission) {
            Ok(route) => Self::anchors_from(&route, origin),
            Err(_) => vec![scenario.mission.initial],
        };
        Self {
            map,
            cfg,
            anchors,
            origin,
            stats: MutationStats::default(),
        }
    }

    fn anchors_from(route: &Route, origin: Vec2) -> Vec<Pose> {
        let mut out: Vec<Pose> = route
            .points
            .iter()
            .step_by(2)
            .filter(|p| p.position.dist(origin) <= INTERACTION_RANGE - 10.0)
            .map(|p| route.line.pose_at(p.s))
            .collect();
        if out.is_empty() {
            out.push(route.line.pose_at(0.0));
        }
        out
    }

    fn anchor(&self, rng: &mut impl Rng) -> Pose {
        *self.anchors.choose(rng).expect("at least one anchor")
    }

    /// Pose on a lane near the ego route, facing along the lane.
    fn lane_pose(&self, rng: &mut impl Rng, near: Vec2, spread: f64) -> Option<Pose> {
        let lanes: Vec<_> = self
            .map
            .lanes_near(near, 12.0)
            .filter(|l| !l.connector)
            .collect();
        let lane = lanes.choose(rng)?;
        let s = lane.project(near).s + sym(rng, spread);
        let s = s.clamp(0.0, lane.length());
        Some(lane.centerline.pose_at(s))
    }

    fn speed(&self, rng: &mut impl Rng, kind: ActorKind, lo: f64) -> f64 {
        uniform(rng, lo.min(kind.max_speed()), kind.max_speed())
    }

    fn maneuvers(&self, rng: &mut impl Rng) -> Vec<Maneuver> {
        let n = rng.random_range(1..=3);
        (0..n)
            .map(|_| Maneuver {
                action: *[
                    ManeuverAction::Forward,
                    ManeuverAction::LaneLeft,
                    ManeuverAction::LaneRight,
                ]
                .choose(rng)
                .expect("non-empty"),
                duration: uniform(rng, 1.0, 4.0),
            })
            .collect()
    }

    fn far_waypoint(&self, rng: &mut impl Rng, from: Vec2) -> Vec2 {
        let near: Vec<_> = self
            .map
            .waypoints
            .iter()
            .filter(|w| w.position.dist(from) <= 200.0 && w.position.dist(from) >= 30.0)
            .collect();
        near.choose(rng).map(|w| w.position).unwrap_or(from)
    }

    fn draw_actor(&self, rng: &mut impl Rng, nav: NavMethod) -> Option<ActorSpec> {
        let a = self.anchor(rng);
        let normal = Vec2::from_heading(a.heading).perp();
        let kind = match nav {
            NavMethod::Autopilot | NavMethod::Maneuver => ActorKind::Vehicle,
            _ => {
                if rng.random_bool(0.5) {
                    ActorKind::Vehicle
                } else {
                    ActorKind::Pedestrian
                }
            }
        };
        let (initial, destination, target_speed, maneuvers) = match nav {
            NavMethod::Autopilot => {
                let pose = self.lane_pose(rng, a.position, 30.0)?;
                let dest = self.far_waypoint(rng, pose.position);
                (pose, dest, self.speed(rng, kind, 2.0), Vec::new())
            }
            NavMethod::Maneuver => {
                let pose = self.lane_pose(rng, a.position, 20.0)?;
                let dest = pose.position + Vec2::from_heading(pose.heading) * 50.0;
                (pose, dest, self.speed(rng, kind, 2.0), self.maneuvers(rng))
            }
            NavMethod::Linear => {
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let start = a.position
                    + normal * (side * uniform(rng, 3.0, 20.0))
                    + Vec2::from_heading(a.heading) * sym(rng, 5.0);
                let dest = if rng.random_bool(0.7) {
                    a.position - normal * (side * uniform(rng, 3.0, 20.0))
                        + Vec2::from_heading(a.heading) * sym(rng, 10.0)
                } else {
                    self.anchor(rng).position + normal * sym(rng, 3.0)
                };
                let heading = (dest - start).angle();
                (
                    Pose::new(start.x, start.y, heading),
                    dest,
                    self.speed(rng, kind, 0.5),
                    Vec::new(),
                )
            }
            NavMethod::Immobile => {
                let p = a.position + normal * sym(rng, 5.0);
                let heading = wrap_angle(a.heading + sym(rng, std::f64::consts::PI));
                (Pose::new(p.x, p.y, heading), p, 0.0, Vec::new())
            }
        };
        Some(ActorSpec {
            kind,
            nav,
            initial,
            destination,
            target_speed,
            maneuvers,
            half_extents: kind.half_extents(),
        })
    }

    fn draw_puddle(&self, rng: &mut impl Rng) -> PuddleSpec {
        let a = self.anchor(rng);
        let normal = Vec2::from_heading(a.heading).perp();
        PuddleSpec {
            center: a.position + normal * sym(rng, 3.0),
            half_extents: Vec2::new(uniform(rng, 2.0, 8.0), uniform(rng, 1.5, 5.0)),
            heading: wrap_angle(a.heading + sym(rng, 0.8)),
            friction: self.draw_friction(rng),
        }
    }

    fn draw_friction(&self, rng: &mut impl Rng) -> f64 {
        uniform(rng, 0.05, self.cfg.dry_friction - 0.05)
    }

    fn puddle_ok(&self, p: &PuddleSpec) -> bool {
        p.center.dist(self.origin) <= INTERACTION_RANGE
            && self.map.on_road(p.center)
            && p.friction > 0.0
            && p.friction < self.cfg.dry_friction
    }

    /// Accepts the candidate scenario or records which rule rejected it.
    fn accept(&mut self, s: &Scenario) -> bool {
        if check_temporal(s).is_err() {
            self.stats.retries_temporal += 1;
            return false;
        }
        let placed = s.actors.iter().all(|a| {
            let lane_bound = matches!(a.nav, NavMethod::Autopilot | NavMethod::Maneuver);
            a.initial.position.dist(self.origin) <= INTERACTION_RANGE
                && (!lane_bound || self.map.on_road(a.initial.position))
        });
        if !placed || check_spatial(s, self.map).is_err() {
            self.stats.retries_spatial += 1;
            return false;
        }
        true
    }

    fn pick_nav(&self, rng: &mut impl Rng, strategy: Strategy) -> Option<NavMethod> {
        match strategy {
            Strategy::Man => Some(NavMethod::Maneuver),
            Strategy::Con => Some(NavMethod::Autopilot),
            Strategy::Ent => Some(if rng.random_bool(0.5) {
                NavMethod::Linear
            } else {
                NavMethod::Immobile
            }),
            Strategy::Ins => None,
            Strategy::All => unreachable!("resolved before drawing"),
        }
    }

    /// Resolves `all` to one concrete strategy.
    pub fn resolve(strategy: Strategy, rng: &mut impl Rng) -> Strategy {
        match strategy {
            Strategy::All => *Strategy::CONCRETE.choose(rng).expect("non-empty"),
            s => s,
        }
    }

    /// Adds one new component allowed by `strategy`.
    pub fn generate(
        &mut self,
        s: &Scenario,
        strategy: Strategy,
        rng: &mut impl Rng,
    ) -> Result<Scenario, MutationError> {
        let strategy = Self::resolve(strategy, rng);
        for _ in 0..self.cfg.retry_cap {
            let mut out = s.clone();
            match self.pick_nav(rng, strategy) {
                Some(nav) => {
                    let Some(actor) = self.draw_actor(rng, nav) else {
                        self.stats.retries_spatial += 1;
                        continue;
                    };
                    out.actors.push(actor);
                    out.newest = Some(ComponentRef::Actor(out.actors.len() - 1));
                }
                None => {
                    let p = self.draw_puddle(rng);
                    if !self.puddle_ok(&p) {
                        self.stats.retries_spatial += 1;
                        continue;
                    }
                    out.puddles.push(p);
                    out.newest = Some(ComponentRef::Puddle(out.puddles.len() - 1));
                }
            }
            if self.accept(&out) {
                self.stats.components_added += 1;
                return Ok(out);
            }
        }
        Err(MutationError::RetryExhausted(self.cfg.retry_cap))
    }

    fn perturb_actor(&self, a: &ActorSpec, rng: &mut impl Rng) -> Option<ActorSpec> {
        let step = self.cfg.position_step;
        let mut b = a.clone();
        let moved = a.initial.position + Vec2::new(sym(rng, step), sym(rng, step));
        match a.nav {
            NavMethod::Autopilot | NavMethod::Maneuver => {
                let lm = self.map.nearest_lane(moved, Some(a.initial.heading), 3.0)?;
                let lane = self.map.lane(lm.lane);
                b.initial = lane.centerline.pose_at(lm.projection.s);
            }
            NavMethod::Linear | NavMethod::Immobile => {
                b.initial = Pose::new(
                    moved.x,
                    moved.y,
                    wrap_angle(a.initial.heading + sym(rng, 0.5)),
                );
            }
        }
        match a.nav {
            NavMethod::Immobile => b.destination = b.initial.position,
            NavMethod::Maneuver => {
                b.destination = b.initial.position + Vec2::from_heading(b.initial.heading) * 50.0;
                b.maneuvers = self.maneuvers(rng);
            }
            NavMethod::Linear => {
                b.destination = a.destination + Vec2::new(sym(rng, step), sym(rng, step));
                b.initial.heading = (b.destination - b.initial.position).angle();
            }
            NavMethod::Autopilot => b.destination = self.far_waypoint(rng, b.initial.position),
        }
        if a.nav != NavMethod::Immobile {
            let f = 1.0 + sym(rng, self.cfg.speed_step);
            b.target_speed = (a.target_speed * f).clamp(0.1, a.kind.max_speed());
        }
        Some(b)
    }

    fn perturb_puddle(&self, p: &PuddleSpec, rng: &mut impl Rng) -> PuddleSpec {
        let step = self.cfg.position_step;
        let scale =
            |v: f64, rng: &mut _| (v * (1.0 + sym(rng, self.cfg.speed_step))).clamp(0.5, 12.0);
        PuddleSpec {
            center: p.center + Vec2::new(sym(rng, step), sym(rng, step)),
            half_extents: Vec2::new(scale(p.half_extents.x, rng), scale(p.half_extents.y, rng)),
            heading: wrap_angle(p.heading + sym(rng, 0.3)),
            friction: self.draw_friction(rng),
        }
    }

    fn perturb_weather(&self, s: &mut Scenario, rng: &mut impl Rng) {
        let i = rng.random_range(0..8);
        let (lo, hi) = crate::scenario::Weather::range(i);
        let old = s.weather.get(i);
        let mut v = old;
        for _ in 0..8 {
            v = old + sym(rng, self.cfg.weather_step) * (hi - lo);
            v = if i == 6 {
                v.rem_euclid(hi)
            } else {
                v.clamp(lo, hi)
            };
            if v != old {
                break;
            }
        }
        if v == old {
            v = if old > (lo + hi) / 2.0 {
                old - 0.1 * (hi - lo)
            } else {
                old + 0.1 * (hi - lo)
            };
        }
        s.weather.set(i, v);
    }

    /// Perturbs the newest component; never changes the component count.
    pub fn mutate(
        &mut self,
        s: &Scenario,
        strategy: Strategy,
        rng: &mut impl Rng,
    ) -> Result<Scenario, MutationError> {
        let weather = strategy == Strategy::All
            && (s.newest.is_none() || rng.random_bool(self.cfg.weather_share));
        if weather {
            let mut out = s.clone();
            self.perturb_weather(&mut out, rng);
            out.rng_seed = rng.random();
            return Ok(out);
        }
        let Some(target) = s.newest else {
            return Err(MutationError::NothingToMutate(strategy.tag().into()));
        };
        for _ in 0..self.cfg.retry_cap {
            let mut out = s.clone();
            match target {
                ComponentRef::Actor(i) => {
                    let Some(b) = self.perturb_actor(&s.actors[i], rng) else {
                        self.stats.retries_spatial += 1;
                        continue;
                    };
                    out.actors[i] = b;
                }
                ComponentRef::Puddle(i) => {
                    let p = self.perturb_puddle(&s.puddles[i], rng);
                    if !self.puddle_ok(&p) {
                        self.stats.retries_spatial += 1;
                        continue;
                    }
                    out.puddles[i] = p;
                }
            }
            if self.accept(&out) {
                out.rng_seed = rng.random();
                return Ok(out);
            }
        }
        Err(MutationError::RetryExhausted(self.cfg.retry_cap))
    }
}
