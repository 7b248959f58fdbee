use super::actors::{ActorRuntime, Body, StepContext};
use super::config::SimConfig;
use super::dynamics::{effective_friction, step_ego, AxleFriction};
use super::lanes::LaneTracker;
use super::{
    ControlCommand, Entity, LaneContext, LightObservation, ObjectKind, Observation, PerceivedObject,
};
use crate::geometry::{Obb, Pose, Vec2};
use crate::scenario::map::LightPhase;
use crate::scenario::{ActorKind, LaneMap, Scenario, VehicleState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::sync::Arc;

/// One running episode's world. Single-threaded; episodes run in parallel
/// each own a world.
pub struct World {
    map: Arc<LaneMap>,
    scenario: Scenario,
    cfg: SimConfig,
    ego: VehicleState,
    axle: AxleFriction,
    actors: Vec<ActorRuntime>,
    rng: ChaCha8Rng,
    tracker: LaneTracker,
}

impl World {
    pub fn new(scenario: &Scenario, map: Arc<LaneMap>, cfg: SimConfig) -> Self {
        let actors = scenario
            .actors
            .iter()
            .enumerate()
            .map(|(i, spec)| ActorRuntime::new(i, spec, &map))
            .collect();
        let ego = VehicleState {
            position: scenario.mission.initial.position,
            heading: scenario.mission.initial.heading,
            ..VehicleState::default()
        };
        let mut w = Self {
            axle: AxleFriction::default(),
            map,
            cfg,
            ego,
            actors,
            rng: ChaCha8Rng::seed_from_u64(scenario.rng_seed),
            tracker: LaneTracker::default(),
            scenario: scenario.clone(),
        };
        let mu = w.friction_at(w.ego.position);
        w.axle = AxleFriction {
            front: mu,
            rear: mu,
        };
        let pose = w.ego.pose();
        w.tracker.update(&w.map, &pose);
        w
    }

    pub fn map(&self) -> &Arc<LaneMap> {
        &self.map
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego
    }

    pub fn ego_footprint(&self) -> Obb {
        Obb::from_pose(&self.ego.pose(), self.cfg.vehicle.half_extents)
    }

    pub fn actors(&self) -> &[ActorRuntime] {
        &self.actors
    }

    pub fn axle_friction(&self) -> AxleFriction {
        self.axle
    }

    pub fn sim_time(&self) -> f64 {
        self.ego.sim_time
    }

    pub fn light_phases(&self) -> Vec<LightPhase> {
        let t = self.sim_time();
        self.map
            .traffic_lights
            .iter()
            .map(|l| l.cycle.phase_at(t))
            .collect()
    }

    pub fn friction_at(&self, p: Vec2) -> f64 {
        effective_friction(p, &self.scenario.puddles, &self.scenario.weather, &self.cfg)
    }

    pub fn effective_sensor_range(&self) -> f64 {
        self.cfg.sensor_range * (1.0 - self.cfg.k_fog * self.scenario.weather.fog).max(0.0)
    }

    /// Sensor snapshot for the driving stack. Rain perturbs perceived actor
    /// positions with bounded Gaussian noise drawn from the scenario seed.
    pub fn observe(&mut self) -> Observation {
        let range = self.effective_sensor_range();
        let ego_pos = self.ego.position;
        let sigma = self.cfg.k_rain * self.scenario.weather.rain;
        let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("positive sigma"));
        let mut objects = Vec::new();
        for a in &self.actors {
            if a.pose.position.dist(ego_pos) > range {
                continue;
            }
            let mut pose = a.pose;
            if let Some(n) = &noise {
                let dx: f64 = n.sample(&mut self.rng);
                let dy: f64 = n.sample(&mut self.rng);
                pose.position += Vec2::new(
                    dx.clamp(-3.0 * sigma, 3.0 * sigma),
                    dy.clamp(-3.0 * sigma, 3.0 * sigma),
                );
            }
            objects.push(PerceivedObject {
                entity: Entity::Actor(a.id),
                kind: match a.kind {
                    ActorKind::Vehicle => ObjectKind::Vehicle,
                    ActorKind::Pedestrian => ObjectKind::Pedestrian,
                },
                pose,
                half_extents: a.half_extents,
                velocity: a.velocity,
            });
        }
        for (i, o) in self.map.static_obstacles.iter().enumerate() {
            if o.center.dist(ego_pos) - o.bounding_radius() > range {
                continue;
            }
            objects.push(PerceivedObject {
                entity: Entity::Static(i),
                kind: ObjectKind::Static,
                pose: Pose {
                    position: o.center,
                    heading: o.heading,
                },
                half_extents: o.half_extents,
                velocity: Vec2::ZERO,
            });
        }

        let lane = self.tracker.current().map(|id| {
            let l = self.map.lane(id);
            let proj = l.project(ego_pos);
            LaneContext {
                lane: id,
                heading: l.centerline.heading_at(proj.s),
                s: proj.s,
                lateral: proj.lateral,
            }
        });
        let t = self.sim_time();
        let light = lane.and_then(|ctx| {
            let l = self.map.lane(ctx.lane);
            self.map
                .lights_for_lane(ctx.lane)
                .next()
                .map(|light| LightObservation {
                    light: light.id,
                    phase: light.cycle.phase_at(t),
                    distance_to_stop_line: l.project(light.stop_line.midpoint()).s - ctx.s,
                })
        });
        Observation {
            ego: self.ego,
            objects,
            light,
            lane,
            sim_time: t,
        }
    }

    /// Advances the world by one frame: actors react to the state at the
    /// start of the frame, then the ego integrates `cmd`.
    pub fn step(&mut self, cmd: &ControlCommand) -> &VehicleState {
        let phases = self.light_phases();
        let mut bodies = Vec::with_capacity(self.actors.len() + 1);
        bodies.push(Body {
            id: None,
            footprint: self.ego_footprint(),
        });
        bodies.extend(self.actors.iter().map(|a| Body {
            id: Some(a.id),
            footprint: a.footprint(),
        }));
        let ctx = StepContext {
            map: &self.map,
            dt: self.cfg.dt,
            light_phases: &phases,
            bodies: &bodies,
        };
        for a in &mut self.actors {
            a.step(&ctx);
        }
        let puddles = &self.scenario.puddles;
        let weather = &self.scenario.weather;
        let cfg = &self.cfg;
        let friction = |p: Vec2| effective_friction(p, puddles, weather, cfg);
        let (next, axle) = step_ego(&self.ego, cmd, cfg, &friction);
        self.ego = next;
        self.axle = axle;
        let pose = self.ego.pose();
        self.tracker.update(&self.map, &pose);
        &self.ego
    }
}
