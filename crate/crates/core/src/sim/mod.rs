//! Deterministic fixed-step 2D world.

pub mod actors;
pub mod config;
pub mod dynamics;
pub mod episode;
pub mod lanes;
pub mod world;

use crate::geometry::{Pose, Vec2};
use crate::scenario::map::LightPhase;
use crate::scenario::{LaneId, VehicleState};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use config::{SimConfig, VehicleParams};
pub use dynamics::effective_friction;
pub use episode::{run_episode, run_episode_with, Episode, EpisodeSetup, TerminalStatus, Timing};
pub use world::World;

/// Actuation request from the driving stack.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct ControlCommand {
    /// Normalized steering, positive to the right; maps linearly to
    /// `-steer * swa_max` on the wheel.
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

impl ControlCommand {
    pub const ZERO: ControlCommand = ControlCommand {
        steer: 0.0,
        throttle: 0.0,
        brake: 0.0,
    };

    /// Saturated copy; NaN components become zero.
    pub fn clamped(&self) -> Self {
        let fix = |v: f64, lo: f64, hi: f64| if v.is_nan() { 0.0 } else { v.clamp(lo, hi) };
        Self {
            steer: fix(self.steer, -1.0, 1.0),
            throttle: fix(self.throttle, 0.0, 1.0),
            brake: fix(self.brake, 0.0, 1.0),
        }
    }
}

/// Something the ego can collide with.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case", tag = "type", content = "index")]
pub enum Entity {
    Actor(usize),
    Static(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Vehicle,
    Pedestrian,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PerceivedObject {
    pub entity: Entity,
    pub kind: ObjectKind,
    pub pose: Pose,
    pub half_extents: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LightObservation {
    pub light: usize,
    pub phase: LightPhase,
    /// Distance along the lane to the stop line; negative once passed.
    pub distance_to_stop_line: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LaneContext {
    pub lane: LaneId,
    pub heading: f64,
    /// Arc length of the ego along the lane.
    pub s: f64,
    pub lateral: f64,
}

/// What the driving stack receives each frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Observation {
    pub ego: VehicleState,
    pub objects: Vec<PerceivedObject>,
    pub light: Option<LightObservation>,
    pub lane: Option<LaneContext>,
    pub sim_time: f64,
}
