//! The system-under-test contract and the reference driving stack.
//!
//! The reference stack is a global lane-graph planner, a rule-based local
//! planner and a pure-pursuit/PID controller. Fault switches break it on
//! purpose for oracle validation; planted defects reproduce classic
//! planning bugs for the fuzzing experiments. The defect catalog lives in
//! `docs/defects.md`.

pub mod control;
pub mod local;
pub mod planner;
mod reference;

use crate::error::PlanError;
use crate::scenario::{LaneMap, Mission};
use crate::sim::{ControlCommand, Observation};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub use planner::{plan_global, Route, RoutePoint};
pub use reference::ReferenceSut;

/// What every driving stack under test implements.
pub trait Sut: Send {
    fn init(&mut self, map: Arc<LaneMap>, mission: &Mission) -> Result<(), PlanError>;
    fn decide(&mut self, obs: &Observation) -> ControlCommand;
    fn reset(&mut self);
    /// Whether the stack must be stepped in lockstep with the simulator.
    fn needs_lockstep(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    DefectFree,
    Defective,
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "defect-free" => Ok(Profile::DefectFree),
            "defective" => Ok(Profile::Defective),
            other => Err(format!(
                "unknown profile {other:?} (expected defect-free or defective)"
            )),
        }
    }
}

/// Planted defects, each individually switchable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct Defects {
    /// D1: obstacle distance measured center to center, ego treated as a point.
    pub point_vehicle: bool,
    /// D2: obstacles only count when their center is on the ego's lane.
    pub same_lane_only: bool,
    /// D3: no prediction of objects moving into the path from the side or rear.
    pub no_cut_in_prediction: bool,
    /// D4: pure-pursuit minimum look-ahead far too long.
    pub long_lookahead: bool,
}

impl Defects {
    pub const NONE: Defects = Defects {
        point_vehicle: false,
        same_lane_only: false,
        no_cut_in_prediction: false,
        long_lookahead: false,
    };
    pub const ALL: Defects = Defects {
        point_vehicle: true,
        same_lane_only: true,
        no_cut_in_prediction: true,
        long_lookahead: true,
    };

    pub fn for_profile(p: Profile) -> Self {
        match p {
            Profile::DefectFree => Self::NONE,
            Profile::Defective => Self::ALL,
        }
    }

    /// Catalog tag (`D1`..`D4`) to switch.
    pub fn only(tag: &str) -> Option<Self> {
        let mut d = Self::NONE;
        match tag {
            "D1" => d.point_vehicle = true,
            "D2" => d.same_lane_only = true,
            "D3" => d.no_cut_in_prediction = true,
            "D4" => d.long_lookahead = true,
            _ => return None,
        }
        Some(d)
    }

    pub fn any(&self) -> bool {
        *self != Self::NONE
    }
}

/// Injected faults used to validate the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct FaultSwitches {
    pub force_steer_left: bool,
    pub disable_control: bool,
    pub target_speed_above_limit: bool,
    pub disable_traffic_light_detection: bool,
    /// Ignore perceived obstacles entirely.
    pub disable_obstacle_stop: bool,
}

/// Planner and controller tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct SutParams {
    pub cruise_speed: f64,
    /// Target stays this far below the lane limit to absorb overshoot, m/s.
    pub limit_margin: f64,
    /// Lateral acceleration allowed in curves, m/s^2.
    pub max_lateral_accel: f64,
    pub comfort_decel: f64,
    /// Deceleration assumed available for stopping at obstacles.
    pub obstacle_decel: f64,
    /// Bumper-to-obstacle distance to keep when stopped, m.
    pub stop_margin: f64,
    /// Clearance added to the ego half width when checking the path, m.
    pub corridor_margin: f64,
    pub prediction_horizon: f64,
    pub lookahead_min: f64,
    pub lookahead_min_defective: f64,
    /// Look-ahead gain on speed, s.
    pub lookahead_gain: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Brake per m/s of overspeed.
    pub kb: f64,
}

impl Default for SutParams {
    fn default() -> Self {
        Self {
            cruise_speed: 25.0,
            limit_margin: 0.5,
            max_lateral_accel: 2.5,
            comfort_decel: 2.5,
            obstacle_decel: 5.0,
            stop_margin: 4.0,
            corridor_margin: 0.3,
            prediction_horizon: 3.0,
            lookahead_min: 4.0,
            lookahead_min_defective: 12.0,
            lookahead_gain: 0.5,
            kp: 0.4,
            ki: 0.08,
            kd: 0.0,
            kb: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct SutConfig {
    pub profile: Profile,
    pub defects: Defects,
    pub faults: FaultSwitches,
    pub params: SutParams,
}

impl SutConfig {
    pub fn defect_free() -> Self {
        Self::default()
    }

    pub fn defective() -> Self {
        Self::with_profile(Profile::Defective)
    }

    pub fn with_profile(profile: Profile) -> Self {
        Self {
            profile,
            defects: Defects::for_profile(profile),
            ..Self::default()
        }
    }

    pub fn with_defects(defects: Defects) -> Self {
        Self {
            profile: if defects.any() {
                Profile::Defective
            } else {
                Profile::DefectFree
            },
            defects,
            ..Self::default()
        }
    }

    pub fn with_faults(mut self, faults: FaultSwitches) -> Self {
        self.faults = faults;
        self
    }

    pub fn build(&self) -> ReferenceSut {
        ReferenceSut::new(*self)
    }
}
