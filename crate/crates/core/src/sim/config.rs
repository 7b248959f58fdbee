use crate::geometry::Vec2;
use crate::scenario::{DEFAULT_DRY_FRICTION, EGO_HALF_EXTENTS};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct VehicleParams {
    pub mass: f64,
    pub wheelbase: f64,
    /// Distance from the center of gravity to the front axle.
    pub cg_to_front: f64,
    pub cg_height: f64,
    pub yaw_inertia: f64,
    /// Cornering stiffness per axle, N/rad.
    pub cornering_front: f64,
    pub cornering_rear: f64,
    /// Rear-wheel drive force at full throttle, N.
    pub max_engine_force: f64,
    pub max_brake_force: f64,
    pub brake_front_share: f64,
    pub steer_ratio: f64,
    pub swa_max_deg: f64,
    /// Steering wheel slew limit, deg/s.
    pub swa_rate_deg: f64,
    pub rolling_resistance: f64,
    /// Aerodynamic drag, N/(m/s)^2.
    pub drag: f64,
    pub half_extents: Vec2,
}

impl VehicleParams {
    pub fn cg_to_rear(&self) -> f64 {
        self.wheelbase - self.cg_to_front
    }

    pub fn max_road_wheel_angle(&self) -> f64 {
        (self.swa_max_deg / self.steer_ratio).to_radians()
    }
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            wheelbase: 2.7,
            cg_to_front: 1.2,
            cg_height: 0.5,
            yaw_inertia: 2250.0,
            cornering_front: 80_000.0,
            cornering_rear: 80_000.0,
            max_engine_force: 6000.0,
            max_brake_force: 12_000.0,
            brake_front_share: 0.6,
            steer_ratio: 15.0,
            swa_max_deg: 540.0,
            swa_rate_deg: 720.0,
            rolling_resistance: 0.015,
            drag: 0.4,
            half_extents: EGO_HALF_EXTENTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    /// Integration substeps per frame.
    pub substeps: u32,
    pub dry_friction: f64,
    pub vehicle: VehicleParams,
    pub sensor_range: f64,
    /// Fraction of sensor range lost at fog = 1.
    pub k_fog: f64,
    /// Position noise standard deviation at rain = 1, meters.
    pub k_rain: f64,
    pub k_wet: f64,
    pub k_ground_water: f64,
    /// Below this speed the ego follows the kinematic model.
    pub kinematic_below: f64,
    /// Above this speed the ego follows the dynamic model; linear blend in between.
    pub dynamic_above: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            substeps: 10,
            dry_friction: DEFAULT_DRY_FRICTION,
            vehicle: VehicleParams::default(),
            sensor_range: 100.0,
            k_fog: 0.5,
            k_rain: 0.5,
            k_wet: 0.3,
            k_ground_water: 0.3,
            kinematic_below: 1.5,
            dynamic_above: 3.0,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<(), String> {
        let v = &self.vehicle;
        let checks = [
            (self.dt > 0.0, "dt must be positive"),
            (self.substeps > 0, "substeps must be positive"),
            (v.wheelbase > 0.0, "wheelbase must be positive"),
            (
                v.cg_to_front > 0.0 && v.cg_to_front < v.wheelbase,
                "cg_to_front must lie inside the wheelbase",
            ),
            (
                v.cornering_front > 0.0 && v.cornering_rear > 0.0,
                "cornering stiffness must be positive",
            ),
            (
                v.mass > 0.0 && v.yaw_inertia > 0.0,
                "mass and inertia must be positive",
            ),
            (self.dry_friction > 0.0, "dry friction must be positive"),
            (
                self.dynamic_above > self.kinematic_below,
                "blend band must be non-empty",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(msg.to_string()),
            None => Ok(()),
        }
    }
}
