//! Scenario domain types and their canonical serialization.
//!
//! A [`Scenario`] is the unit the fuzzer mutates: a map reference, a
//! mission for the ego vehicle, the actors and puddles placed around it,
//! the weather, and the seed of the episode's random stream.

pub mod map;
pub mod trace;
pub mod validate;

use crate::error::ScenarioError;
use crate::geometry::{Obb, Pose, Vec2};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub use map::{load_map, LaneId, LaneMap, RoadComponent};
pub use validate::{validate_scenario, Violation};

pub const MPH: f64 = 0.44704;
/// Temporal constraint on actor vehicles (20 mph).
pub const VEHICLE_MAX_SPEED: f64 = 20.0 * MPH;
/// Temporal constraint on pedestrians (6 mph).
pub const PEDESTRIAN_MAX_SPEED: f64 = 6.0 * MPH;
/// Minimum pairwise spacing of initial actor positions, meters.
pub const D_MIN: f64 = 5.0;
/// Actors spawn within this radius of the mission start, meters.
pub const INTERACTION_RANGE: f64 = 150.0;
pub const DEFAULT_GOAL_RADIUS: f64 = 3.0;
pub const DEFAULT_TIME_BUDGET: f64 = 180.0;
pub const DEFAULT_DRY_FRICTION: f64 = 0.9;

/// Ego footprint half extents (length, width), meters.
pub const EGO_HALF_EXTENTS: Vec2 = Vec2::new(2.35, 1.0);
pub const VEHICLE_HALF_EXTENTS: Vec2 = Vec2::new(2.25, 0.95);
pub const PEDESTRIAN_HALF_EXTENTS: Vec2 = Vec2::new(0.3, 0.3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Mission {
    pub initial: Pose,
    pub goal: Pose,
    pub goal_radius: f64,
    pub time_budget: f64,
}

impl Mission {
    pub fn new(initial: Pose, goal: Pose) -> Self {
        Self {
            initial,
            goal,
            goal_radius: DEFAULT_GOAL_RADIUS,
            time_budget: DEFAULT_TIME_BUDGET,
        }
    }

    pub fn ego_footprint(&self) -> Obb {
        Obb::from_pose(&self.initial, EGO_HALF_EXTENTS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Vehicle,
    Pedestrian,
}

impl ActorKind {
    pub fn max_speed(self) -> f64 {
        match self {
            ActorKind::Vehicle => VEHICLE_MAX_SPEED,
            ActorKind::Pedestrian => PEDESTRIAN_MAX_SPEED,
        }
    }

    pub fn half_extents(self) -> Vec2 {
        match self {
            ActorKind::Vehicle => VEHICLE_HALF_EXTENTS,
            ActorKind::Pedestrian => PEDESTRIAN_HALF_EXTENTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum NavMethod {
    Autopilot,
    Maneuver,
    Linear,
    Immobile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverAction {
    Forward,
    LaneLeft,
    LaneRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Maneuver {
    pub action: ManeuverAction,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ActorSpec {
    pub kind: ActorKind,
    pub nav: NavMethod,
    pub initial: Pose,
    pub destination: Vec2,
    pub target_speed: f64,
    #[serde(default)]
    pub maneuvers: Vec<Maneuver>,
    pub half_extents: Vec2,
}

impl ActorSpec {
    pub fn footprint(&self) -> Obb {
        Obb::from_pose(&self.initial, self.half_extents)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PuddleSpec {
    pub center: Vec2,
    pub half_extents: Vec2,
    pub heading: f64,
    pub friction: f64,
}

impl PuddleSpec {
    pub fn area(&self) -> Obb {
        Obb::new(self.center, self.half_extents, self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Weather {
    pub rain: f64,
    pub cloud: f64,
    pub wind: f64,
    pub fog: f64,
    pub wetness: f64,
    pub ground_water: f64,
    pub sun_azimuth: f64,
    pub sun_altitude: f64,
}

impl Weather {
    pub const FIELDS: [&'static str; 8] = [
        "rain",
        "cloud",
        "wind",
        "fog",
        "wetness",
        "ground_water",
        "sun_azimuth",
        "sun_altitude",
    ];

    pub fn sunny() -> Self {
        Self {
            rain: 0.0,
            cloud: 0.0,
            wind: 0.0,
            fog: 0.0,
            wetness: 0.0,
            ground_water: 0.0,
            sun_azimuth: 0.0,
            sun_altitude: std::f64::consts::FRAC_PI_4,
        }
    }

    /// Declared range of field `i` (half-open for azimuth).
    pub fn range(i: usize) -> (f64, f64) {
        match i {
            6 => (0.0, 2.0 * std::f64::consts::PI),
            7 => (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            _ => (0.0, 1.0),
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match i {
            0 => self.rain,
            1 => self.cloud,
            2 => self.wind,
            3 => self.fog,
            4 => self.wetness,
            5 => self.ground_water,
            6 => self.sun_azimuth,
            7 => self.sun_altitude,
            _ => panic!("weather field index {i} out of range"),
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        let slot = match i {
            0 => &mut self.rain,
            1 => &mut self.cloud,
            2 => &mut self.wind,
            3 => &mut self.fog,
            4 => &mut self.wetness,
            5 => &mut self.ground_water,
            6 => &mut self.sun_azimuth,
            7 => &mut self.sun_altitude,
            _ => panic!("weather field index {i} out of range"),
        };
        *slot = v;
    }

    pub fn in_range(&self) -> Option<&'static str> {
        (0..8)
            .find(|&i| {
                let (lo, hi) = Self::range(i);
                let v = self.get(i);
                let ok = if i == 6 {
                    v >= lo && v < hi
                } else {
                    v >= lo && v <= hi
                };
                !ok
            })
            .map(|i| Self::FIELDS[i])
    }
}

impl Default for Weather {
    fn default() -> Self {
        Self::sunny()
    }
}

/// Which component the mutation engine generated last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", tag = "type", content = "index")]
pub enum ComponentRef {
    Actor(usize),
    Puddle(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Scenario {
    pub map_id: String,
    pub mission: Mission,
    pub actors: Vec<ActorSpec>,
    pub puddles: Vec<PuddleSpec>,
    pub weather: Weather,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newest: Option<ComponentRef>,
}

impl Scenario {
    /// Clean-slate scenario: no actors, no puddles, sunny weather.
    pub fn clean(map_id: impl Into<String>, mission: Mission, rng_seed: u64) -> Self {
        Self {
            map_id: map_id.into(),
            mission,
            actors: Vec::new(),
            puddles: Vec::new(),
            weather: Weather::sunny(),
            rng_seed,
            newest: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_json(self).into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ScenarioError> {
        serde_json::from_slice(bytes).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn digest(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_bytes(&bytes)
    }
}

/// Canonical JSON: object keys sorted, compact, floats in shortest
/// round-trip form.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("domain types serialize to JSON");
    serde_json::to_string(&v).expect("JSON values serialize")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Per-frame physical state of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    /// Longitudinal speed, m/s.
    pub v_x: f64,
    /// Lateral speed, m/s.
    pub v_y: f64,
    /// Yaw rate, rad/s.
    pub yaw_rate: f64,
    /// Longitudinal acceleration, m/s^2.
    pub a_x: f64,
    /// Lateral acceleration in g.
    pub a_y_g: f64,
    /// Steering wheel angle in degrees, positive counter-clockwise.
    pub swa_deg: f64,
    pub throttle: f64,
    pub brake: f64,
    pub frame_index: u64,
    pub sim_time: f64,
}

impl VehicleState {
    pub fn yaw_rate_deg(&self) -> f64 {
        self.yaw_rate.to_degrees()
    }

    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }

    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            heading: self.heading,
        }
    }
}
