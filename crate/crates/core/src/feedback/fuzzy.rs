//! Fuzzy oversteer/understeer detection from steering, speed, yaw rate and
//! lateral acceleration.

use crate::scenario::VehicleState;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct FuzzyConfig {
    /// Fast and slow EMA time constants, s.
    pub tau_fast: f64,
    pub tau_slow: f64,
    /// Floor on the expected yaw rate / lateral acceleration in ratios.
    pub epsilon: f64,
    /// Indicator value where membership in "high" starts and saturates.
    pub usi_high: (f64, f64),
    pub osi_high: (f64, f64),
    /// dSWA (deg) fully "low" below the first value, not at all above the second.
    pub dswa_low: (f64, f64),
    /// Minimum |SWA| for the understeer rule, deg.
    pub understeer_min_swa: f64,
    /// Minimum V_x for either rule, km/h.
    pub min_speed_kmh: f64,
    pub steer_ratio: f64,
    pub wheelbase: f64,
    pub gravity: f64,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            tau_fast: 0.1,
            tau_slow: 1.0,
            epsilon: 0.05,
            usi_high: (3.0, 6.0),
            osi_high: (3.0, 6.0),
            dswa_low: (5.0, 15.0),
            understeer_min_swa: 10.0,
            min_speed_kmh: 5.0,
            steer_ratio: 15.0,
            wheelbase: 2.7,
            gravity: 9.8,
        }
    }
}

/// Per-frame detector signals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct FuzzySignals {
    pub omega_exp: f64,
    pub usi: f64,
    pub osi: f64,
    pub fd: f64,
    pub dswa: f64,
    pub day: f64,
    pub k_us: f64,
    pub k_os: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Ema {
    value: Option<f64>,
}

impl Ema {
    fn update(&mut self, x: f64, alpha: f64) -> f64 {
        let v = match self.value {
            Some(v) => v + alpha * (x - v),
            None => x,
        };
        self.value = Some(v);
        v
    }
}

/// Rising ramp membership: 0 at `lo`, 1 at `hi`.
pub fn ramp_up(x: f64, (lo, hi): (f64, f64)) -> f64 {
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Area of a unit-base, unit-height triangle clipped at height `w`.
fn clipped_area(w: f64) -> f64 {
    w - w * w / 2.0
}

/// Centroid of the aggregated output when the rule for "high" fires with
/// strength `w_high` and "low" with `1 - w_high`. The output sets are
/// triangles centered at 0 and 1 with half-width 0.5, so they never
/// overlap and the centroid has a closed form.
pub fn defuzzify(w_high: f64) -> f64 {
    let w_high = w_high.clamp(0.0, 1.0);
    if w_high == 0.0 {
        return 0.0;
    }
    let a_h = clipped_area(w_high);
    let a_l = clipped_area(1.0 - w_high);
    a_h / (a_h + a_l)
}

/// Stateful detector; feed it consecutive frames.
#[derive(Debug, Clone)]
pub struct FuzzyDetector {
    cfg: FuzzyConfig,
    dt: f64,
    swa_fast: Ema,
    swa_slow: Ema,
    ay_fast: Ema,
    ay_slow: Ema,
    omega_fast: Ema,
}

impl FuzzyDetector {
    pub fn new(cfg: FuzzyConfig, dt: f64) -> Self {
        Self {
            cfg,
            dt,
            swa_fast: Ema::default(),
            swa_slow: Ema::default(),
            ay_fast: Ema::default(),
            ay_slow: Ema::default(),
            omega_fast: Ema::default(),
        }
    }

    fn alpha(&self, tau: f64) -> f64 {
        1.0 - (-self.dt / tau).exp()
    }

    pub fn update(&mut self, s: &VehicleState) -> FuzzySignals {
        let c = self.cfg;
        let (af, asl) = (self.alpha(c.tau_fast), self.alpha(c.tau_slow));
        let swa_f = self.swa_fast.update(s.swa_deg, af);
        let swa_s = self.swa_slow.update(s.swa_deg, asl);
        let ay_f = self.ay_fast.update(s.a_y_g, af);
        let ay_s = self.ay_slow.update(s.a_y_g, asl);
        let dswa = (swa_f - swa_s).abs();
        let day = (ay_f - ay_s).abs();

        let delta = (swa_f / c.steer_ratio).to_radians();
        let omega_exp = self
            .omega_fast
            .update(s.v_x * delta.tan() / c.wheelbase, af);
        let r = s.yaw_rate;
        // Indicators are measured in the direction the driver steers; with
        // the wheel centered any yaw counts as surplus.
        let dir = if omega_exp.abs() > 1e-3 {
            omega_exp.signum()
        } else {
            r.signum()
        };
        let expected = (omega_exp * dir).max(c.epsilon);
        let usi = (10.0 * (omega_exp - r) * dir / expected).clamp(0.0, 10.0);
        let osi = (10.0 * (r - omega_exp) * dir / expected).clamp(0.0, 10.0);
        let ay_exp = s.v_x * omega_exp / c.gravity;
        let fd = ((ay_exp - s.a_y_g) * dir / (ay_exp * dir).max(c.epsilon)).clamp(0.0, 0.1);

        let speed_gate = s.v_x * 3.6 >= c.min_speed_kmh;
        let w_us = if speed_gate && s.swa_deg.abs() >= c.understeer_min_swa {
            ramp_up(usi, c.usi_high)
        } else {
            0.0
        };
        let dswa_low = 1.0 - ramp_up(dswa, c.dswa_low);
        let w_os = if speed_gate {
            ramp_up(osi, c.osi_high).min(dswa_low)
        } else {
            0.0
        };
        FuzzySignals {
            omega_exp,
            usi,
            osi,
            fd,
            dswa,
            day,
            k_us: defuzzify(w_us),
            k_os: defuzzify(w_os),
        }
    }
}
