//! Driving-quality feedback: counts of reckless-driving events and the
//! closest approach to other actors, folded into one score where lower
//! means worse driving.

pub mod fuzzy;

use crate::geometry::{Obb, Vec2};
use crate::scenario::trace::{ActorFrame, FrameRecord};
use crate::scenario::{Scenario, VehicleState};
use fuzzy::{FuzzyConfig, FuzzyDetector};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct FeedbackConfig {
    pub gravity: f64,
    /// |A_x|/g decision boundary for hard acceleration and braking.
    pub accel_threshold: f64,
    /// Minimum |SWA| for a hard turn, deg.
    pub turn_min_swa: f64,
    /// Minimum |V_y|/|SWA| for a hard turn, (m/s)/deg.
    pub turn_ratio: f64,
    /// Fuzzy output level counted as an event.
    pub fuzzy_threshold: f64,
    /// Distance coefficient.
    pub c: f64,
    /// Lower bound on the distance used in the score, m.
    pub md_floor: f64,
    /// Weights on ha, hb, ht, os, us.
    pub weights: [f64; 5],
    pub fuzzy: FuzzyConfig,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            accel_threshold: 0.6,
            turn_min_swa: 20.0,
            turn_ratio: 0.18,
            fuzzy_threshold: 0.4,
            c: 1.0,
            md_floor: 0.1,
            weights: [1.0; 5],
            fuzzy: FuzzyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum AccelEvent {
    Ha,
    Hb,
}

/// Hard acceleration / braking from A_x alone.
pub fn detect_hard_accel_brake(a_x: f64, cfg: &FeedbackConfig) -> Option<AccelEvent> {
    let k = a_x / cfg.gravity;
    if k >= cfg.accel_threshold {
        Some(AccelEvent::Ha)
    } else if k <= -cfg.accel_threshold {
        Some(AccelEvent::Hb)
    } else {
        None
    }
}

pub fn detect_hard_turn(swa_deg: f64, v_y: f64, cfg: &FeedbackConfig) -> bool {
    let swa = swa_deg.abs();
    swa >= cfg.turn_min_swa && v_y.abs() / swa >= cfg.turn_ratio
}

/// Per-frame feedback signals, logged with each frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct FrameMetrics {
    pub k_ab: f64,
    pub ha: bool,
    pub hb: bool,
    pub ht: bool,
    pub omega_exp: f64,
    pub usi: f64,
    pub osi: f64,
    pub fd: f64,
    pub dswa: f64,
    pub day: f64,
    pub k_us: f64,
    pub k_os: f64,
    pub us: bool,
    pub os: bool,
    /// Footprint distance to the nearest actor this frame.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct QualityScore {
    pub ha: u64,
    pub hb: u64,
    pub ht: u64,
    pub os: u64,
    pub us: u64,
    /// Minimum distance to any actor; `None` when there were no actors.
    pub md: Option<f64>,
    pub c: f64,
    pub score: f64,
}

/// Weighted event count plus the distance deduction, negated.
pub fn score(counts: [u64; 5], md: Option<f64>, c: f64, md_floor: f64, weights: [f64; 5]) -> f64 {
    let events: f64 = counts.iter().zip(weights).map(|(&n, w)| n as f64 * w).sum();
    let distance = match md {
        Some(d) => c / d.max(md_floor),
        None => 0.0,
    };
    -(events + distance)
}

/// Per-episode accumulator.
#[derive(Debug, Clone)]
pub struct FeedbackMonitor {
    cfg: FeedbackConfig,
    ego_half: Vec2,
    actor_half: Vec<Vec2>,
    fuzzy: FuzzyDetector,
    counts: [u64; 5],
    md: Option<f64>,
}

impl FeedbackMonitor {
    pub fn new(scenario: &Scenario, ego_half: Vec2, dt: f64, cfg: FeedbackConfig) -> Self {
        Self {
            cfg,
            ego_half,
            actor_half: scenario.actors.iter().map(|a| a.half_extents).collect(),
            fuzzy: FuzzyDetector::new(cfg.fuzzy, dt),
            counts: [0; 5],
            md: None,
        }
    }

    pub fn observe(&mut self, ego: &VehicleState, actors: &[ActorFrame]) -> FrameMetrics {
        let cfg = &self.cfg;
        let accel = detect_hard_accel_brake(ego.a_x, cfg);
        let ht = detect_hard_turn(ego.swa_deg, ego.v_y, cfg);
        let f = self.fuzzy.update(ego);
        let us = f.k_us >= cfg.fuzzy_threshold;
        let os = f.k_os >= cfg.fuzzy_threshold;
        let fp = Obb::from_pose(&ego.pose(), self.ego_half);
        let distance = actors
            .iter()
            .zip(&self.actor_half)
            .map(|(a, &h)| fp.distance(&Obb::from_pose(&a.pose, h)))
            .min_by(f64::total_cmp);

        let m = FrameMetrics {
            k_ab: ego.a_x / cfg.gravity,
            ha: accel == Some(AccelEvent::Ha),
            hb: accel == Some(AccelEvent::Hb),
            ht,
            omega_exp: f.omega_exp,
            usi: f.usi,
            osi: f.osi,
            fd: f.fd,
            dswa: f.dswa,
            day: f.day,
            k_us: f.k_us,
            k_os: f.k_os,
            us,
            os,
            distance,
        };
        for (i, hit) in [m.ha, m.hb, m.ht, m.os, m.us].into_iter().enumerate() {
            self.counts[i] += hit as u64;
        }
        if let Some(d) = distance {
            self.md = Some(self.md.map_or(d, |md: f64| md.min(d)));
        }
        m
    }

    pub fn quality(&self) -> QualityScore {
        let [ha, hb, ht, os, us] = self.counts;
        QualityScore {
            ha,
            hb,
            ht,
            os,
            us,
            md: self.md,
            c: self.cfg.c,
            score: score(
                self.counts,
                self.md,
                self.cfg.c,
                self.cfg.md_floor,
                self.cfg.weights,
            ),
        }
    }
}

/// Recomputes the per-frame metrics and the final score from logged frames.
pub fn recompute(
    scenario: &Scenario,
    ego_half: Vec2,
    dt: f64,
    cfg: FeedbackConfig,
    frames: &[FrameRecord],
) -> (Vec<FrameMetrics>, QualityScore) {
    let mut m = FeedbackMonitor::new(scenario, ego_half, dt, cfg);
    let metrics = frames
        .iter()
        .map(|f| m.observe(&f.ego, &f.actors))
        .collect();
    (metrics, m.quality())
}
