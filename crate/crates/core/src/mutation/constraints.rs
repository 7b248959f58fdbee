//! Spatial and temporal feasibility checks applied to every generated or
//! mutated scenario.

use crate::scenario::{LaneMap, Scenario, D_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialViolation {
    /// Two actors closer than `D_MIN` or with overlapping footprints.
    Actors(usize, usize),
    /// Actor too close to the ego's initial pose.
    Ego(usize),
    /// Actor footprint intersects a static obstacle.
    Static { actor: usize, obstacle: usize },
}

impl SpatialViolation {
    pub fn actor(&self) -> usize {
        match *self {
            SpatialViolation::Actors(_, b) => b,
            SpatialViolation::Ego(a) => a,
            SpatialViolation::Static { actor, .. } => actor,
        }
    }

    pub fn field(&self) -> String {
        format!("actors[{}].initial", self.actor())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalViolation {
    pub actor: usize,
}

/// Spacing and static-clearance check over initial actor placements. The
/// ego's initial footprint takes part as one more actor; static obstacles
/// need `D_MIN` of footprint clearance.
pub fn check_spatial(s: &Scenario, map: &LaneMap) -> Result<(), SpatialViolation> {
    let ego = s.mission.ego_footprint();
    for (i, a) in s.actors.iter().enumerate() {
        let fa = a.footprint();
        if a.initial.position.dist(s.mission.initial.position) < D_MIN || fa.overlaps(&ego) {
            return Err(SpatialViolation::Ego(i));
        }
        for (k, obstacle) in map.static_obstacles.iter().enumerate() {
            if fa.overlaps(obstacle) || fa.distance(obstacle) < D_MIN {
                return Err(SpatialViolation::Static {
                    actor: i,
                    obstacle: k,
                });
            }
        }
        for (j, b) in s.actors.iter().enumerate().take(i) {
            if a.initial.position.dist(b.initial.position) < D_MIN || fa.overlaps(&b.footprint()) {
                return Err(SpatialViolation::Actors(j, i));
            }
        }
    }
    Ok(())
}

/// Speed caps: 20 mph for vehicles, 6 mph for pedestrians.
pub fn check_temporal(s: &Scenario) -> Result<(), TemporalViolation> {
    match s
        .actors
        .iter()
        .position(|a| !(a.target_speed >= 0.0 && a.target_speed <= a.kind.max_speed()))
    {
        Some(actor) => Err(TemporalViolation { actor }),
        None => Ok(()),
    }
}
