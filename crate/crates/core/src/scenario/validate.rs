use super::{NavMethod, Scenario, DEFAULT_DRY_FRICTION, INTERACTION_RANGE};
use crate::error::MapError;
use crate::mutation::constraints::{check_spatial, check_temporal};
use crate::scenario::LaneMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::fmt;

/// One broken rule, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Returns every violated invariant; empty means the scenario is loadable.
// Negated comparisons so NaN fields are rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_scenario(s: &Scenario, map: &LaneMap) -> Result<Vec<Violation>, MapError> {
    if s.map_id != map.map_id {
        return Err(MapError::UnknownMap(s.map_id.clone()));
    }
    let mut out = Vec::new();
    let m = &s.mission;
    if m.initial.position == m.goal.position {
        out.push(Violation::new("mission", "initial_equals_goal"));
    }
    for (name, pose) in [("mission.initial", &m.initial), ("mission.goal", &m.goal)] {
        let on_lane = map
            .nearest_lane_anywhere(pose.position, Some(pose.heading))
            .is_some_and(|lm| lm.projection.distance <= map.lane(lm.lane).width * 0.5);
        if !on_lane {
            out.push(Violation::new(name, "off_lane"));
        }
    }
    if !(m.goal_radius > 0.0) {
        out.push(Violation::new("mission.goal_radius", "nonpositive"));
    }
    if !(m.time_budget > 0.0) {
        out.push(Violation::new("mission.time_budget", "nonpositive"));
    }

    for (i, a) in s.actors.iter().enumerate() {
        let field = format!("actors[{i}]");
        if (a.nav == NavMethod::Maneuver) != !a.maneuvers.is_empty() {
            out.push(Violation::new(
                format!("{field}.maneuvers"),
                "maneuvers_mismatch",
            ));
        }
        if a.maneuvers.iter().any(|mv| !(mv.duration > 0.0)) {
            out.push(Violation::new(
                format!("{field}.maneuvers"),
                "duration_nonpositive",
            ));
        }
        if !(a.half_extents.x > 0.0 && a.half_extents.y > 0.0) {
            out.push(Violation::new(
                format!("{field}.half_extents"),
                "nonpositive",
            ));
        }
        if a.initial.position.dist(m.initial.position) > INTERACTION_RANGE {
            out.push(Violation::new(
                format!("{field}.initial"),
                "outside_interaction_range",
            ));
        }
    }
    if let Err(v) = check_temporal(s) {
        out.push(Violation::new(
            format!("actors[{}].target_speed", v.actor),
            "temporal_violation",
        ));
    }
    if let Err(v) = check_spatial(s, map) {
        out.push(Violation::new(v.field(), "spatial_violation"));
    }

    for (i, p) in s.puddles.iter().enumerate() {
        if !(p.half_extents.x > 0.0 && p.half_extents.y > 0.0) {
            out.push(Violation::new(
                format!("puddles[{i}].half_extents"),
                "nonpositive",
            ));
        }
        if !(p.friction > 0.0 && p.friction < DEFAULT_DRY_FRICTION) {
            out.push(Violation::new(
                format!("puddles[{i}].friction"),
                "friction_out_of_range",
            ));
        }
    }
    if let Some(f) = s.weather.in_range() {
        out.push(Violation::new(format!("weather.{f}"), "out_of_range"));
    }
    Ok(out)
}
