//! Seed pool generation: clean-slate missions around each road component,
//! kept only when the driving stack completes them.

use crate::error::CampaignError;
use crate::scenario::{
    LaneMap, Mission, RoadComponent, Scenario, DEFAULT_GOAL_RADIUS, DEFAULT_TIME_BUDGET,
};
use crate::sim::{run_episode, EpisodeSetup, TerminalStatus};
use crate::sut::plan_global;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct SeedConfig {
    /// Missions drawn per component before giving up on one seed slot.
    pub draw_cap: u32,
    /// Straight-line distance bounds between start and goal, m.
    pub min_distance: f64,
    pub max_distance: f64,
    /// Longest accepted route, m.
    pub max_route: f64,
    pub time_budget: f64,
    /// Every setup must complete the mission for it to become a seed.
    pub verify: Vec<EpisodeSetup>,
    /// Candidates verified concurrently; fixed so results do not depend on
    /// the worker count.
    pub batch: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            draw_cap: 400,
            min_distance: 40.0,
            max_distance: 160.0,
            max_route: 320.0,
            time_budget: DEFAULT_TIME_BUDGET,
            verify: vec![EpisodeSetup::default()],
            batch: 16,
        }
    }
}

/// Index of a seed directory written by `seedgen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SeedManifest {
    pub map_id: String,
    pub n_s: usize,
    pub rng_seed: u64,
    pub seeds: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ManifestEntry {
    pub file: String,
    pub component: String,
    /// Digest of the scenario's canonical bytes.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Seed {
    pub component: RoadComponent,
    pub scenario: Scenario,
}

/// Draws one start/goal pair near `component`, redrawing while the two
/// coincide.
pub fn draw_mission(
    map: &LaneMap,
    component: RoadComponent,
    cfg: &SeedConfig,
    rng: &mut impl Rng,
) -> Option<Mission> {
    let ids = map.road_components.get(&component)?;
    if ids.is_empty() {
        return None;
    }
    let pick =
        |rng: &mut _| map.waypoint_pose(&map.waypoints[*ids.choose(rng).expect("non-empty")]);
    let mut p_i = pick(rng);
    let mut p_g = p_i;
    while p_i.position == p_g.position {
        p_i = pick(rng);
        p_g = pick(rng);
    }
    let mut m = Mission::new(p_i, p_g);
    m.goal_radius = DEFAULT_GOAL_RADIUS;
    m.time_budget = cfg.time_budget;
    Some(m)
}

fn plausible(map: &LaneMap, m: &Mission, cfg: &SeedConfig) -> bool {
    let d = m.initial.position.dist(m.goal.position);
    if d < cfg.min_distance || d > cfg.max_distance {
        return false;
    }
    plan_global(map, m).is_ok_and(|r| r.length() <= cfg.max_route)
}

/// Dry-runs the seed under every verification setup.
pub fn verify_seed(scenario: &Scenario, map: &Arc<LaneMap>, setups: &[EpisodeSetup]) -> bool {
    setups.iter().all(|setup| {
        run_episode(scenario, map.clone(), setup, None).status == TerminalStatus::Completed
    })
}

/// `n_s` verified seeds for each of the five road components, in component
/// order.
pub fn generate_seeds(
    map: &Arc<LaneMap>,
    n_s: usize,
    rng_seed: u64,
    cfg: &SeedConfig,
) -> Result<Vec<Seed>, CampaignError> {
    for c in RoadComponent::ALL {
        if map.road_components.get(&c).is_none_or(|v| v.is_empty()) {
            return Err(CampaignError::Map(
                crate::error::MapError::MissingComponent(c.tag().into()),
            ));
        }
    }
    let mut out = Vec::with_capacity(5 * n_s);
    for component in RoadComponent::ALL {
        out.extend(component_seeds(map, component, n_s, rng_seed, cfg)?);
    }
    Ok(out)
}

/// `n` verified seeds around one road component.
pub fn component_seeds(
    map: &Arc<LaneMap>,
    component: RoadComponent,
    n: usize,
    rng_seed: u64,
    cfg: &SeedConfig,
) -> Result<Vec<Seed>, CampaignError> {
    if map
        .road_components
        .get(&component)
        .is_none_or(|v| v.is_empty())
    {
        return Err(CampaignError::Map(
            crate::error::MapError::MissingComponent(component.tag().into()),
        ));
    }
    let ci = RoadComponent::ALL
        .iter()
        .position(|&c| c == component)
        .expect("listed");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ ((ci as u64 + 1) << 48));
    let mut out = Vec::with_capacity(n);
    let mut draws = 0u32;
    while out.len() < n {
        if draws >= cfg.draw_cap {
            return Err(CampaignError::SeedExhausted {
                component: component.tag().into(),
                draws,
            });
        }
        let batch: Vec<Scenario> = (0..cfg.batch)
            .map(|_| {
                let m =
                    draw_mission(map, component, cfg, &mut rng).expect("component checked above");
                Scenario::clean(map.map_id.clone(), m, rng.random())
            })
            .collect();
        draws += batch.len() as u32;
        let ok: Vec<bool> = batch
            .par_iter()
            .map(|s| plausible(map, &s.mission, cfg) && verify_seed(s, map, &cfg.verify))
            .collect();
        for (s, ok) in batch.into_iter().zip(ok) {
            if ok && out.len() < n {
                out.push(Seed {
                    component,
                    scenario: s,
                });
            }
        }
    }
    Ok(out)
}
