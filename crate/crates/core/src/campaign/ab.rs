//! Feedback A/B harness: identical campaigns on the same seed pool, one
//! keeping the worst-scoring member each cycle and one picking the
//! successor at random.
//!
//! Each arm makes repeated passes over the pool, one `fuzz_one` per seed
//! per pass, so a seed is fuzzed again after a find. Passes continue until
//! the episode budget is spent; both arms spend exactly the same number of
//! episodes, and no single easy seed can absorb the whole budget.

use super::seeds::{component_seeds, SeedConfig};
use super::{run_pool, CampaignConfig, MapCache, NamedSeed};
use crate::error::CampaignError;
use crate::scenario::{LaneMap, RoadComponent};
use crate::sim::EpisodeSetup;
use crate::sut::SutConfig;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct AbConfig {
    pub repeats: usize,
    /// Episodes per campaign.
    pub budget: u64,
    /// Seeds drawn per road component.
    pub seeds_per_component: usize,
    pub rng_seed: u64,
    /// Template for both arms; `feedback`, `episode_budget`,
    /// `restart_after_find` and `rng_seed` are overwritten.
    pub campaign: CampaignConfig,
}

impl Default for AbConfig {
    fn default() -> Self {
        Self {
            repeats: 3,
            budget: 500,
            seeds_per_component: 4,
            rng_seed: 0,
            campaign: CampaignConfig {
                setup: EpisodeSetup::new(SutConfig::defective()),
                timing: false,
                verify_reports: false,
                ..CampaignConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AbArm {
    pub feedback: bool,
    pub misbehaviors: Vec<usize>,
    pub episodes: Vec<u64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AbResult {
    pub seeds: usize,
    /// Components that yielded no seed completable by every verifying setup.
    pub skipped_components: Vec<RoadComponent>,
    pub with_feedback: AbArm,
    pub without_feedback: AbArm,
    /// Mean with feedback over mean without; `None` when the baseline found
    /// nothing.
    pub ratio: Option<f64>,
}

/// Seeds the defect-free and the campaign's stack both complete, so that
/// every find comes from the mutations rather than from the bare mission.
pub fn ab_seed_pool(
    map: &Arc<LaneMap>,
    cfg: &AbConfig,
) -> Result<(Vec<NamedSeed>, Vec<RoadComponent>), CampaignError> {
    let seed_cfg = SeedConfig {
        verify: vec![EpisodeSetup::default(), cfg.campaign.setup],
        ..SeedConfig::default()
    };
    let mut pool = Vec::new();
    let mut skipped = Vec::new();
    for c in RoadComponent::ALL {
        match component_seeds(map, c, cfg.seeds_per_component, cfg.rng_seed, &seed_cfg) {
            Ok(seeds) => pool.extend(seeds.into_iter().enumerate().map(|(i, s)| NamedSeed {
                name: format!("{}-{i}", c.tag()),
                scenario: s.scenario,
            })),
            Err(CampaignError::SeedExhausted { .. }) => skipped.push(c),
            Err(e) => return Err(e),
        }
    }
    Ok((pool, skipped))
}

fn arm(
    seeds: &[NamedSeed],
    cfg: &AbConfig,
    feedback: bool,
    maps: &mut MapCache,
) -> Result<AbArm, CampaignError> {
    let mut out = AbArm {
        feedback,
        misbehaviors: Vec::new(),
        episodes: Vec::new(),
        mean: 0.0,
    };
    for r in 0..cfg.repeats {
        let c = CampaignConfig {
            feedback,
            episode_budget: Some(cfg.budget),
            restart_after_find: true,
            rng_seed: cfg.rng_seed.wrapping_add(r as u64 + 1),
            out_dir: None,
            ..cfg.campaign.clone()
        };
        let summary = run_pool(seeds, &c, maps)?;
        out.misbehaviors.push(summary.misbehaviors);
        out.episodes.push(summary.episodes);
    }
    out.mean = out.misbehaviors.iter().sum::<usize>() as f64 / cfg.repeats.max(1) as f64;
    Ok(out)
}

pub fn run_ab(map: &Arc<LaneMap>, cfg: &AbConfig) -> Result<AbResult, CampaignError> {
    let (seeds, skipped) = ab_seed_pool(map, cfg)?;
    let mut maps = MapCache::new(cfg.campaign.map_dir.clone());
    let with_feedback = arm(&seeds, cfg, true, &mut maps)?;
    let without_feedback = arm(&seeds, cfg, false, &mut maps)?;
    let ratio = (without_feedback.mean > 0.0).then(|| with_feedback.mean / without_feedback.mean);
    Ok(AbResult {
        seeds: seeds.len(),
        skipped_components: skipped,
        with_feedback,
        without_feedback,
        ratio,
    })
}
