//! The feedback-driven fuzzing loop, seed pools, replay, oracle validation
//! and the feedback A/B harness.

pub mod ab;
pub mod replay;
pub mod seeds;
pub mod validation;

use crate::error::CampaignError;
use crate::feedback::QualityScore;
use crate::maps;
use crate::mutation::{MutationConfig, MutationStats, Mutator, Strategy};
use crate::oracles::MisbehaviorKind;
use crate::scenario::trace::Trace;
use crate::scenario::{LaneMap, RoadComponent, Scenario};
use crate::sim::{run_episode, Entity, Episode, EpisodeSetup, TerminalStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

pub use crate::sim::Timing;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct CampaignConfig {
    /// Maximum cycles per seed.
    pub nc: usize,
    /// Population size per cycle.
    pub np: usize,
    pub strategy: Strategy,
    /// Seed scenario files, or directories of them.
    pub seeds: Vec<PathBuf>,
    /// Where non-builtin maps live.
    pub map_dir: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    /// Record the per-activity time breakdown.
    pub timing: bool,
    pub out_dir: Option<PathBuf>,
    /// Seed of the campaign's mutation stream.
    pub rng_seed: u64,
    /// Keep the worst-scoring member as successor; when false the
    /// successor is picked uniformly at random.
    pub feedback: bool,
    /// Stop after this many episodes across the whole pool.
    pub episode_budget: Option<u64>,
    /// Keep making passes over the pool, one `fuzz_one` per seed per pass,
    /// until the episode budget is spent.
    pub restart_after_find: bool,
    /// Re-derive every reported verdict from its frames.
    pub verify_reports: bool,
    pub setup: EpisodeSetup,
    pub mutation: MutationConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            nc: 10,
            np: 5,
            strategy: Strategy::All,
            seeds: Vec::new(),
            map_dir: None,
            jobs: None,
            timing: true,
            out_dir: None,
            rng_seed: 0,
            feedback: true,
            episode_budget: None,
            restart_after_find: false,
            verify_reports: true,
            setup: EpisodeSetup::default(),
            mutation: MutationConfig::default(),
        }
    }
}

impl CampaignConfig {
    pub fn check(&self) -> Result<(), CampaignError> {
        if self.nc == 0 || self.np == 0 {
            return Err(CampaignError::Config("nc and np must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(CampaignError::Config("jobs must be at least 1".into()));
        }
        self.setup.sim.check().map_err(CampaignError::Config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CampaignError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))
    }
}

/// One evaluated population member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Member {
    pub scenario: Scenario,
    pub status: TerminalStatus,
    pub quality: QualityScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CycleResult {
    pub population: Vec<Member>,
    pub successor: Option<usize>,
    pub misbehavior: Option<usize>,
}

/// Index of the lowest score, ties to the lowest index.
pub fn select_successor(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MisbehaviorReport {
    pub id: String,
    pub kind: MisbehaviorKind,
    pub frame_index: u64,
    pub entities: Vec<Entity>,
    pub scenario: Scenario,
    pub trace_path: Option<PathBuf>,
    pub seed: String,
    pub cycle: usize,
    pub round: usize,
    pub strategy: Strategy,
    /// Road components around the ego at the misbehavior frame.
    pub region: Vec<RoadComponent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub scenario: Scenario,
    pub episode: Episode,
    pub cycle: usize,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Misbehavior(Box<Finding>),
    Exhausted,
    BudgetSpent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzResult {
    pub outcome: Outcome,
    /// Episodes charged: every member of a cycle, or up to and including
    /// the first misbehaving member.
    pub episodes: u64,
    pub cycles: Vec<CycleResult>,
    pub generation_skips: usize,
}

/// Shared state for one campaign run.
pub struct Runner<'a> {
    cfg: &'a CampaignConfig,
    pool: rayon::ThreadPool,
    pub timing: Timing,
    pub stats: MutationStats,
    pub budget_left: Option<u64>,
    keep_cycles: bool,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a CampaignConfig) -> Result<Self, CampaignError> {
        cfg.check()?;
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cfg.jobs {
            b = b.num_threads(j);
        }
        let pool = b
            .build()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        Ok(Self {
            cfg,
            pool,
            timing: Timing::default(),
            stats: MutationStats::default(),
            budget_left: cfg.episode_budget,
            keep_cycles: false,
        })
    }

    /// Keep every population in the result (memory heavy).
    pub fn keep_cycles(mut self, on: bool) -> Self {
        self.keep_cycles = on;
        self
    }

    /// One seed: generate, mutate a population, evaluate it, keep the
    /// worst-scoring member, until a misbehavior shows up or the cycles
    /// run out.
    pub fn fuzz_one(
        &mut self,
        seed: &Scenario,
        map: &Arc<LaneMap>,
        rng: &mut ChaCha8Rng,
    ) -> FuzzResult {
        let cfg = self.cfg;
        let mut t = Instant::now();
        let mut mutator = Mutator::new(map, seed, cfg.mutation);
        let mut s = seed.clone();
        let mut result = FuzzResult {
            outcome: Outcome::Exhausted,
            episodes: 0,
            cycles: Vec::new(),
            generation_skips: 0,
        };
        for cycle in 0..cfg.nc {
            let n = match self.budget_left {
                Some(0) => {
                    result.outcome = Outcome::BudgetSpent;
                    break;
                }
                Some(b) => (b as usize).min(cfg.np),
                None => cfg.np,
            };
            let generated = match mutator.generate(&s, cfg.strategy, rng) {
                Ok(g) => g,
                Err(_) => {
                    result.generation_skips += 1;
                    continue;
                }
            };
            let mutants: Vec<Scenario> = (0..n)
                .filter_map(|_| mutator.mutate(&generated, cfg.strategy, rng).ok())
                .collect();
            if cfg.timing {
                self.timing.mutation += t.elapsed();
            }
            if mutants.is_empty() {
                result.generation_skips += 1;
                t = Instant::now();
                continue;
            }

            let setup = cfg.setup;
            let timed = cfg.timing;
            let evaluated: Vec<(Episode, Timing)> = self.pool.install(|| {
                mutants
                    .par_iter()
                    .map(|m| {
                        let mut tm = Timing::default();
                        let ep = run_episode(m, map.clone(), &setup, timed.then_some(&mut tm));
                        (ep, tm)
                    })
                    .collect()
            });
            t = Instant::now();
            for (_, tm) in &evaluated {
                self.timing.add(tm);
            }
            let bad = evaluated
                .iter()
                .position(|(e, _)| e.status.misbehavior().is_some());
            let charged = bad.map_or(evaluated.len(), |i| i + 1) as u64;
            result.episodes += charged;
            if let Some(b) = &mut self.budget_left {
                *b = b.saturating_sub(charged);
            }
            let successor = match bad {
                Some(_) => None,
                None if cfg.feedback => select_successor(
                    &evaluated
                        .iter()
                        .map(|(e, _)| e.quality.score)
                        .collect::<Vec<_>>(),
                ),
                None => Some(rng.random_range(0..evaluated.len())),
            };
            if self.keep_cycles {
                result.cycles.push(CycleResult {
                    population: mutants
                        .iter()
                        .zip(&evaluated)
                        .map(|(m, (e, _))| Member {
                            scenario: m.clone(),
                            status: e.status.clone(),
                            quality: e.quality,
                        })
                        .collect(),
                    successor,
                    misbehavior: bad,
                });
            }
            if let Some(i) = bad {
                let episode = evaluated.into_iter().nth(i).expect("index in range").0;
                result.outcome = Outcome::Misbehavior(Box::new(Finding {
                    scenario: mutants[i].clone(),
                    episode,
                    cycle,
                    round: i,
                }));
                self.stats.add(&mutator.stats);
                return result;
            }
            s = mutants[successor.expect("no misbehavior means a successor")].clone();
        }
        self.stats.add(&mutator.stats);
        result
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct TimingSummary {
    pub mutation_s: f64,
    pub detector_s: f64,
    pub feedback_s: f64,
    pub logging_s: f64,
    pub simulation_s: f64,
    /// Sum of the five categories.
    pub total_s: f64,
    /// Share of the total spent outside simulation.
    pub overhead_fraction: f64,
}

impl From<&Timing> for TimingSummary {
    fn from(t: &Timing) -> Self {
        let s = |d: Duration| d.as_secs_f64();
        let total = s(t.total());
        Self {
            mutation_s: s(t.mutation),
            detector_s: s(t.detector),
            feedback_s: s(t.feedback),
            logging_s: s(t.logging),
            simulation_s: s(t.simulation),
            total_s: total,
            overhead_fraction: if total > 0.0 {
                1.0 - s(t.simulation) / total
            } else {
                0.0
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SeedSummary {
    pub seed: String,
    pub episodes: u64,
    pub misbehaviors: usize,
    pub exhausted: usize,
    pub generation_skips: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CampaignSummary {
    pub strategy: Strategy,
    pub feedback: bool,
    pub seeds: usize,
    pub episodes: u64,
    pub misbehaviors: usize,
    pub by_kind: BTreeMap<MisbehaviorKind, usize>,
    pub per_seed: Vec<SeedSummary>,
    pub reports: Vec<MisbehaviorReport>,
    /// Wall-clock time of the whole run.
    pub wall_time_s: f64,
    /// Per-activity time, summed over workers.
    pub timing: TimingSummary,
    pub mutation: MutationStats,
}

/// A seed scenario with a display name.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSeed {
    pub name: String,
    pub scenario: Scenario,
}

/// Loads seed scenarios from files and directories (`*.json`, sorted;
/// `manifest.json` is skipped).
pub fn load_seeds(paths: &[PathBuf]) -> Result<Vec<NamedSeed>, CampaignError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CampaignError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension().is_some_and(|x| x == "json")
                        && f.file_name().is_some_and(|n| n != "manifest.json")
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files
        .into_iter()
        .map(|f| {
            Ok(NamedSeed {
                name: f
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                scenario: Scenario::load(&f)?,
            })
        })
        .collect()
}

/// Resolves and caches the maps the seeds refer to.
#[derive(Default)]
pub struct MapCache {
    dir: Option<PathBuf>,
    maps: HashMap<String, Arc<LaneMap>>,
}

impl MapCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            maps: HashMap::new(),
        }
    }

    pub fn get(&mut self, id: &str) -> Result<Arc<LaneMap>, CampaignError> {
        if let Some(m) = self.maps.get(id) {
            return Ok(m.clone());
        }
        let m = maps::resolve(id, self.dir.as_deref())?;
        self.maps.insert(id.to_string(), m.clone());
        Ok(m)
    }
}

fn seed_rng(base: u64, index: usize, round: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(base);
    r.set_stream(((index as u64) << 32) | round);
    r
}

/// Road components whose waypoints lie within 30 m of `p`.
pub fn region_of(map: &LaneMap, p: crate::geometry::Vec2) -> Vec<RoadComponent> {
    map.road_components
        .iter()
        .filter(|(_, ids)| {
            ids.iter()
                .any(|&i| map.waypoints[i].position.dist(p) <= 30.0)
        })
        .map(|(c, _)| *c)
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let text = serde_json::to_string_pretty(value).expect("summaries serialize");
    std::fs::write(path, text).map_err(|e| CampaignError::io(path, e))
}

/// Creates `seeds/`, `reports/` and `traces/` under `out`.
pub fn prepare_out_dir(out: &Path) -> Result<(), CampaignError> {
    for sub in ["seeds", "reports", "traces"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| CampaignError::io(&d, e))?;
    }
    Ok(())
}

/// Fuzzes every seed in order. With `restart_after_find` and an episode
/// budget, repeats passes over the pool until the budget is spent, so every
/// seed is fuzzed again after a find.
pub fn run_pool(
    seeds: &[NamedSeed],
    cfg: &CampaignConfig,
    maps: &mut MapCache,
) -> Result<CampaignSummary, CampaignError> {
    let started = Instant::now();
    let mut runner = Runner::new(cfg)?;
    if let Some(out) = &cfg.out_dir {
        prepare_out_dir(out)?;
    }
    let mut per_seed: Vec<SeedSummary> = seeds
        .iter()
        .map(|s| SeedSummary {
            seed: s.name.clone(),
            episodes: 0,
            misbehaviors: 0,
            exhausted: 0,
            generation_skips: 0,
        })
        .collect();
    let mut reports = Vec::new();
    let mut round = 0u64;
    'pool: loop {
        for (i, seed) in seeds.iter().enumerate() {
            if runner.budget_left == Some(0) {
                break 'pool;
            }
            let map = maps.get(&seed.scenario.map_id)?;
            let mut rng = seed_rng(cfg.rng_seed, i, round);
            let r = runner.fuzz_one(&seed.scenario, &map, &mut rng);
            let ps = &mut per_seed[i];
            ps.episodes += r.episodes;
            ps.generation_skips += r.generation_skips;
            match r.outcome {
                Outcome::Misbehavior(f) => {
                    ps.misbehaviors += 1;
                    let t = Instant::now();
                    let report = make_report(&f, seed, cfg, &map, reports.len())?;
                    if cfg.timing {
                        runner.timing.logging += t.elapsed();
                    }
                    reports.push(report);
                }
                Outcome::Exhausted => ps.exhausted += 1,
                Outcome::BudgetSpent => break 'pool,
            }
        }
        round += 1;
        let more = cfg.restart_after_find
            && runner.budget_left.is_some_and(|b| b > 0)
            && !seeds.is_empty();
        if !more {
            break;
        }
    }

    let mut by_kind = BTreeMap::new();
    for r in &reports {
        *by_kind.entry(r.kind).or_insert(0) += 1;
    }
    let summary = CampaignSummary {
        strategy: cfg.strategy,
        feedback: cfg.feedback,
        seeds: seeds.len(),
        episodes: per_seed.iter().map(|p| p.episodes).sum(),
        misbehaviors: reports.len(),
        by_kind,
        per_seed,
        reports,
        wall_time_s: started.elapsed().as_secs_f64(),
        timing: TimingSummary::from(&runner.timing),
        mutation: runner.stats,
    };
    if let Some(out) = &cfg.out_dir {
        write_json(&out.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

fn make_report(
    f: &Finding,
    seed: &NamedSeed,
    cfg: &CampaignConfig,
    map: &Arc<LaneMap>,
    index: usize,
) -> Result<MisbehaviorReport, CampaignError> {
    let TerminalStatus::Misbehavior {
        kind,
        frame_index,
        entities,
    } = &f.episode.status
    else {
        unreachable!("findings carry a misbehavior status");
    };
    let trace = f.episode.to_trace(&f.scenario);
    if cfg.verify_reports {
        let replayed = replay::replay(&trace, map);
        if replayed.status != trace.footer.status || !replayed.flags_match {
            return Err(CampaignError::Determinism(format!(
                "report {index}: stored verdict {:?} but frames give {:?}",
                trace.footer.status, replayed.status
            )));
        }
    }
    let id = format!("{:04}-{}-{}", index, seed.name, kind.tag());
    let ego = f
        .episode
        .frames
        .last()
        .map(|fr| fr.ego.position)
        .unwrap_or_default();
    let mut report = MisbehaviorReport {
        id: id.clone(),
        kind: *kind,
        frame_index: *frame_index,
        entities: entities.clone(),
        scenario: f.scenario.clone(),
        trace_path: None,
        seed: seed.name.clone(),
        cycle: f.cycle,
        round: f.round,
        strategy: cfg.strategy,
        region: region_of(map, ego),
    };
    if let Some(out) = &cfg.out_dir {
        let tp = out.join("traces").join(format!("{id}.jsonl"));
        trace.write(&tp)?;
        report.trace_path = Some(tp);
        write_json(&out.join("reports").join(format!("{id}.json")), &report)?;
    }
    Ok(report)
}

/// Persists a trace and returns it, for callers outside the campaign loop.
pub fn persist_trace(
    scenario: &Scenario,
    episode: &Episode,
    path: &Path,
) -> Result<Trace, CampaignError> {
    let trace = episode.to_trace(scenario);
    trace.write(path)?;
    Ok(trace)
}

/// Whether a misbehavior is the stack's own: it reproduces under `setup`
/// and the defect-free stack does not end the same scenario with the same
/// misbehavior kind.
pub fn attributable(scenario: &Scenario, map: &Arc<LaneMap>, setup: &EpisodeSetup) -> bool {
    let Some(kind) = run_episode(scenario, map.clone(), setup, None)
        .status
        .misbehavior()
    else {
        return false;
    };
    let reference = EpisodeSetup {
        sut: crate::sut::SutConfig {
            params: setup.sut.params,
            ..crate::sut::SutConfig::defect_free()
        },
        ..*setup
    };
    run_episode(scenario, map.clone(), &reference, None)
        .status
        .misbehavior()
        != Some(kind)
}
