use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use roadfuzz_core::campaign::ab::{run_ab, AbConfig};
use roadfuzz_core::campaign::replay::{replay, resimulate, to_csv};
use roadfuzz_core::campaign::seeds::{generate_seeds, ManifestEntry, SeedConfig, SeedManifest};
use roadfuzz_core::campaign::validation::{render_table, validate_oracles};
use roadfuzz_core::campaign::{load_seeds, run_pool, CampaignConfig, MapCache};
use roadfuzz_core::feedback::recompute;
use roadfuzz_core::mutation::Strategy;
use roadfuzz_core::scenario::trace::Trace;
use roadfuzz_core::scenario::{load_map, LaneMap};
use roadfuzz_core::sim::EpisodeSetup;
use roadfuzz_core::sut::{Profile, SutConfig};
use roadfuzz_core::{maps, CampaignError};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "roadfuzz",
    version,
    about = "Feedback-guided scenario fuzzing for driving stacks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Seed of every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print only the JSON summary.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate verified seed scenarios for each road component.
    Seedgen {
        /// Built-in map id or path to a map file.
        #[arg(long, default_value = maps::TOWN_GRID)]
        map: String,
        /// Seeds per road component.
        #[arg(long, default_value_t = 8)]
        n_s: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a fuzzing campaign.
    Fuzz {
        config: PathBuf,
        #[command(flatten)]
        overrides: CampaignOverrides,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop after this many episodes.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Run the fault-injection suites and print TP/FN per misbehavior.
    ValidateOracles {
        #[arg(long, default_value_t = 100)]
        fixtures: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive verdict and metrics from a trace.
    Replay {
        trace: PathBuf,
        /// Also re-simulate and compare frame digests.
        #[arg(long)]
        resimulate: bool,
        /// Write per-frame state and metric columns to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory holding non-builtin maps.
        #[arg(long)]
        map_dir: Option<PathBuf>,
    },
    /// Recompute the driving-quality score of a trace.
    Score { trace: PathBuf },
    /// Compare feedback against a random successor on the same seed pool.
    Ab {
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 500)]
        budget: u64,
        #[arg(long, default_value_t = 4)]
        seeds_per_component: usize,
        #[arg(long, default_value = maps::TOWN_GRID)]
        map: String,
        #[command(flatten)]
        overrides: CampaignOverrides,
    },
}

#[derive(Args)]
struct CampaignOverrides {
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    nc: Option<usize>,
    #[arg(long)]
    np: Option<usize>,
}

impl CampaignOverrides {
    fn apply(&self, cfg: &mut CampaignConfig, g: &Global) {
        if let Some(p) = self.profile {
            cfg.setup.sut = SutConfig {
                params: cfg.setup.sut.params,
                faults: cfg.setup.sut.faults,
                ..SutConfig::with_profile(p)
            };
        }
        if let Some(s) = self.strategy {
            cfg.strategy = s;
        }
        if let Some(n) = self.nc {
            cfg.nc = n;
        }
        if let Some(n) = self.np {
            cfg.np = n;
        }
        if let Some(s) = g.seed {
            cfg.rng_seed = s;
        }
        if g.jobs.is_some() {
            cfg.jobs = g.jobs;
        }
    }
}

/// Invalid input: config, map, seed or trace files.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Marks replay digest mismatches and other determinism violations.
#[derive(Debug)]
struct DeterminismError(String);

impl std::fmt::Display for DeterminismError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "determinism violation: {}", self.0)
    }
}

impl std::error::Error for DeterminismError {}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<DeterminismError>()
            || matches!(cause.downcast_ref(), Some(CampaignError::Determinism(_)))
        {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            bail!(ConfigError("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let g = &cli.global;
    match &cli.cmd {
        Cmd::Seedgen { map, n_s, out } => seedgen(g, map, *n_s, out),
        Cmd::Fuzz {
            config,
            overrides,
            out,
            budget,
        } => fuzz(g, config, overrides, out.as_deref(), *budget),
        Cmd::ValidateOracles { fixtures, out } => validate(g, *fixtures, out.as_deref()),
        Cmd::Replay {
            trace,
            resimulate,
            csv,
            map_dir,
        } => cmd_replay(g, trace, *resimulate, csv.as_deref(), map_dir.clone()),
        Cmd::Score { trace } => score(trace),
        Cmd::Ab {
            repeats,
            budget,
            seeds_per_component,
            map,
            overrides,
        } => ab(g, *repeats, *budget, *seeds_per_component, map, overrides),
    }
}

/// Human text then the JSON summary; a closed stdout is not an error.
fn emit<T: Serialize>(g: &Global, human: &str, value: &T) {
    let mut out = std::io::stdout().lock();
    if !g.json {
        let _ = out.write_all(human.as_bytes());
    }
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(value).expect("summaries serialize")
    );
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

/// A built-in map id, or a path to a map file.
fn open_map(spec: &str) -> Result<Arc<LaneMap>> {
    if let Some(m) = maps::builtin(spec) {
        return Ok(m);
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!(ConfigError(format!(
            "{spec:?} is neither a built-in map nor a file"
        )));
    }
    load_map(path)
        .map(Arc::new)
        .map_err(|e| ConfigError(e.to_string()).into())
}

fn seedgen(g: &Global, map: &str, n_s: usize, out: &Path) -> Result<()> {
    let map = open_map(map)?;
    let rng_seed = g.seed.unwrap_or(0);
    let seeds =
        generate_seeds(&map, n_s, rng_seed, &SeedConfig::default()).map_err(|e| match e {
            CampaignError::Map(m) => anyhow::Error::new(ConfigError(m.to_string())),
            other => other.into(),
        })?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut entries = Vec::new();
    let mut counter = std::collections::BTreeMap::<&str, usize>::new();
    for s in &seeds {
        let tag = s.component.tag();
        let i = counter.entry(tag).or_default();
        let file = format!("{tag}-{i:02}.json");
        *i += 1;
        write_json(&out.join(&file), &s.scenario)?;
        entries.push(ManifestEntry {
            file,
            component: tag.into(),
            digest: s.scenario.digest(),
        });
    }
    let manifest = SeedManifest {
        map_id: map.map_id.clone(),
        n_s,
        rng_seed,
        seeds: entries,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    emit(
        g,
        &format!("wrote {} seeds to {}\n", seeds.len(), out.display()),
        &manifest,
    );
    Ok(())
}

fn fuzz(
    g: &Global,
    config: &Path,
    overrides: &CampaignOverrides,
    out: Option<&Path>,
    budget: Option<u64>,
) -> Result<()> {
    let mut cfg = CampaignConfig::load(config).map_err(|e| ConfigError(e.to_string()))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let rebase = |p: &PathBuf| {
        if p.is_relative() {
            base.join(p)
        } else {
            p.clone()
        }
    };
    cfg.seeds = cfg.seeds.iter().map(rebase).collect();
    cfg.map_dir = cfg.map_dir.as_ref().map(rebase);
    cfg.out_dir = cfg.out_dir.as_ref().map(rebase);
    overrides.apply(&mut cfg, g);
    if let Some(o) = out {
        cfg.out_dir = Some(o.to_path_buf());
    }
    if budget.is_some() {
        cfg.episode_budget = budget;
    }
    cfg.check().map_err(|e| ConfigError(e.to_string()))?;
    let seeds = load_seeds(&cfg.seeds).map_err(|e| ConfigError(e.to_string()))?;
    if let Some(o) = &cfg.out_dir {
        roadfuzz_core::campaign::prepare_out_dir(o)?;
        for s in &seeds {
            write_json(
                &o.join("seeds").join(format!("{}.json", s.name)),
                &s.scenario,
            )?;
        }
    }
    let summary = run_pool(&seeds, &cfg, &mut MapCache::new(cfg.map_dir.clone()))?;
    let t = &summary.timing;
    let mut human = format!(
        "{} seeds, {} episodes, {} misbehaviors in {:.1} s\n",
        summary.seeds, summary.episodes, summary.misbehaviors, summary.wall_time_s
    );
    for (k, n) in &summary.by_kind {
        human.push_str(&format!("  {:<14} {n}\n", k.tag()));
    }
    human.push_str(&format!(
        "time: mutation {:.3} s, detector {:.3} s, feedback {:.3} s, logging {:.3} s, simulation {:.3} s\n",
        t.mutation_s, t.detector_s, t.feedback_s, t.logging_s, t.simulation_s
    ));
    emit(g, &human, &summary);
    Ok(())
}

fn validate(g: &Global, fixtures: usize, out: Option<&Path>) -> Result<()> {
    let results = validate_oracles(fixtures, g.seed.unwrap_or(0));
    let table = render_table(&results);
    if let Some(o) = out {
        std::fs::create_dir_all(o).with_context(|| format!("creating {}", o.display()))?;
        write_json(&o.join("oracle_validation.json"), &results)?;
        std::fs::write(o.join("oracle_validation.txt"), &table)?;
    }
    emit(g, &table, &results);
    Ok(())
}

fn read_trace(path: &Path) -> Result<Trace> {
    Trace::read(path).map_err(|e| ConfigError(e.to_string()).into())
}

fn cmd_replay(
    g: &Global,
    path: &Path,
    resim: bool,
    csv: Option<&Path>,
    map_dir: Option<PathBuf>,
) -> Result<()> {
    let trace = read_trace(path)?;
    let map = MapCache::new(map_dir)
        .get(&trace.header.scenario.map_id)
        .map_err(|e| ConfigError(e.to_string()))?;
    let mut report = replay(&trace, &map);
    if resim {
        report.resimulation = Some(resimulate(&trace, map.clone()));
    }
    if let Some(c) = csv {
        std::fs::write(c, to_csv(&trace)).with_context(|| format!("writing {}", c.display()))?;
    }
    let mut human = match &report.status {
        roadfuzz_core::sim::TerminalStatus::Misbehavior {
            kind, frame_index, ..
        } => {
            format!("{} @ frame {frame_index}\n", kind.tag())
        }
        other => format!("{}\n", other.tag()),
    };
    human.push_str(&format!("score {}\n", report.quality.score));
    for ev in &report.timeline {
        human.push_str(&format!(
            "  frame {:>5} t={:>7.2}  {}\n",
            ev.frame,
            ev.time,
            ev.events.join(" ")
        ));
    }
    if let Some(r) = &report.resimulation {
        human.push_str(&format!(
            "resimulation digest {}\n",
            if r.matches { "matches" } else { "MISMATCH" }
        ));
    }
    emit(g, &human, &report);
    if !report.consistent() {
        bail!(DeterminismError(format!(
            "replay of {} does not reproduce the stored trace",
            path.display()
        )));
    }
    Ok(())
}

fn score(path: &Path) -> Result<()> {
    let trace = read_trace(path)?;
    let s = &trace.header.setup;
    let (_, q) = recompute(
        &trace.header.scenario,
        s.sim.vehicle.half_extents,
        s.sim.dt,
        s.feedback,
        &trace.frames,
    );
    let _ = writeln!(
        std::io::stdout().lock(),
        "{}",
        serde_json::to_string_pretty(&q)?
    );
    Ok(())
}

fn ab(
    g: &Global,
    repeats: usize,
    budget: u64,
    per: usize,
    map: &str,
    overrides: &CampaignOverrides,
) -> Result<()> {
    let map = open_map(map)?;
    let mut cfg = AbConfig {
        repeats,
        budget,
        seeds_per_component: per,
        rng_seed: g.seed.unwrap_or(0),
        ..AbConfig::default()
    };
    cfg.campaign.strategy = Strategy::Ent;
    cfg.campaign.setup = EpisodeSetup::new(SutConfig::defective());
    overrides.apply(&mut cfg.campaign, g);
    let r = run_ab(&map, &cfg)?;
    let human = format!(
        "with feedback {:?} (mean {:.2}), without {:?} (mean {:.2}), ratio {}\n",
        r.with_feedback.misbehaviors,
        r.with_feedback.mean,
        r.without_feedback.misbehaviors,
        r.without_feedback.mean,
        r.ratio.map_or("undefined".into(), |x| format!("{x:.2}"))
    );
    emit(g, &human, &r);
    Ok(())
}
