//! One closed-loop episode: observe, decide, step, record, judge.

use super::{ControlCommand, Entity, SimConfig, World};
use crate::feedback::{FeedbackConfig, FeedbackMonitor, FrameMetrics, QualityScore};
use crate::oracles::{MisbehaviorKind, OracleConfig, OracleFlags, OracleMonitor};
use crate::scenario::trace::{ActorFrame, FrameRecord, Trace};
use crate::scenario::{LaneMap, Scenario};
use crate::sut::{Sut, SutConfig};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Everything besides the scenario that determines an episode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct EpisodeSetup {
    pub sim: SimConfig,
    pub sut: SutConfig,
    pub oracles: OracleConfig,
    pub feedback: FeedbackConfig,
    /// Wall-clock budget for one decide() call in real-time mode, ms.
    /// `None` runs the stack in lockstep with no budget.
    pub decide_budget_ms: Option<f64>,
}

impl EpisodeSetup {
    pub fn new(sut: SutConfig) -> Self {
        Self {
            sut,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TerminalStatus {
    Completed,
    Misbehavior {
        kind: MisbehaviorKind,
        frame_index: u64,
        entities: Vec<Entity>,
    },
    Timeout,
    SutFailure {
        message: String,
    },
}

impl TerminalStatus {
    pub fn misbehavior(&self) -> Option<MisbehaviorKind> {
        match self {
            TerminalStatus::Misbehavior { kind, .. } => Some(*kind),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            TerminalStatus::Completed => "completed",
            TerminalStatus::Misbehavior { .. } => "misbehavior",
            TerminalStatus::Timeout => "timeout",
            TerminalStatus::SutFailure { .. } => "sut_failure",
        }
    }
}

/// Wall time spent per campaign activity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct Timing {
    pub mutation: Duration,
    pub detector: Duration,
    pub feedback: Duration,
    pub logging: Duration,
    /// World stepping plus the driving stack.
    pub simulation: Duration,
}

impl Timing {
    pub fn total(&self) -> Duration {
        self.mutation + self.detector + self.feedback + self.logging + self.simulation
    }

    pub fn add(&mut self, other: &Timing) {
        self.mutation += other.mutation;
        self.detector += other.detector;
        self.feedback += other.feedback;
        self.logging += other.logging;
        self.simulation += other.simulation;
    }
}

/// Result of one episode. Frames are kept in memory; a serialized
/// [`Trace`] is only built when asked for.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub setup: EpisodeSetup,
    pub frames: Vec<FrameRecord>,
    pub status: TerminalStatus,
    pub quality: QualityScore,
}

impl Episode {
    pub fn to_trace(&self, scenario: &Scenario) -> Trace {
        Trace::new(
            scenario,
            self.setup,
            self.frames.clone(),
            self.status.clone(),
            self.quality,
        )
    }
}

/// Runs `scenario` against the reference stack configured by `setup.sut`.
pub fn run_episode(
    scenario: &Scenario,
    map: Arc<LaneMap>,
    setup: &EpisodeSetup,
    timing: Option<&mut Timing>,
) -> Episode {
    let mut sut = setup.sut.build().with_vehicle(setup.sim.vehicle);
    run_episode_with(scenario, map, setup, &mut sut, timing)
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "driving stack panicked".into()
    }
}

struct Clock<'a> {
    timing: Option<&'a mut Timing>,
    last: Instant,
}

impl Clock<'_> {
    fn lap(&mut self, pick: fn(&mut Timing) -> &mut Duration) {
        if let Some(t) = self.timing.as_deref_mut() {
            let now = Instant::now();
            *pick(t) += now - self.last;
            self.last = now;
        }
    }
}

/// Runs `scenario` against any driving stack.
pub fn run_episode_with(
    scenario: &Scenario,
    map: Arc<LaneMap>,
    setup: &EpisodeSetup,
    sut: &mut dyn Sut,
    timing: Option<&mut Timing>,
) -> Episode {
    let mut clock = Clock {
        timing,
        last: Instant::now(),
    };
    let cfg = &setup.sim;
    let ego_half = cfg.vehicle.half_extents;
    let mut world = World::new(scenario, map.clone(), *cfg);
    let mut oracles = OracleMonitor::new(&map, scenario, ego_half, setup.oracles);
    let mut feedback = FeedbackMonitor::new(scenario, ego_half, cfg.dt, setup.feedback);
    let mission = &scenario.mission;
    let max_frames = (mission.time_budget / cfg.dt + 1e-9).floor() as u64;
    let mut frames = Vec::with_capacity(max_frames as usize + 1);

    sut.reset();
    let init = catch_unwind(AssertUnwindSafe(|| sut.init(map.clone(), mission)));
    clock.lap(|t| &mut t.simulation);

    let mut command = ControlCommand::ZERO;
    let status = loop {
        let mut rec = FrameRecord {
            ego: *world.ego(),
            actors: world
                .actors()
                .iter()
                .map(|a| ActorFrame {
                    pose: a.pose,
                    speed: a.speed,
                })
                .collect(),
            lights: world.light_phases(),
            command,
            friction: {
                let a = world.axle_friction();
                [a.front, a.rear]
            },
            flags: OracleFlags::default(),
            metrics: FrameMetrics::default(),
        };
        clock.lap(|t| &mut t.logging);
        rec.flags = oracles.observe(&rec);
        clock.lap(|t| &mut t.detector);
        rec.metrics = feedback.observe(&rec.ego, &rec.actors);
        clock.lap(|t| &mut t.feedback);

        let frame_index = rec.ego.frame_index;
        let verdict = rec.flags.first().map(|kind| TerminalStatus::Misbehavior {
            kind,
            frame_index,
            entities: if kind == MisbehaviorKind::Collision {
                rec.flags.collision.clone()
            } else {
                Vec::new()
            },
        });
        let reached = rec.ego.position.dist(mission.goal.position) <= mission.goal_radius;
        frames.push(rec);
        clock.lap(|t| &mut t.logging);

        if let Some(v) = verdict {
            break v;
        }
        match &init {
            Ok(Ok(())) => {}
            Ok(Err(e)) => {
                break TerminalStatus::SutFailure {
                    message: e.to_string(),
                }
            }
            Err(_) => {
                break TerminalStatus::SutFailure {
                    message: "driving stack panicked during init".into(),
                }
            }
        }
        if reached {
            break TerminalStatus::Completed;
        }
        if frame_index >= max_frames {
            break TerminalStatus::Timeout;
        }

        let obs = world.observe();
        let started = Instant::now();
        let decided = catch_unwind(AssertUnwindSafe(|| sut.decide(&obs)));
        let cmd = match decided {
            Ok(c) => c,
            Err(p) => {
                break TerminalStatus::SutFailure {
                    message: panic_message(p),
                }
            }
        };
        if let Some(budget) = setup.decide_budget_ms {
            let used = started.elapsed().as_secs_f64() * 1e3;
            if used > budget {
                break TerminalStatus::SutFailure {
                    message: format!("decide took {used:.1} ms, budget {budget:.1} ms"),
                };
            }
        }
        command = cmd.clamped();
        world.step(&command);
        clock.lap(|t| &mut t.simulation);
    };

    clock.lap(|t| &mut t.logging);
    Episode {
        setup: *setup,
        frames,
        status,
        quality: feedback.quality(),
    }
}
