//! Oracle validation by fault injection: each suite drives randomized
//! fixtures where exactly one kind of misbehavior must happen, and counts
//! how often the oracles report it.

use crate::geometry::{Pose, Vec2};
use crate::maps;
use crate::oracles::MisbehaviorKind;
use crate::scenario::{
    ActorKind, ActorSpec, LaneMap, Mission, NavMethod, Scenario, DEFAULT_GOAL_RADIUS,
};
use crate::sim::{run_episode, EpisodeSetup, TerminalStatus};
use crate::sut::{FaultSwitches, SutConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// A vehicle drives into the ego from behind while it waits at a red light.
    RearEnd,
    TargetSpeedAboveLimit,
    ForceSteerLeft,
    DisableTrafficLightDetection,
    DisableControl,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::RearEnd,
        Suite::TargetSpeedAboveLimit,
        Suite::ForceSteerLeft,
        Suite::DisableTrafficLightDetection,
        Suite::DisableControl,
    ];

    pub fn expected(self) -> MisbehaviorKind {
        match self {
            Suite::RearEnd => MisbehaviorKind::Collision,
            Suite::TargetSpeedAboveLimit => MisbehaviorKind::Speeding,
            Suite::ForceSteerLeft => MisbehaviorKind::LaneInvasion,
            Suite::DisableTrafficLightDetection => MisbehaviorKind::RedLight,
            Suite::DisableControl => MisbehaviorKind::Immobility,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Suite::RearEnd => "rear_end",
            Suite::TargetSpeedAboveLimit => "target_speed_above_limit",
            Suite::ForceSteerLeft => "force_steer_left",
            Suite::DisableTrafficLightDetection => "disable_traffic_light_detection",
            Suite::DisableControl => "disable_control",
        }
    }

    fn faults(self) -> FaultSwitches {
        let mut f = FaultSwitches::default();
        match self {
            Suite::RearEnd => {}
            Suite::TargetSpeedAboveLimit => f.target_speed_above_limit = true,
            Suite::ForceSteerLeft => f.force_steer_left = true,
            Suite::DisableTrafficLightDetection => f.disable_traffic_light_detection = true,
            Suite::DisableControl => f.disable_control = true,
        }
        f
    }

    fn map_id(self) -> &'static str {
        match self {
            Suite::RearEnd | Suite::DisableTrafficLightDetection => maps::SIGNAL_ROAD,
            _ => maps::STRAIGHT_ROAD,
        }
    }
}

/// Pose on the eastbound lane nearest to `(x, y)`.
fn eastbound(map: &LaneMap, x: f64) -> Pose {
    let p = Vec2::new(x, -maps::LANE_WIDTH / 2.0);
    let m = map
        .nearest_lane_anywhere(p, Some(0.0))
        .expect("fixture maps have an eastbound lane");
    map.lane(m.lane).centerline.pose_at(m.projection.s)
}

/// One randomized fixture for `suite`.
pub fn fixture(suite: Suite, map: &LaneMap, rng: &mut impl Rng) -> Scenario {
    let (start, goal) = match suite {
        Suite::RearEnd | Suite::DisableTrafficLightDetection => (
            rng.random_range(40.0..150.0),
            rng.random_range(300.0..450.0),
        ),
        _ => {
            let s = rng.random_range(20.0..250.0);
            (s, s + rng.random_range(150.0..300.0))
        }
    };
    let mut mission = Mission::new(eastbound(map, start), eastbound(map, goal));
    mission.goal_radius = DEFAULT_GOAL_RADIUS;
    let mut s = Scenario::clean(map.map_id.clone(), mission, rng.random());
    if suite == Suite::RearEnd {
        let back = start - rng.random_range(20.0..60.0);
        let kind = ActorKind::Vehicle;
        s.actors.push(ActorSpec {
            kind,
            nav: NavMethod::Linear,
            initial: eastbound(map, back),
            destination: eastbound(map, goal).position,
            target_speed: rng.random_range(5.0..kind.max_speed()),
            maneuvers: Vec::new(),
            half_extents: kind.half_extents(),
        });
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SuiteResult {
    pub suite: Suite,
    pub expected: MisbehaviorKind,
    pub fixtures: usize,
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Fixtures where the fault-free stack still triggered the oracle.
    pub control_fp: usize,
    /// Indices of the missed fixtures with the status they ended in.
    pub misses: Vec<(usize, TerminalStatus)>,
}

/// Runs `n` fixtures of `suite` with the fault injected and, as a control,
/// with the fault-free stack.
pub fn run_suite(suite: Suite, n: usize, rng_seed: u64) -> SuiteResult {
    let map: Arc<LaneMap> = maps::builtin(suite.map_id()).expect("built-in map");
    let mut rng = ChaCha8Rng::seed_from_u64(
        rng_seed ^ (suite as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let fixtures: Vec<Scenario> = (0..n).map(|_| fixture(suite, &map, &mut rng)).collect();
    let faulty = EpisodeSetup::new(SutConfig {
        faults: suite.faults(),
        ..SutConfig::defect_free()
    });
    let clean = EpisodeSetup::default();
    let expected = suite.expected();
    let results: Vec<(TerminalStatus, bool)> = fixtures
        .par_iter()
        .map(|s| {
            let hit = run_episode(s, map.clone(), &faulty, None).status;
            // The rear-end fixture collides whatever the stack does.
            let control_fp = suite != Suite::RearEnd
                && run_episode(s, map.clone(), &clean, None)
                    .status
                    .misbehavior()
                    == Some(expected);
            (hit, control_fp)
        })
        .collect();
    let misses: Vec<(usize, TerminalStatus)> = results
        .iter()
        .enumerate()
        .filter(|(_, (st, _))| st.misbehavior() != Some(expected))
        .map(|(i, (st, _))| (i, st.clone()))
        .collect();
    SuiteResult {
        suite,
        expected,
        fixtures: n,
        tp: n - misses.len(),
        fn_: misses.len(),
        control_fp: results.iter().filter(|r| r.1).count(),
        misses,
    }
}

/// All five suites.
pub fn validate_oracles(n: usize, rng_seed: u64) -> Vec<SuiteResult> {
    Suite::ALL
        .into_iter()
        .map(|s| run_suite(s, n, rng_seed))
        .collect()
}

/// Fixed-width table of TP/FN per injected error.
pub fn render_table(results: &[SuiteResult]) -> String {
    let mut out = format!(
        "{:<34} {:<14} {:>5} {:>5} {:>10}\n",
        "injected error", "misbehavior", "TP", "FN", "control FP"
    );
    for r in results {
        out.push_str(&format!(
            "{:<34} {:<14} {:>5} {:>5} {:>10}\n",
            r.suite.tag(),
            r.expected.tag(),
            r.tp,
            r.fn_,
            r.control_fp
        ));
    }
    out
}
