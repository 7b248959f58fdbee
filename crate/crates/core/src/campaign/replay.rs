//! Re-deriving verdicts and metrics from a stored trace, and optionally
//! re-simulating it.

use crate::feedback::{recompute, FrameMetrics, QualityScore};
use crate::oracles::{recompute_flags, MisbehaviorKind, OracleFlags};
use crate::scenario::trace::{frames_digest, Trace};
use crate::scenario::LaneMap;
use crate::sim::{run_episode, TerminalStatus};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TimelineEvent {
    pub frame: u64,
    pub time: f64,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Resimulation {
    pub expected: String,
    pub actual: String,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReplayReport {
    /// Verdict derived from the frames.
    pub status: TerminalStatus,
    pub stored_status: TerminalStatus,
    pub quality: QualityScore,
    pub stored_quality: QualityScore,
    /// Recomputed per-frame oracle flags equal the logged ones.
    pub flags_match: bool,
    pub metrics_match: bool,
    pub timeline: Vec<TimelineEvent>,
    pub resimulation: Option<Resimulation>,
}

impl ReplayReport {
    /// Verdict, score and per-frame values all agree with the trace, and the
    /// re-simulation (if any) reproduced it.
    pub fn consistent(&self) -> bool {
        self.status == self.stored_status
            && self.quality == self.stored_quality
            && self.flags_match
            && self.metrics_match
            && self.resimulation.as_ref().is_none_or(|r| r.matches)
    }
}

/// Terminal status implied by a frame stream.
pub fn verdict(trace: &Trace, flags: &[OracleFlags]) -> TerminalStatus {
    for (f, fl) in trace.frames.iter().zip(flags) {
        if let Some(kind) = fl.first() {
            return TerminalStatus::Misbehavior {
                kind,
                frame_index: f.ego.frame_index,
                entities: if kind == MisbehaviorKind::Collision {
                    fl.collision.clone()
                } else {
                    Vec::new()
                },
            };
        }
    }
    let m = &trace.header.scenario.mission;
    match (&trace.footer.status, trace.frames.last()) {
        (TerminalStatus::SutFailure { .. }, _) => trace.footer.status.clone(),
        (_, Some(last)) if last.ego.position.dist(m.goal.position) <= m.goal_radius => {
            TerminalStatus::Completed
        }
        _ => TerminalStatus::Timeout,
    }
}

fn frame_events(fl: &OracleFlags, m: &FrameMetrics) -> Vec<String> {
    let mut ev: Vec<String> = MisbehaviorKind::ALL
        .into_iter()
        .filter(|&k| fl.has(k))
        .map(|k| k.tag().to_string())
        .collect();
    for (on, tag) in [
        (m.ha, "ha"),
        (m.hb, "hb"),
        (m.ht, "ht"),
        (m.os, "os"),
        (m.us, "us"),
    ] {
        if on {
            ev.push(tag.into());
        }
    }
    if !fl.collision.is_empty() {
        ev.push(format!("entities={:?}", fl.collision));
    }
    ev
}

/// Re-runs oracles and feedback over the logged frames.
pub fn replay(trace: &Trace, map: &LaneMap) -> ReplayReport {
    let setup = &trace.header.setup;
    let scenario = &trace.header.scenario;
    let ego_half = setup.sim.vehicle.half_extents;
    let flags = recompute_flags(map, scenario, ego_half, setup.oracles, &trace.frames);
    let (metrics, quality) = recompute(
        scenario,
        ego_half,
        setup.sim.dt,
        setup.feedback,
        &trace.frames,
    );
    let timeline = trace
        .frames
        .iter()
        .zip(flags.iter().zip(&metrics))
        .filter_map(|(f, (fl, m))| {
            let events = frame_events(fl, m);
            (!events.is_empty()).then_some(TimelineEvent {
                frame: f.ego.frame_index,
                time: f.ego.sim_time,
                events,
            })
        })
        .collect();
    ReplayReport {
        status: verdict(trace, &flags),
        stored_status: trace.footer.status.clone(),
        quality,
        stored_quality: trace.footer.quality,
        flags_match: trace
            .frames
            .iter()
            .zip(&flags)
            .all(|(f, fl)| &f.flags == fl),
        metrics_match: trace
            .frames
            .iter()
            .zip(&metrics)
            .all(|(f, m)| &f.metrics == m),
        timeline,
        resimulation: None,
    }
}

/// Runs the stored scenario again under the stored setup and compares frame
/// stream digests.
pub fn resimulate(trace: &Trace, map: Arc<LaneMap>) -> Resimulation {
    let ep = run_episode(&trace.header.scenario, map, &trace.header.setup, None);
    let actual = frames_digest(&ep.frames);
    Resimulation {
        expected: trace.footer.frames_digest.clone(),
        matches: actual == trace.footer.frames_digest,
        actual,
    }
}

pub const CSV_HEADER: &str =
    "frame,time,x,y,heading,v_x,v_y,yaw_rate_deg,a_x,a_y_g,swa_deg,throttle,brake,steer,\
mu_front,mu_rear,k_ab,omega_exp,usi,osi,fd,dswa,day,k_us,k_os,ha,hb,ht,us,os,distance";

/// Per-frame vehicle state and metric columns.
pub fn to_csv(trace: &Trace) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for f in &trace.frames {
        let e = &f.ego;
        let m = &f.metrics;
        let c = &f.command;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.frame_index,
            e.sim_time,
            e.position.x,
            e.position.y,
            e.heading,
            e.v_x,
            e.v_y,
            e.yaw_rate_deg(),
            e.a_x,
            e.a_y_g,
            e.swa_deg,
            c.throttle,
            c.brake,
            c.steer,
            f.friction[0],
            f.friction[1],
            m.k_ab,
            m.omega_exp,
            m.usi,
            m.osi,
            m.fd,
            m.dswa,
            m.day,
            m.k_us,
            m.k_os,
            m.ha as u8,
            m.hb as u8,
            m.ht as u8,
            m.us as u8,
            m.os as u8,
            m.distance.map(|d| d.to_string()).unwrap_or_default(),
        );
    }
    out
}
