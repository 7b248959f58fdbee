//! Episode traces: a JSON Lines file with one header record, one record per
//! frame and one footer record.

use super::map::LightPhase;
use super::{sha256_hex, Scenario, VehicleState};
use crate::error::TraceError;
use crate::feedback::{FrameMetrics, QualityScore};
use crate::geometry::Pose;
use crate::oracles::OracleFlags;
use crate::sim::{ControlCommand, EpisodeSetup, TerminalStatus};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ActorFrame {
    pub pose: Pose,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FrameRecord {
    pub ego: VehicleState,
    /// Indexed like `Scenario::actors`.
    pub actors: Vec<ActorFrame>,
    /// Indexed like `LaneMap::traffic_lights`.
    pub lights: Vec<LightPhase>,
    /// Command that produced this frame's ego state.
    pub command: ControlCommand,
    /// Friction under the front and rear axle.
    pub friction: [f64; 2],
    pub flags: OracleFlags,
    pub metrics: FrameMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TraceHeader {
    pub format_version: u32,
    pub scenario_digest: String,
    pub rng_seed: u64,
    pub scenario: Scenario,
    pub setup: EpisodeSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TraceFooter {
    pub status: TerminalStatus,
    pub frame_count: u64,
    pub frames_digest: String,
    pub quality: QualityScore,
}

/// One line of a JSONL trace: a header, then frames, then a footer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(Box<TraceHeader>),
    Frame(FrameRecord),
    Footer(TraceFooter),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub frames: Vec<FrameRecord>,
    pub footer: TraceFooter,
}

fn frame_line(f: &FrameRecord) -> String {
    serde_json::to_string(&TraceRecord::Frame(f.clone())).expect("frames serialize")
}

/// Digest of the frame stream alone.
pub fn frames_digest(frames: &[FrameRecord]) -> String {
    let mut bytes = Vec::new();
    for f in frames {
        bytes.extend_from_slice(frame_line(f).as_bytes());
        bytes.push(b'\n');
    }
    sha256_hex(&bytes)
}

impl Trace {
    pub fn new(
        scenario: &Scenario,
        setup: EpisodeSetup,
        frames: Vec<FrameRecord>,
        status: TerminalStatus,
        quality: QualityScore,
    ) -> Self {
        let footer = TraceFooter {
            status,
            frame_count: frames.len() as u64,
            frames_digest: frames_digest(&frames),
            quality,
        };
        Self {
            header: TraceHeader {
                format_version: TRACE_FORMAT_VERSION,
                scenario_digest: scenario.digest(),
                rng_seed: scenario.rng_seed,
                scenario: scenario.clone(),
                setup,
            },
            frames,
            footer,
        }
    }

    pub fn status(&self) -> &TerminalStatus {
        &self.footer.status
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let header = serde_json::to_string(&TraceRecord::Header(Box::new(self.header.clone())))
            .expect("header serializes");
        out.extend_from_slice(header.as_bytes());
        out.push(b'\n');
        for f in &self.frames {
            out.extend_from_slice(frame_line(f).as_bytes());
            out.push(b'\n');
        }
        let footer = serde_json::to_string(&TraceRecord::Footer(self.footer.clone()))
            .expect("footer serializes");
        out.extend_from_slice(footer.as_bytes());
        out.push(b'\n');
        out
    }

    /// Digest of the complete serialized trace.
    pub fn digest(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TraceError> {
        let mut header = None;
        let mut frames = Vec::new();
        let mut footer = None;
        let mut offset = 0usize;
        for raw in bytes.split_inclusive(|&b| b == b'\n') {
            let start = offset;
            offset += raw.len();
            if footer.is_some() {
                return Err(TraceError::Parse {
                    offset: start,
                    message: "data after footer".into(),
                });
            }
            if raw.last() != Some(&b'\n') {
                return Err(TraceError::Truncated {
                    offset: start,
                    message: "last record is not newline-terminated".into(),
                });
            }
            let line: TraceRecord =
                serde_json::from_slice(&raw[..raw.len() - 1]).map_err(|e| TraceError::Parse {
                    offset: start,
                    message: e.to_string(),
                })?;
            match line {
                TraceRecord::Header(h) if header.is_none() && frames.is_empty() => {
                    if h.format_version != TRACE_FORMAT_VERSION {
                        return Err(TraceError::UnsupportedVersion(h.format_version));
                    }
                    header = Some(*h);
                }
                TraceRecord::Frame(f) if header.is_some() => frames.push(f),
                TraceRecord::Footer(f) if header.is_some() => footer = Some(f),
                _ => {
                    return Err(TraceError::Parse {
                        offset: start,
                        message: "record out of order".into(),
                    })
                }
            }
        }
        let Some(header) = header else {
            return Err(TraceError::Truncated {
                offset,
                message: "missing header".into(),
            });
        };
        let Some(footer) = footer else {
            return Err(TraceError::Truncated {
                offset,
                message: "missing footer".into(),
            });
        };
        if footer.frame_count != frames.len() as u64 {
            return Err(TraceError::Truncated {
                offset,
                message: format!(
                    "footer declares {} frames, found {}",
                    footer.frame_count,
                    frames.len()
                ),
            });
        }
        let actual = header.scenario.digest();
        if actual != header.scenario_digest {
            return Err(TraceError::ScenarioDigest {
                expected: header.scenario_digest,
                actual,
            });
        }
        Ok(Self {
            header,
            frames,
            footer,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let path = path.as_ref();
        let io = |e| TraceError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| TraceError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_bytes(&bytes)
    }
}
