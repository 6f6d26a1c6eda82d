//! Wire types, version 1. Every JSON body and stream frame carries `"v": 1`.
//! The full schema is written out in `docs/protocol.md`.

use gmob_core::control::CommandKind;
use gmob_core::data::Quartile;
use gmob_core::sim::{GestureOutcome, LogRow, Mission, PipelineConfig, RowStatus, TickInfo, TrackMetrics};
use serde::{Deserialize, Serialize};

pub const VERSION: u32 = 1;

fn v1() -> u32 {
    VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// one tick per `dt` of wall-clock time
    #[default]
    Realtime,
    /// ticks run back to back
    Accelerated,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default = "v1")]
    pub v: u32,
    /// pipeline config as a JSON object; absent fields take defaults
    #[serde(default)]
    pub config: Option<PipelineConfig>,
    /// the same config as TOML text; used when `config` is absent
    #[serde(default)]
    pub config_toml: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clock: ClockMode,
    /// include true state in stream frames and snapshots
    #[serde(default)]
    pub debug: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub v: u32,
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureRequest {
    #[serde(default = "v1")]
    pub v: u32,
    #[serde(default)]
    pub class_id: Option<usize>,
    #[serde(default)]
    pub confidence: Option<f64>,
    /// base64 of a binary PGM; replaces class_id/confidence
    #[serde(default)]
    pub pgm_base64: Option<String>,
    /// frame quartile for class payloads; images use their centroid
    #[serde(default)]
    pub quartile: Option<Quartile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GestureAck {
    Accepted {
        v: u32,
        class_id: usize,
        confidence: f64,
        quartile: Quartile,
        /// 1-based place in the session queue
        queue_position: usize,
    },
    Rejected {
        v: u32,
        class_id: usize,
        confidence: f64,
        /// `below-threshold`
        reason: String,
        threshold: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetpointView {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridView {
    pub n: usize,
    pub speeds: Vec<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveView {
    pub command: CommandKind,
    pub speed: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub v: u32,
    pub id: String,
    pub clock: ClockMode,
    pub debug: bool,
    pub seed: u64,
    pub tick: u64,
    pub t: f64,
    pub airborne: bool,
    pub idle: bool,
    pub pending: usize,
    pub est: Kinematics,
    #[serde(rename = "true", default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Kinematics>,
    pub active: Option<ActiveView>,
    pub grid: GridView,
    pub log_rows: usize,
    pub missions: Vec<String>,
    /// set if the control loop stopped on an internal error
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionRequest {
    #[serde(default = "v1")]
    pub v: u32,
    #[serde(default)]
    pub mission: Mission,
    /// defaults to the session seed
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MissionResult {
    pub v: u32,
    /// file name inside the data directory
    pub file: String,
    pub seed: u64,
    pub rows: usize,
    pub gestures: usize,
    pub skipped: usize,
    pub metrics: TrackMetrics,
    pub reference: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionClosed {
    pub v: u32,
    pub id: String,
    /// persisted live log, if it had any rows
    pub file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionList {
    pub v: u32,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub v: u32,
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Live,
    Replay,
}

/// One control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickFrame {
    pub v: u32,
    pub tick: u64,
    pub source: Source,
    pub t: f64,
    pub est: Kinematics,
    #[serde(rename = "true", default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Kinematics>,
    pub setpoint: SetpointView,
    pub command: Option<CommandKind>,
    pub speed: f64,
    pub confidence: f64,
    pub airborne: bool,
    pub status: RowStatus,
    pub cell: Option<[usize; 2]>,
    pub quartile: Option<Quartile>,
    pub progress: Option<f64>,
    /// present on the tick where a queued gesture was taken up
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<GestureOutcome>,
}

impl TickFrame {
    pub fn from_row(tick: u64, source: Source, row: &LogRow, debug: bool) -> Self {
        TickFrame {
            v: VERSION,
            tick,
            source,
            t: row.t,
            est: Kinematics {
                position: row.est_p,
                velocity: row.est_v,
                yaw: row.est_yaw,
            },
            truth: debug.then_some(Kinematics {
                position: row.true_p,
                velocity: row.true_v,
                yaw: row.true_yaw,
            }),
            setpoint: SetpointView {
                position: row.setpoint_p,
                velocity: row.setpoint_v,
            },
            command: row.command,
            speed: row.speed,
            confidence: row.confidence,
            airborne: row.airborne,
            status: row.status,
            cell: None,
            quartile: None,
            progress: None,
            outcome: None,
        }
    }

    pub fn live(info: &TickInfo, outcome: Option<GestureOutcome>, debug: bool) -> Self {
        TickFrame {
            cell: info.cell,
            quartile: info.quartile,
            progress: info.progress,
            outcome,
            ..TickFrame::from_row(info.tick, Source::Live, &info.row, debug)
        }
    }
}

/// Sent instead of ticks `from_tick..=to_tick` that a connection missed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapFrame {
    pub v: u32,
    pub from_tick: u64,
    pub to_tick: u64,
}

/// Anything the server writes on a stream socket.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamFrame {
    Tick(TickFrame),
    Gap(GapFrame),
}

impl StreamFrame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stream frames always serialize")
    }
}
