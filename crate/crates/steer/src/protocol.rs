//! Wire messages. Every message is a JSON object with a `type` field;
//! numeric arrays in frames travel as base64 of little-endian `f32`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use omps_core::config::RunConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteerError};

pub const PROTOCOL_VERSION: u32 = 1;

/// Messages a client may send: the version handshake or a command.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Hello { proto: u32 },
    Command(SessionCommand),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Hello {
    #[serde(rename = "type")]
    _type: String,
    proto: u32,
}

/// Operator commands applied to the session's simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionCommand {
    /// Replace the simulation. Give either a full `config` or a `preset`
    /// name; `tau_per_second` sets how much simulated time a wall second buys.
    Configure {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<Box<RunConfig>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau_per_second: Option<f64>,
    },
    Start,
    Pause,
    Resume,
    /// New holding beam amplitude `E0` and width `sigma_x`.
    SetPump { amplitude: f64, width: f64 },
    /// Gaussian address beam switched on now for `duration`.
    AddBeam {
        id: u32,
        center: f64,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        width: f64,
        duration: f64,
    },
    RemoveBeam { id: u32 },
    SnapshotRequest,
    Shutdown,
}

impl SessionCommand {
    pub fn name(&self) -> &'static str {
        match self {
            SessionCommand::Configure { .. } => "configure",
            SessionCommand::Start => "start",
            SessionCommand::Pause => "pause",
            SessionCommand::Resume => "resume",
            SessionCommand::SetPump { .. } => "set_pump",
            SessionCommand::AddBeam { .. } => "add_beam",
            SessionCommand::RemoveBeam { .. } => "remove_beam",
            SessionCommand::SnapshotRequest => "snapshot_request",
            SessionCommand::Shutdown => "shutdown",
        }
    }
}

/// Address beam as drawn over the plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamOverlay {
    pub id: u32,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub start: f64,
    pub stop: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub tau: f64,
    /// Field grid points merged into each transmitted sample.
    pub decimation: usize,
    pub samples: usize,
    /// Sample positions; sent with the first frame after (re)configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    pub intensity: String,
    pub z: String,
    pub beams: Vec<BeamOverlay>,
    pub steady: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Unconfigured,
    Paused,
    Running,
    Diverged,
    Closed,
}

/// Messages the server sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello { proto: u32, session: u64 },
    Ack { command: String, tau: f64 },
    Error { message: String },
    Frame(FrameMessage),
    /// Full-resolution state in the binary snapshot format, base64 encoded.
    Snapshot { tau: f64, data: String },
    Status { state: SessionState, tau: f64, message: String },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error { message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

pub fn parse_client(text: &str) -> Result<ClientMessage> {
    let bad = |e: serde_json::Error| SteerError::Protocol(e.to_string());
    let value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
    if value.get("type").and_then(|t| t.as_str()) == Some("hello") {
        let h: Hello = serde_json::from_value(value).map_err(bad)?;
        return Ok(ClientMessage::Hello { proto: h.proto });
    }
    let cmd: SessionCommand = serde_json::from_value(value.clone()).map_err(bad)?;
    // field-less commands are not covered by `deny_unknown_fields`
    let known = serde_json::to_value(&cmd).map_err(bad)?;
    if let (Some(given), Some(known)) = (value.as_object(), known.as_object()) {
        if let Some(extra) = given.keys().find(|k| !known.contains_key(*k)) {
            return Err(SteerError::Protocol(format!("unknown field `{extra}` for `{}`", cmd.name())));
        }
    }
    Ok(ClientMessage::Command(cmd))
}

pub fn encode_f32(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(4 * values.len());
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_f32(text: &str) -> Result<Vec<f32>> {
    let bytes = STANDARD.decode(text).map_err(|e| SteerError::Protocol(format!("bad base64 array: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(SteerError::Protocol(format!("array payload of {} bytes is not a whole number of f32", bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}
