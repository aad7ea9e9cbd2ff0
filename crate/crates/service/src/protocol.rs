//! WebSocket message shapes.
//!
//! Text frames carry JSON tagged by `type`. Binary frames carry one encoded
//! composite behind an 8-byte header: the frame index and the params hash,
//! both little-endian `u32`.

use depthmatte::stream::FrameTimings;
use depthmatte::{MatteParams, ParamUpdate};
use serde::{Deserialize, Serialize};

pub const HEADER_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SetParams { params: ParamUpdate },
    SelectBackground { name: String },
    Pause,
    Resume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Timings {
        #[serde(flatten)]
        timings: FrameTimings,
    },
    ParamsAck {
        hash: u32,
        /// Structuring-element size the kernel slider resolved to.
        kernel: usize,
        params: MatteParams,
    },
    Error {
        fields: Vec<String>,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(fields: Vec<String>, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            fields,
            message: message.into(),
        }
    }

    pub fn ack(params: MatteParams) -> Self {
        ServerMessage::ParamsAck {
            hash: params.snapshot_hash(),
            kernel: params.kernel(),
            params,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

pub fn frame_header(frame_index: u64, params_hash: u32) -> [u8; HEADER_LEN] {
    let mut h = [0; HEADER_LEN];
    h[..4].copy_from_slice(&(frame_index as u32).to_le_bytes());
    h[4..].copy_from_slice(&params_hash.to_le_bytes());
    h
}

/// Splits a binary frame into `(frame_index, params_hash, payload)`.
pub fn parse_frame(bytes: &[u8]) -> Option<(u32, u32, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return None;
    }
    let index = u32::from_le_bytes(bytes[..4].try_into().ok()?);
    let hash = u32::from_le_bytes(bytes[4..8].try_into().ok()?);
    Some((index, hash, &bytes[HEADER_LEN..]))
}

/// Field name out of a serde "unknown field `x`" or "invalid type ... for
/// field" style message, when there is one.
pub(crate) fn field_from_serde(message: &str) -> Vec<String> {
    message
        .split_once("unknown field `")
        .and_then(|(_, rest)| rest.split_once('`'))
        .map(|(field, _)| vec![field.to_string()])
        .unwrap_or_default()
}
