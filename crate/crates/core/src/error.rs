use std::path::PathBuf;

use thiserror::Error;

use crate::params::FieldError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: expected {expected} bytes for a {width}x{height} depth raster, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        width: usize,
        height: usize,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("cannot encode image: {0}")]
    Encode(String),

    #[error("target {target_w}x{target_h} is smaller than source {source_w}x{source_h}")]
    BadTarget {
        source_w: usize,
        source_h: usize,
        target_w: usize,
        target_h: usize,
    },

    #[error("invalid kernel: {0}")]
    BadKernel(String),

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid benchmark options: {0}")]
    BenchOptions(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("rejected parameters: {}", format_fields(.0))]
    Validation(Vec<FieldError>),

    #[error("unknown {kind} strategy `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("source exhausted at {what} frame {index}")]
    SourceExhausted { what: &'static str, index: u64 },

    #[error("frame {frame_index}: {source}")]
    Stage {
        frame_index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("sink: {0}")]
    Sink(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_w: left.0,
            left_h: left.1,
            right_w: right.0,
            right_h: right.1,
        }
    }

    pub(crate) fn at_frame(self, frame_index: u64) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                frame_index,
                source: Box::new(e),
            },
        }
    }
}

fn format_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
