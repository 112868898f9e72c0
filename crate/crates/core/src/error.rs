use std::path::PathBuf;

use thiserror::Error;

use crate::eval::EvalError;
use crate::ews::{EwsError, SinkError};
use crate::nn::NnError;
use crate::preprocess::PreprocessError;
use crate::seq2seq::{CheckpointError, Seq2SeqError};
use crate::telemetry::TelemetryError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Any failure surfaced by the pipeline, classified for process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Seq2Seq(#[from] Seq2SeqError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Ews(#[from] EwsError),
    #[error(transparent)]
    Sink(#[from] SinkError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 usage, 2 data or validation, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => EXIT_USAGE,
            Error::Io { .. } | Error::Sink(_) => EXIT_IO,
            Error::Telemetry(TelemetryError::Open { .. } | TelemetryError::Io(_)) => EXIT_IO,
            Error::Preprocess(PreprocessError::Io(_)) => EXIT_IO,
            Error::Checkpoint(CheckpointError::Io { .. }) => EXIT_IO,
            Error::Eval(EvalError::Io { .. }) => EXIT_IO,
            _ => EXIT_DATA,
        }
    }
}
