use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the scheduling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("station id {id} out of range (station count {count})")]
    StationOutOfRange { id: usize, count: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("expected {expected} series, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("missing forecast entry for t={t}, step={step}, station={station}")]
    MissingForecast {
        t: usize,
        step: usize,
        station: usize,
    },

    #[error("infeasible flow: {0} units of supply cannot reach a sink")]
    Infeasible(i64),

    #[error("network contains a negative-cost cycle")]
    NegativeCycle,

    #[error("inconsistent flow: {0}")]
    InconsistentFlow(String),

    #[error("instance exceeds brute-force guard: {0}")]
    GuardExceeded(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
