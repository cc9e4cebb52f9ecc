use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: {what} size mismatch (expected {expected}, got {actual})")]
    DimensionMismatch {
        layer: usize,
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("layer {layer}: non-finite value in {what}")]
    NonFinite { layer: usize, what: &'static str },

    #[error("spike train shape mismatch: expected {expected_neurons} neurons x {expected_steps} steps, got {neurons} x {steps}")]
    TrainShape {
        expected_neurons: usize,
        expected_steps: usize,
        neurons: usize,
        steps: usize,
    },

    #[error("input values outside [0, 1] at indices {indices:?}")]
    InputOutOfRange { indices: Vec<usize> },

    #[error("channel {channel}: modulated threshold {threshold} is not positive (alpha too large for input)")]
    ThresholdNonPositive { channel: usize, threshold: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("chip capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid mapping: {0}")]
    InvalidMapping(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("plot rendering failed: {0}")]
    Plot(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (configuration, files, usage)
    /// rather than by a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. }
        )
    }
}
