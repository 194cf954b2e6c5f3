use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the scan pipeline.
///
/// Every variant maps onto a short, stable class name (see [`Error::class`])
/// so command-line front ends can report failures in a machine-parsable way.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}:{column}: {message}")]
    Schema {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    Network(String),

    #[error("path enumeration produced more than {cap} paths (reached {count}); tighten the length bounds or raise the cap")]
    PathCap { count: usize, cap: usize },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("forecast failed for sensor {sensor}: {message}")]
    Forecast { sensor: String, message: String },

    #[error("covariance matrix is ill-conditioned: Cholesky failed with jitter up to {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("calibration needs at least {required} samples, got {got}")]
    CalibrationSize { required: usize, got: usize },

    #[error("calibration aborted on day {day}: {message}")]
    Calibration { day: usize, message: String },

    #[error("{failed} of {total} trials failed, more than the 10% allowed for aggregation")]
    TooManyFailures { failed: usize, total: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "schema",
            Error::Network(_) => "network",
            Error::PathCap { .. } => "path-cap",
            Error::Grid(_) => "grid",
            Error::Forecast { .. } => "forecast",
            Error::IllConditioned { .. } => "ill-conditioned",
            Error::CalibrationSize { .. } => "calibration-size",
            Error::Calibration { .. } => "calibration",
            Error::TooManyFailures { .. } => "too-many-failures",
            Error::Config(_) => "config",
            Error::InvalidInput(_) => "input",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(
        path: impl Into<PathBuf>,
        line: u64,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Schema {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }
}
