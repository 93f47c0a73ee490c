use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, the protocol engine and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid link geometry: {0}")]
    InvalidGeometry(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("length mismatch: {0}")]
    Length(String),

    #[error("degenerate measurement: {0}")]
    DegenerateMeasurement(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("invalid experiment config: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
