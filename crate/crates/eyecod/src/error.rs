use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Workload or config validation failure. `path` is a JSON pointer or a layer id.
    #[error("validation failed at {path}: {msg}")]
    Validation { path: String, msg: String },

    #[error("no pupil pixels")]
    NoPupil,

    #[error("no sclera pixels")]
    NoSclera,

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("plan inconsistency at index {index}: {msg}")]
    Plan { index: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad inputs rather than runtime failures.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Simulation(_) | Error::Infeasible(_))
    }
}
