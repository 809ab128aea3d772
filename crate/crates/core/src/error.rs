use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition or invariant of an input was violated.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The time step fell below `dt_min`; carries the last accepted time.
    #[error("time step underflow at t = {t:e}: dt = {dt:e} < dt_min = {dt_min:e} ({reason})")]
    StepUnderflow {
        t: f64,
        dt: f64,
        dt_min: f64,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
