use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or input value violates a documented invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("minute {minute} outside the tariff day [1, {max}]")]
    MinuteOutOfRange { minute: usize, max: usize },

    #[error("action {0} kW is not one of the configured action levels")]
    UnknownAction(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{0}")]
    Data(String),

    /// Training diverged; carries the step and the offending quantity.
    #[error("numerical failure at step {step}: {msg}")]
    Numerical { step: u64, msg: String },

    #[error("checkpoint mismatch: {0}")]
    Mismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for validation problems, 3 for runtime or numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::MinuteOutOfRange { .. }
            | Error::UnknownAction(_)
            | Error::LengthMismatch { .. }
            | Error::Parse { .. }
            | Error::Data(_)
            | Error::Mismatch(_) => 2,
            _ => 3,
        }
    }
}
