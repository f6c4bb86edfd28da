use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a formula.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// Not enough data to evaluate a key length (no coincidences, fewer than two bits).
    #[error("no data: {0}")]
    NoData(String),

    #[error("invalid config field `{field}`: {constraint}")]
    Validation { field: String, constraint: String },

    #[error("failed to parse {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}
