use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid center set: {0}")]
    InvalidCenters(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("infeasible transshipment: total supply {supply} != total demand {demand}")]
    Infeasible { supply: i64, demand: i64 },

    #[error("integer overflow risk: {0}; lower the cost scale")]
    Overflow(String),

    #[error("seeding failed: {0}")]
    Seeding(String),

    #[error("enumeration bound exceeded: {0}")]
    TooLarge(String),

    #[error("invariant violated: {0}")]
    Internal(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("latitude {0} out of range (|lat| must be below 89 degrees)")]
    Latitude(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
