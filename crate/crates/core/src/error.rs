use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    MeshParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid sensor specification: {0}")]
    InvalidSensor(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{0}")]
    Metric(String),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("invalid trajectory: {0}")]
    Trajectory(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed map file {path}: {message}")]
    MapFormat { path: PathBuf, message: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
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
            Error::Invariant(_) => 4,
            _ => 2,
        }
    }
}
