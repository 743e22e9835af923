use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("density field is empty (total density is zero)")]
    EmptyField,

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config key `{key}`")]
    UnknownConfigKey { key: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    Diverged { epoch: usize, batch: usize },

    #[error("repository is empty")]
    EmptyRepository,

    #[error("missing density payload for repository entry {0}")]
    MissingDensity(u32),

    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownConfigKey { .. } | Error::Config(_) | Error::Json(_) => 2,
            Error::DimensionMismatch(_) => 3,
            Error::NotFound(_) => 1,
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 1,
            _ => 1,
        }
    }
}
