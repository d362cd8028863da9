use std::io;
use std::path::PathBuf;

use pfl_core::Error as CoreError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("config file {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error("report: {0}")]
    Report(String),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const DIVERGED: i32 = 4;
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(CoreError::Infeasible(_)) => exit::INFEASIBLE,
            Self::Core(CoreError::Divergence { .. }) => exit::DIVERGED,
            Self::Core(CoreError::Io(_)) | Self::Io { .. } => exit::FAILURE,
            Self::Core(_) | Self::ConfigFile { .. } | Self::Usage(_) | Self::Report(_) => exit::CONFIG,
        }
    }
}
