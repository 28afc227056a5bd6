use std::path::PathBuf;

/// Everything a command can fail with, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: ccc_core::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Core(ccc_core::Error),
    /// A property suite ran and did not pass.
    #[error("{0}")]
    PropertyFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Checkpoint { .. } | CliError::Csv(_) | CliError::Json(_) => 3,
            CliError::Core(ccc_core::Error::Config(_) | ccc_core::Error::UnsupportedEnvironment(_)) => 2,
            CliError::Core(ccc_core::Error::InvalidParameter { .. }) => 2,
            CliError::Core(_) | CliError::PropertyFailed(_) => 1,
        }
    }
}

impl From<ccc_core::Error> for CliError {
    fn from(e: ccc_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
