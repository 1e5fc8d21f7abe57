use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] phasestat_core::Error),
    /// Outputs were written but failed a check.
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 1 for usage, configuration and i/o problems, 2 for validation or
    /// accuracy failures of a computation.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io { .. } | Self::Json(_) => 1,
            Self::Core(phasestat_core::Error::Configuration(_)) => 1,
            Self::Core(_) | Self::Validation(_) => 2,
        }
    }
}
