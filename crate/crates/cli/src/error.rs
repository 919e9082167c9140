use std::path::PathBuf;

use hydra_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing run artifacts: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingArtifacts(Vec<PathBuf>),

    /// A stored report that the raw prediction files do not reproduce.
    #[error("report {path} does not match its raw predictions (max difference {difference})")]
    Inconsistent { path: PathBuf, difference: f64 },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const TRAINING: i32 = 4;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::MissingArtifacts(_) | CliError::Inconsistent { .. } => exit::DATA,
            CliError::Core(e) => match e {
                Error::Config(_) => exit::CONFIG,
                Error::Data(_) | Error::Ingest { .. } | Error::UndefinedScore(_) => exit::DATA,
                Error::Training(_) | Error::Ordering(_) => exit::TRAINING,
                _ => exit::IO,
            },
        }
    }
}
