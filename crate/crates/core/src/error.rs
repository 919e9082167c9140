use std::path::PathBuf;

/// Errors raised anywhere in the forecasting pipeline.
///
/// The command-line driver maps each variant onto one exit-code family
/// (configuration, data, training).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shapes that do not fit together.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A numeric argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Misuse of an API contract (non-scalar loss, empty series, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// Invalid model, split or generator configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that fails validation.
    #[error("invalid data: {0}")]
    Data(String),

    /// Problems reading tabular input, located by file and line.
    #[error("ingestion error in {path}:{line}: {message}")]
    Ingest { path: PathBuf, line: u64, message: String },

    /// A score whose normalizer vanishes (e.g. a constant historical record).
    #[error("undefined score: {0}")]
    UndefinedScore(String),

    /// Training-time failures (NaN gradients, divergence).
    #[error("training error: {0}")]
    Training(String),

    /// Steps executed out of order (e.g. Hydra phase 2 before phase 1).
    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn ingest(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Ingest { path: path.into(), line, message: message.into() }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
