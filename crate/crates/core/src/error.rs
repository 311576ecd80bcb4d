use std::path::PathBuf;

/// Errors raised by the attribution engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss for sample {sample_id}")]
    NonFiniteLoss { sample_id: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("sample index {index} is not covered (only {available} samples)")]
    UnknownSample { index: usize, available: usize },

    #[error("{what}: {n} players exceeds the enumeration cap of {max}")]
    TooManyPlayers { what: &'static str, n: usize, max: usize },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: line {line}: {message}")]
    Csv { path: PathBuf, line: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("cleaning removed every training example")]
    AllRemoved,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch { op, detail: detail.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
