use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum SkeError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),

    #[error("axis usage error: {0}")]
    AxisUsage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("channel is not degraded: {0}")]
    NotDegraded(String),

    #[error("infeasible coding parameters: {0}")]
    Infeasible(String),

    #[error("codebook construction failed: {0}")]
    Codebook(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, SkeError>;
