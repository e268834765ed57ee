use thiserror::Error;

/// Errors produced by scene validation, correlation assembly, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient lag support: need {needed} lags, grid supports {available}")]
    InsufficientLagSupport { needed: usize, available: usize },

    #[error("conditioning failure: {0}")]
    Conditioning(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
