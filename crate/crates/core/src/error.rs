use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("shape parameter {gamma} outside admissible interval ({lower}, {upper})")]
    GammaOutOfBounds { gamma: f64, lower: f64, upper: f64 },
    #[error("quadrature failed to reach tolerance: estimate {estimate}, error {error}")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("root bracket [{lo}, {hi}] does not contain a sign change")]
    NoBracket { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient draws: need at least {needed}, got {got}")]
    InsufficientDraws { needed: usize, got: usize },
    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("degenerate draws: {0}")]
    DegenerateDraws(String),
    #[error("operation requires the {expected} link")]
    WrongLink { expected: &'static str },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
