use thiserror::Error;

/// Errors raised by the samplers, targets, oracles and metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Every log-weight is `-inf`, so no probability vector exists.
    #[error("degenerate weights: all log-weights are -inf")]
    DegenerateWeights,

    /// The weights collapsed onto a single atom for too many consecutive iterations.
    #[error("weights degenerate at iteration {iteration}: {reason}")]
    WeightCollapse { iteration: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A gradient or position became non-finite.
    #[error("non-finite value for particle {index} at iteration {iteration}")]
    NonFinite { index: usize, iteration: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("target does not support exact sampling: {0}")]
    UnsupportedTarget(String),

    /// Moment integration produced a covariance that is no longer SPD.
    #[error("covariance lost positive definiteness at t = {time}")]
    IntegrationBlowup { time: f64 },

    #[error("birth-death sweep removed every particle at iteration {iteration}")]
    PopulationCollapse { iteration: usize },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
