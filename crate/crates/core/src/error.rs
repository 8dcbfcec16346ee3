use thiserror::Error;

/// Errors raised by the estimator and its supporting math.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (|S + S^T|_F = {asymmetry:e})")]
    NonSkewInput { asymmetry: f64 },

    #[error("rotation angle {angle} rad is too close to pi for the principal logarithm")]
    NearPiSingularity { angle: f64 },

    #[error("reference directions are collinear or not unit length")]
    DegenerateDirections,

    #[error("Riccati state lost positive definiteness (step dt = {dt})")]
    LostPositivity { dt: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
