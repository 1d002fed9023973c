//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("invalid mixture parameters: {0}")]
    InvalidParams(String),
    #[error("invalid model family: {0}")]
    InvalidFamily(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least as many observations as components: n = {n}, K = {k}")]
    TooFewObservations { n: usize, k: usize },
    #[error("degenerate data: all observations are identical")]
    DegenerateData,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("value {0} outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("weight alpha = {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("unknown criterion name: {0}")]
    UnknownCriterion(String),
    #[error("per-K fit sequences do not cover the same component range")]
    KRangeMismatch,
    #[error("estimator mismatch: expected a {expected} fit, got a {got} fit")]
    EstimatorMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("quadrature rule too coarse: refinement moved the value by {0:.3e}")]
    RuleTooCoarse(f64),
    #[error("parameters lie on the feasible-set boundary; the reparameterized gradient is undefined there")]
    OnBoundary,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{failed} of {total} replicates failed, above the 5% tolerance")]
    TooManyFailures { failed: usize, total: usize },
    #[error("empty parameter grid")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
