use thiserror::Error;

/// Errors raised by the operator substrate and the analysis pipelines built on it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: d_A = {d_a}, d_B = {d_b} (both must be at least 2)")]
    InvalidDims { d_a: usize, d_b: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("product vector violates the range criterion: {0}")]
    RangeCriterion(String),

    #[error("subtraction rejected: admissible weight {0:e} too small or ranks did not drop")]
    StepRejected(f64),

    #[error("operator is negative on a product vector (value {0:e}); not an entanglement witness")]
    NotAWitness(f64),

    #[error("edge state is numerically degenerate: product minimum {0:e} too small to certify")]
    DegenerateEdge(f64),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("malformed operator JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
