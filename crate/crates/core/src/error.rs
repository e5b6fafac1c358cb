use thiserror::Error;

/// Errors raised by the polynomial, kernel and certificate layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PklError {
    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coefficient in polynomial")]
    NonFinite,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("degree {degree} exceeds the monomial bridge limit of {limit}")]
    DegreeLimit { degree: usize, limit: usize },

    #[error("schedule infeasible at r = {r}, d = {d}: r/log r = {ratio:.3} < {required:.3}")]
    InfeasibleSchedule {
        r: u64,
        d: u32,
        ratio: f64,
        required: f64,
    },

    #[error("exp approximation failed: degree cap {cap} reached with error {error:e} > {delta:e}")]
    ExpApprox { cap: usize, error: f64, delta: f64 },

    #[error("negative value {value:e} at quadrature node {node:?}; the image would not be SOS")]
    NegativeNode { node: Vec<f64>, value: f64 },

    #[error("tensor quadrature needs {needed} nodes, above the cap of {cap}")]
    TensorOverflow { needed: u128, cap: usize },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for PklError {
    fn from(e: serde_json::Error) -> Self {
        PklError::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PklError>;
