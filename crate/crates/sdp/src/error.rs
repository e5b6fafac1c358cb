use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver failed: {0}")]
    Solver(String),

    /// The backend ran but did not reach a usable answer.
    #[error("{what}: solver status {status} ({message}), last objective {objective}")]
    Unsolved { what: String, status: crate::backend::SolverStatus, objective: f64, message: String },

    #[error("unknown backend {0:?}")]
    UnknownBackend(String),

    #[error("io: {0}")]
    Io(String),

    #[error("json: {0}")]
    Json(String),

    #[error(transparent)]
    Core(#[from] pkl_core::PklError),
}

impl From<serde_json::Error> for SdpError {
    fn from(e: serde_json::Error) -> Self {
        SdpError::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SdpError>;
