use pkl_core::PklError;
use pkl_sdp::SdpError;
use thiserror::Error;

pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] PklError),

    #[error(transparent)]
    Sdp(#[from] SdpError),
}

impl BenchError {
    /// Process exit code for the CLI: 3 for solver failures, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Sdp(SdpError::Solver(_) | SdpError::Unsolved { .. }) => EXIT_SOLVER,
            _ => EXIT_PRECONDITION,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
