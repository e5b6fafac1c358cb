//! Semidefinite programs over Chebyshev-basis Gram matrices: a conic problem
//! type, a native interior-point backend, and the SOS programs built on it.

pub mod backend;
pub mod error;
pub mod gram;
pub mod ipm;
pub mod lasserre;
pub mod problem;
pub mod sosdist;
pub mod vrd;

pub use backend::{backend_by_name, tolerance_from_env, NativeIpm, SdpSolution, SolverBackend, SolverReport, SolverStatus};
pub use error::{Result, SdpError};
pub use problem::{LinearForm, ScalarKind, SdpProblem};
pub use gram::{linearize_products, GramSOS, Linearization};
pub use lasserre::{lasserre_bound, LasserreResult};
pub use sosdist::{loglog_slope, min_sos_cheb_distance, SosDistResult};
pub use vrd::{compute_vrd, kernel_eigen_check, VrdResult};
