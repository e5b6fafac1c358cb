//! Explicit Putinar-type sum-of-squares certificates on `[-1,1]^n` built from
//! polynomial kernels in the Chebyshev basis.

pub mod certificates;
pub mod cheb;
pub mod chebn;
pub mod error;
pub mod expkernel;
pub mod gauss;
pub mod json;
pub mod kernel_op;
pub mod oracle;
pub mod quadrature;
pub mod sos;

pub use cheb::{ChebGrid, ChebPoly1};
pub use chebn::{ChebPolyN, MultiIndex};
pub use error::{PklError, Result};

/// Residual tolerance, in coefficient 1-norm, for treating two polynomials
/// as equal.
pub const RESIDUAL_TOL: f64 = 1e-10;
