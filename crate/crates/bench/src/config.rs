//! Validated parameters shared by the `pkl` subcommands.

use std::path::{Path, PathBuf};

use pkl_core::json::poly_from_json;
use pkl_core::ChebPolyN;
use pkl_sdp::{backend_by_name, tolerance_from_env, SolverBackend};

use crate::error::{BenchError, Result};

/// Defaults: backend `native`, tolerance from `PKL_SOLVER_TOL` or `1e-8`,
/// output to stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: String,
    pub tol: f64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { backend: "native".into(), tol: tolerance_from_env(), out: None }
    }
}

impl RunConfig {
    /// An explicit `tol` wins over the environment.
    pub fn new(backend: Option<String>, tol: Option<f64>, out: Option<PathBuf>) -> Result<Self> {
        let c = Self {
            backend: backend.unwrap_or_else(|| "native".into()),
            tol: tol.unwrap_or_else(tolerance_from_env),
            out,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0 && self.tol < 1.0) {
            return Err(BenchError::Precondition(format!("tolerance must be in (0, 1), got {}", self.tol)));
        }
        backend_by_name(&self.backend, self.tol)?;
        Ok(())
    }

    pub fn backend(&self) -> Result<Box<dyn SolverBackend>> {
        Ok(backend_by_name(&self.backend, self.tol)?)
    }
}

pub fn read_poly(path: &Path) -> Result<ChebPolyN> {
    let s = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Precondition(format!("cannot read {}: {e}", path.display())))?;
    Ok(poly_from_json(&s)?)
}
