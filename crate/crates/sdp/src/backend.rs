//! Solver reports and swappable backends.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdpError};
use crate::ipm::{self, IpmOptions, DEFAULT_TOL};
use crate::problem::SdpProblem;

/// Environment variable overriding the default backend tolerance.
pub const TOL_ENV: &str = "PKL_SOLVER_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    Inaccurate,
    Failed,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::Inaccurate => "inaccurate",
            SolverStatus::Failed => "failed",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    /// Primal objective.
    pub objective: f64,
    pub dual_objective: f64,
    /// Relative primal infeasibility `‖b - A(X)‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// Relative dual infeasibility.
    pub dual_residual: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    #[serde(default)]
    pub message: String,
}

impl SolverReport {
    /// True when the primal solution may be used as a (possibly rough) answer.
    pub fn usable(&self) -> bool {
        matches!(self.status, SolverStatus::Optimal | SolverStatus::Inaccurate)
    }

    /// `Ok` for usable reports, otherwise an [`SdpError::Unsolved`].
    pub fn require_usable(&self, what: &str) -> Result<()> {
        if self.usable() {
            return Ok(());
        }
        Err(SdpError::Unsolved {
            what: what.to_string(),
            status: self.status,
            objective: self.objective,
            message: self.message.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub report: SolverReport,
    /// Primal PSD blocks, row-major.
    #[serde(with = "blocks_serde")]
    pub blocks: Vec<DMatrix<f64>>,
    pub scalars: Vec<f64>,
    /// Dual multipliers, one per constraint.
    pub y: Vec<f64>,
}

mod blocks_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(blocks: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Vec<f64>>> = blocks
            .iter()
            .map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let rows: Vec<Vec<Vec<f64>>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|m| {
                let n = m.len();
                if m.iter().any(|r| r.len() != n) {
                    return Err(serde::de::Error::custom("blocks must be square"));
                }
                Ok(DMatrix::from_row_iterator(n, n, m.into_iter().flatten()))
            })
            .collect()
    }
}

pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;
    fn tolerance(&self) -> f64;
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution>;
}

/// Default tolerance, or the value of `PKL_SOLVER_TOL` when it parses as a
/// positive float.
pub fn tolerance_from_env() -> f64 {
    std::env::var(TOL_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|t| t.is_finite() && *t > 0.0)
        .unwrap_or(DEFAULT_TOL)
}

#[derive(Debug, Clone, Default)]
pub struct NativeIpm {
    pub options: IpmOptions,
}

impl NativeIpm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tol(tol: f64) -> Self {
        Self { options: IpmOptions { tol, ..IpmOptions::default() } }
    }
}

impl SolverBackend for NativeIpm {
    fn name(&self) -> &str {
        "native"
    }

    fn tolerance(&self) -> f64 {
        self.options.tol
    }

    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        ipm::solve(problem, &self.options)
    }
}

/// Hands the problem to an external program as a JSON file and reads back a
/// solution JSON.
///
/// The program is invoked as `<program> <args..> <problem.json> <solution.json>`
/// and must write an [`SdpSolution`].
#[derive(Debug, Clone)]
pub struct ExternalBackend {
    pub program: String,
    pub args: Vec<String>,
    pub workdir: PathBuf,
    pub tol: f64,
}

static EXTERNAL_COUNTER: AtomicUsize = AtomicUsize::new(0);

impl ExternalBackend {
    pub fn new(program: impl Into<String>, tol: f64) -> Self {
        Self { program: program.into(), args: Vec::new(), workdir: std::env::temp_dir(), tol }
    }

    fn paths(&self) -> (PathBuf, PathBuf) {
        let k = EXTERNAL_COUNTER.fetch_add(1, Ordering::SeqCst);
        let stem = format!("pkl-sdp-{}-{k}", std::process::id());
        (self.workdir.join(format!("{stem}.problem.json")), self.workdir.join(format!("{stem}.solution.json")))
    }
}

pub fn read_solution(path: &Path) -> Result<SdpSolution> {
    let s = std::fs::read_to_string(path).map_err(|e| SdpError::Io(e.to_string()))?;
    Ok(serde_json::from_str(&s)?)
}

pub fn write_solution(sol: &SdpSolution, path: &Path) -> Result<()> {
    let s = serde_json::to_string(sol)?;
    std::fs::write(path, s).map_err(|e| SdpError::Io(e.to_string()))
}

impl SolverBackend for ExternalBackend {
    fn name(&self) -> &str {
        &self.program
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }

    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        problem.validate()?;
        let (pin, pout) = self.paths();
        problem.export(&pin)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&pin)
            .arg(&pout)
            .status()
            .map_err(|e| SdpError::Solver(format!("cannot run {}: {e}", self.program)));
        let out = status.and_then(|st| {
            if st.success() {
                read_solution(&pout)
            } else {
                Err(SdpError::Solver(format!("{} exited with {st}", self.program)))
            }
        });
        let _ = std::fs::remove_file(&pin);
        let _ = std::fs::remove_file(&pout);
        let sol = out?;
        if sol.blocks.len() != problem.blocks.len()
            || sol.blocks.iter().zip(&problem.blocks).any(|(m, &n)| m.nrows() != n)
            || sol.scalars.len() != problem.scalars.len()
        {
            return Err(SdpError::Solver("external solution does not match the problem shape".into()));
        }
        Ok(sol)
    }
}

/// `native` or `external:<program>`.
pub fn backend_by_name(name: &str, tol: f64) -> Result<Box<dyn SolverBackend>> {
    if name == "native" {
        return Ok(Box::new(NativeIpm::with_tol(tol)));
    }
    if let Some(prog) = name.strip_prefix("external:") {
        if !prog.is_empty() {
            return Ok(Box::new(ExternalBackend::new(prog, tol)));
        }
    }
    Err(SdpError::UnknownBackend(name.to_string()))
}

/// Evaluates the primal objective of `problem` at a solution.
pub fn objective_at(problem: &SdpProblem, sol: &SdpSolution) -> f64 {
    let mut s = 0.0;
    for e in &problem.objective.entries {
        s += e.value * sol.blocks[e.block][(e.i, e.j)];
    }
    for &(k, v) in &problem.objective.scalars {
        s += v * sol.scalars[k];
    }
    s
}

/// Largest absolute constraint violation at a solution.
pub fn max_violation(problem: &SdpProblem, sol: &SdpSolution) -> f64 {
    problem
        .constraints
        .iter()
        .map(|c| {
            let mut s = 0.0;
            for e in &c.form.entries {
                s += e.value * sol.blocks[e.block][(e.i, e.j)];
            }
            for &(k, v) in &c.form.scalars {
                s += v * sol.scalars[k];
            }
            (s - c.rhs).abs()
        })
        .fold(0.0, f64::max)
}
