//! Lasserre lower bounds `f_(r) = max { t : f - t ∈ Q(g)_r }` on `[-1,1]^n`
//! with `g_i = 1 - x_i²`.

use std::collections::BTreeMap;

use pkl_core::certificates::{box_constraint, QuadraticModuleElement};
use pkl_core::ChebPolyN;
use serde::{Deserialize, Serialize};

use crate::backend::{SolverBackend, SolverReport};
use crate::error::{Result, SdpError};
use crate::gram::{add_coefficient_rows, linearize_products, total_degree_basis, GramSOS};
use crate::problem::{LinearForm, ScalarKind, SdpProblem};

pub const MAX_LASSERRE_VARS: usize = 3;
pub const MAX_LASSERRE_LEVEL: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LasserreResult {
    pub r: u32,
    pub value: f64,
    pub sigma0: GramSOS,
    /// Multiplier of `1 - x_i²`, one per variable.
    pub sigmas: Vec<GramSOS>,
    pub report: SolverReport,
}

impl LasserreResult {
    /// `σ₀ + Σ g_i σ_i`, which should match `f - value`.
    pub fn expand(&self) -> ChebPolyN {
        let n = self.sigma0.nvars;
        let mut out = self.sigma0.expand();
        for (i, s) in self.sigmas.iter().enumerate() {
            if s.basis.is_empty() {
                continue;
            }
            out = &out + &box_constraint(n, i).mul(&s.expand());
        }
        out
    }

    /// Coefficient 1-norm of `f - value - (σ₀ + Σ g_i σ_i)`.
    pub fn residual(&self, f: &ChebPolyN) -> f64 {
        (&f.add_constant(-self.value) - &self.expand()).norm_1cheb()
    }

    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.sigmas
            .iter()
            .map(GramSOS::min_eigenvalue)
            .fold(self.sigma0.min_eigenvalue(), f64::min)
    }

    /// The Gram matrices as a factored quadratic-module element.
    pub fn certificate(&self) -> Result<QuadraticModuleElement> {
        let n = self.sigma0.nvars;
        let mut q = QuadraticModuleElement::empty(n, self.r);
        q.base = self.sigma0.to_weighted_squares(0)?;
        for (i, s) in self.sigmas.iter().enumerate() {
            q.multipliers[i] = s.to_weighted_squares(2)?;
        }
        Ok(q)
    }
}

/// The program whose optimum is `-f_(r)`: block 0 is `σ₀`, blocks `1..=n`
/// are the `σ_i` when `r ≥ 2`, and scalar 0 is the free `t`.
pub fn lasserre_problem(f: &ChebPolyN, r: u32) -> Result<(SdpProblem, Vec<Vec<pkl_core::MultiIndex>>)> {
    let n = f.nvars();
    if n == 0 || n > MAX_LASSERRE_VARS {
        return Err(SdpError::Precondition(format!("lasserre bound needs 1 <= n <= {MAX_LASSERRE_VARS}, got {n}")));
    }
    if r > MAX_LASSERRE_LEVEL {
        return Err(SdpError::Precondition(format!("level r = {r} exceeds {MAX_LASSERRE_LEVEL}")));
    }
    if r < f.total_degree() {
        return Err(SdpError::Precondition(format!("level r = {r} below deg f = {}", f.total_degree())));
    }
    let mut p = SdpProblem::new();
    let mut rows: BTreeMap<pkl_core::MultiIndex, LinearForm> = BTreeMap::new();
    let mut bases = Vec::new();
    let b0 = total_degree_basis(n, r / 2);
    let blk = p.add_block(b0.len());
    linearize_products(n, &b0)?.add_to_rows(blk, None, &mut rows);
    bases.push(b0);
    if r >= 2 {
        let bi = total_degree_basis(n, (r - 2) / 2);
        let lin = linearize_products(n, &bi)?;
        for i in 0..n {
            let blk = p.add_block(bi.len());
            lin.add_to_rows(blk, Some(&box_constraint(n, i)), &mut rows);
            bases.push(bi.clone());
        }
    }
    let t = p.add_scalar(ScalarKind::Free);
    rows.entry(pkl_core::MultiIndex::zero(n)).or_default().add_scalar(t, 1.0);
    p.objective.add_scalar(t, -1.0);
    add_coefficient_rows(&mut p, rows, f);
    Ok((p, bases))
}

pub fn lasserre_bound(f: &ChebPolyN, r: u32, backend: &dyn SolverBackend) -> Result<LasserreResult> {
    let (p, bases) = lasserre_problem(f, r)?;
    let sol = backend.solve(&p)?;
    sol.report.require_usable(&format!("lasserre level {r}"))?;
    let n = f.nvars();
    let sigma0 = GramSOS::new(n, bases[0].clone(), sol.blocks[0].clone())?;
    let sigmas = if bases.len() > 1 {
        (0..n).map(|i| GramSOS::new(n, bases[i + 1].clone(), sol.blocks[i + 1].clone())).collect::<Result<_>>()?
    } else {
        (0..n).map(|_| GramSOS::new(n, Vec::new(), nalgebra::DMatrix::zeros(0, 0))).collect::<Result<_>>()?
    };
    Ok(LasserreResult { r, value: sol.scalars[0], sigma0, sigmas, report: sol.report })
}
