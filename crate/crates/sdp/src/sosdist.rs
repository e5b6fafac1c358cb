//! `δ_min(r) = min { ‖(1 - x²) - q‖_{1,cheb} : q ∈ Σ[x]_r }`.

use std::collections::BTreeMap;

use pkl_core::{ChebPoly1, ChebPolyN, MultiIndex};
use serde::{Deserialize, Serialize};

use crate::backend::{SolverBackend, SolverReport};
use crate::error::{Result, SdpError};
use crate::gram::linearize_products;
use crate::problem::{LinearForm, ScalarKind, SdpProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosDistResult {
    pub r: u32,
    pub delta_min: f64,
    /// Chebyshev coefficients of the optimal `q`.
    pub q: Vec<f64>,
    pub report: SolverReport,
}

fn target() -> ChebPoly1 {
    ChebPoly1::new(vec![0.5, 0.0, -0.5])
}

pub fn sosdist_problem(r: u32) -> Result<SdpProblem> {
    if r < 2 {
        return Err(SdpError::Precondition(format!("sos distance needs r >= 2, got {r}")));
    }
    let m = r / 2;
    let basis: Vec<MultiIndex> = (0..=m).map(|k| MultiIndex(vec![k])).collect();
    let mut p = SdpProblem::new();
    let blk = p.add_block(basis.len());
    let mut rows: BTreeMap<MultiIndex, LinearForm> = BTreeMap::new();
    linearize_products(1, &basis)?.add_to_rows(blk, None, &mut rows);
    let tgt = target();
    for k in 0..=2 * m {
        let form = rows.remove(&MultiIndex(vec![k])).unwrap_or_default();
        let mut form = form;
        let ep = p.add_scalar(ScalarKind::Nonneg);
        let en = p.add_scalar(ScalarKind::Nonneg);
        form.add_scalar(ep, -1.0);
        form.add_scalar(en, 1.0);
        p.objective.add_scalar(ep, 1.0);
        p.objective.add_scalar(en, 1.0);
        p.add_constraint(form, tgt.coeff(k as usize));
    }
    Ok(p)
}

pub fn min_sos_cheb_distance(r: u32, backend: &dyn SolverBackend) -> Result<SosDistResult> {
    let p = sosdist_problem(r)?;
    let sol = backend.solve(&p)?;
    sol.report.require_usable(&format!("sos distance r = {r}"))?;
    let m = r / 2;
    let basis: Vec<MultiIndex> = (0..=m).map(|k| MultiIndex(vec![k])).collect();
    let q: ChebPolyN = linearize_products(1, &basis)?.expand(&sol.blocks[0]);
    let q = q.to_univariate()?;
    let delta_min = (&target() - &q).norm_1cheb();
    Ok(SosDistResult { r, delta_min, q: q.into_coeffs(), report: sol.report })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(SdpError::Precondition("slope fit needs two or more positive points".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(SdpError::Precondition("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}
