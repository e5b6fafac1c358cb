//! The kernel program `v_{r,d}`: the best uniform eigenvalue deviation of
//! an SOS kernel
//!
//! ```text
//! K(x,y) = 1 + 2 Σ_{k≤d} λ_k T_k(x)T_k(y) + 2 Σ_{i,j=d+1}^r α_ij T_i(x)T_j(y)
//! ```
//!
//! with `λ, α ∈ [0,1]`, `α` symmetric and `K` a sum of squares in the tensor
//! basis `T_a(x)T_b(y)`, `0 ≤ a,b ≤ r`.

use std::collections::BTreeMap;

use pkl_core::{ChebPolyN, MultiIndex};
use serde::{Deserialize, Serialize};

use crate::backend::{SolverBackend, SolverReport};
use crate::error::{Result, SdpError};
use crate::gram::{linearize_products, tensor_basis};
use crate::problem::{LinearForm, ScalarKind, SdpProblem};

pub const MAX_VRD_R: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrdResult {
    pub r: u32,
    pub d: u32,
    /// `max_k |λ_k - 1|` at the returned kernel.
    pub v: f64,
    pub lambda: Vec<f64>,
    /// `α_ij` for `d < i, j ≤ r`, row `i - d - 1`.
    pub alpha: Vec<Vec<f64>>,
    pub gram_min_eigenvalue: f64,
    pub report: SolverReport,
}

impl VrdResult {
    pub fn kernel_eval(&self, x: f64, y: f64) -> f64 {
        kernel_eval(&self.lambda, &self.alpha, self.d, x, y)
    }

    /// Coefficients of `K` in the `T_i(x)T_j(y)` basis.
    pub fn kernel_poly(&self) -> ChebPolyN {
        let mut k = ChebPolyN::constant(2, 1.0);
        for (i, &l) in self.lambda.iter().enumerate() {
            let i = i as u32 + 1;
            k.add_term(MultiIndex(vec![i, i]), 2.0 * l);
        }
        for (a, row) in self.alpha.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                k.add_term(MultiIndex(vec![self.d + 1 + a as u32, self.d + 1 + b as u32]), 2.0 * v);
            }
        }
        k
    }
}

pub fn kernel_eval(lambda: &[f64], alpha: &[Vec<f64>], d: u32, x: f64, y: f64) -> f64 {
    let deg = d as usize + alpha.len();
    let tx = pkl_core::chebn::cheb_values(x, deg);
    let ty = pkl_core::chebn::cheb_values(y, deg);
    let mut s = 1.0;
    for (k, &l) in lambda.iter().enumerate() {
        s += 2.0 * l * tx[k + 1] * ty[k + 1];
    }
    let off = d as usize + 1;
    for (a, row) in alpha.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            s += 2.0 * v * tx[off + a] * ty[off + b];
        }
    }
    s
}

/// `max_{k ≤ d, x} |∫ K(x,y) T_k(y) dμ(y) - λ_k T_k(x)|` with `μ` the
/// normalised Chebyshev measure, integrated by Gauss–Chebyshev quadrature.
pub fn kernel_eigen_check(lambda: &[f64], alpha: &[Vec<f64>], d: u32, samples: usize) -> f64 {
    let deg = d as usize + alpha.len();
    let nodes = 2 * deg + 2;
    let ys: Vec<f64> = (0..nodes)
        .map(|j| ((j as f64 + 0.5) * std::f64::consts::PI / nodes as f64).cos())
        .collect();
    let mut worst: f64 = 0.0;
    for s in 0..samples.max(2) {
        let x = -1.0 + 2.0 * s as f64 / (samples.max(2) - 1) as f64;
        let tx = pkl_core::chebn::cheb_values(x, deg);
        for k in 0..=d as usize {
            let integral: f64 = ys
                .iter()
                .map(|&y| kernel_eval(lambda, alpha, d, x, y) * pkl_core::chebn::cheb_values(y, k)[k])
                .sum::<f64>()
                / nodes as f64;
            let lam = if k == 0 { 1.0 } else { lambda[k - 1] };
            worst = worst.max((integral - lam * tx[k]).abs());
        }
    }
    worst
}

struct VrdLayout {
    lambda: Vec<usize>,
    alpha: BTreeMap<(u32, u32), usize>,
    t: usize,
}

fn vrd_problem(r: u32, d: u32) -> Result<(SdpProblem, VrdLayout)> {
    if d == 0 || d > r {
        return Err(SdpError::Precondition(format!("v_(r,d) needs 1 <= d <= r, got r = {r}, d = {d}")));
    }
    if r > MAX_VRD_R {
        return Err(SdpError::Precondition(format!("r = {r} exceeds {MAX_VRD_R}")));
    }
    let basis = tensor_basis(2, r);
    let mut p = SdpProblem::new();
    let blk = p.add_block(basis.len());
    let mut rows: BTreeMap<MultiIndex, LinearForm> = BTreeMap::new();
    linearize_products(2, &basis)?.add_to_rows(blk, None, &mut rows);
    let t = p.add_scalar(ScalarKind::Nonneg);
    p.objective.add_scalar(t, 1.0);
    let mut lambda = Vec::new();
    for k in 1..=d {
        let l = p.add_scalar(ScalarKind::Nonneg);
        let sl = p.add_scalar(ScalarKind::Nonneg);
        let u = p.add_scalar(ScalarKind::Nonneg);
        rows.entry(MultiIndex(vec![k, k])).or_default().add_scalar(l, -2.0);
        let mut bx = LinearForm::default();
        bx.add_scalar(l, 1.0);
        bx.add_scalar(sl, 1.0);
        p.add_constraint(bx, 1.0);
        let mut ep = LinearForm::default();
        ep.add_scalar(t, 1.0);
        ep.add_scalar(l, 1.0);
        ep.add_scalar(u, -1.0);
        p.add_constraint(ep, 1.0);
        lambda.push(l);
    }
    let mut alpha = BTreeMap::new();
    for i in d + 1..=r {
        for j in i..=r {
            let a = p.add_scalar(ScalarKind::Nonneg);
            let sa = p.add_scalar(ScalarKind::Nonneg);
            rows.entry(MultiIndex(vec![i, j])).or_default().add_scalar(a, -2.0);
            if i != j {
                rows.entry(MultiIndex(vec![j, i])).or_default().add_scalar(a, -2.0);
            }
            let mut bx = LinearForm::default();
            bx.add_scalar(a, 1.0);
            bx.add_scalar(sa, 1.0);
            p.add_constraint(bx, 1.0);
            alpha.insert((i, j), a);
        }
    }
    for (idx, form) in rows {
        let rhs = if idx.total() == 0 { 1.0 } else { 0.0 };
        p.add_constraint(form, rhs);
    }
    Ok((p, VrdLayout { lambda, alpha, t }))
}

/// The conic program behind [`compute_vrd`], for export.
pub fn vrd_sdp(r: u32, d: u32) -> Result<SdpProblem> {
    vrd_problem(r, d).map(|(p, _)| p)
}

pub fn compute_vrd(r: u32, d: u32, backend: &dyn SolverBackend) -> Result<VrdResult> {
    let (p, layout) = vrd_problem(r, d)?;
    let sol = backend.solve(&p)?;
    sol.report.require_usable(&format!("v_({r},{d})"))?;
    let lambda: Vec<f64> = layout.lambda.iter().map(|&k| sol.scalars[k]).collect();
    let m = (r - d) as usize;
    let mut alpha = vec![vec![0.0; m]; m];
    for (&(i, j), &k) in &layout.alpha {
        let (a, b) = ((i - d - 1) as usize, (j - d - 1) as usize);
        alpha[a][b] = sol.scalars[k];
        alpha[b][a] = sol.scalars[k];
    }
    let v = lambda.iter().map(|l| (l - 1.0).abs()).fold(0.0, f64::max);
    log::debug!("v_({r},{d}) = {v} (epigraph {})", sol.scalars[layout.t]);
    let gram_min_eigenvalue = sol.blocks[0].symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(VrdResult { r, d, v, lambda, alpha, gram_min_eigenvalue, report: sol.report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::NativeIpm;

    #[test]
    fn eigen_check_on_handmade_kernel() {
        // Orthogonality makes the action on T_0, T_1 exact for any α.
        let err = kernel_eigen_check(&[0.5], &[vec![0.2, 0.1], vec![0.1, 0.3]], 1, 11);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn problem_shape() {
        let (p, layout) = vrd_problem(3, 1).unwrap();
        assert_eq!(p.blocks, vec![16]);
        assert_eq!(layout.lambda.len(), 1);
        assert_eq!(layout.alpha.len(), 3);
        assert!(p.validate().is_ok());
        assert!(vrd_problem(3, 0).is_err());
        assert!(vrd_problem(13, 2).is_err());
    }

    #[test]
    fn small_cell_is_feasible_and_consistent() {
        let res = compute_vrd(2, 1, &NativeIpm::new()).unwrap();
        assert!(res.v >= -1e-9 && res.v <= 1.0 + 1e-9);
        assert!(res.gram_min_eigenvalue > -1e-7);
        assert!(kernel_eigen_check(&res.lambda, &res.alpha, 1, 21) < 1e-10);
        // K is nonnegative on the square as a sum of squares.
        for i in 0..21 {
            for j in 0..21 {
                let (x, y) = (-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64);
                assert!(res.kernel_eval(x, y) > -1e-6);
            }
        }
    }
}
