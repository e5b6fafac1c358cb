//! Brute-force extremes of a polynomial on `[-1,1]^n`: a uniform grid, a
//! certified Lipschitz slack, and a local refinement from the best point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebn::ChebPolyN;
use crate::error::{PklError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub f_min_hat: f64,
    pub f_max_hat: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    /// Points per axis.
    pub grid_size: usize,
    /// `(h/2) Σ_i ‖∂_i f‖_∞` with `h` the grid spacing: every true extreme
    /// is within this distance of the grid extreme.
    pub slack: f64,
}

impl OracleResult {
    /// Certified lower bound on `min f`.
    pub fn lower(&self) -> f64 {
        self.f_min_hat - self.slack
    }

    /// Certified upper bound on `max f`.
    pub fn upper(&self) -> f64 {
        self.f_max_hat + self.slack
    }
}

/// Grid search with `points_per_axis` uniform points (endpoints included)
/// per coordinate, refined by coordinate-wise golden-section sweeps.
pub fn grid_oracle(f: &ChebPolyN, points_per_axis: usize) -> Result<OracleResult> {
    let n = f.nvars();
    if n > 3 {
        return Err(PklError::Precondition(format!("grid oracle supports n <= 3, got {n}")));
    }
    if points_per_axis < 11 {
        return Err(PklError::Precondition(format!(
            "grid oracle needs at least 11 points per axis, got {points_per_axis}"
        )));
    }
    let m = points_per_axis;
    let h = 2.0 / (m - 1) as f64;
    let coord = |j: usize| (-1.0 + h * j as f64).clamp(-1.0, 1.0);
    let point = |flat: usize| -> Vec<f64> {
        let mut x = vec![0.0; n];
        let mut rem = flat;
        for axis in (0..n).rev() {
            x[axis] = coord(rem % m);
            rem /= m;
        }
        x
    };
    let total = m.pow(n as u32);
    let vals: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| f.eval(&point(i)).expect("dimension"))
        .collect();
    let (mut imin, mut imax) = (0, 0);
    for (i, &v) in vals.iter().enumerate() {
        if v < vals[imin] {
            imin = i;
        }
        if v > vals[imax] {
            imax = i;
        }
    }
    let (argmin, f_min_hat) = refine(f, point(imin), vals[imin], h, 1.0);
    let (argmax, neg_max) = refine(f, point(imax), -vals[imax], h, -1.0);
    Ok(OracleResult {
        f_min_hat,
        f_max_hat: -neg_max,
        argmin,
        argmax,
        grid_size: m,
        slack: 0.5 * h * f.gradient_l1_bound(),
    })
}

/// Minimises `sign · f` near `x0` inside the box of half-width `h`.
fn refine(f: &ChebPolyN, x0: Vec<f64>, v0: f64, h: f64, sign: f64) -> (Vec<f64>, f64) {
    let g = |x: &[f64]| sign * f.eval(x).expect("dimension");
    let lo: Vec<f64> = x0.iter().map(|&c| (c - h).max(-1.0)).collect();
    let hi: Vec<f64> = x0.iter().map(|&c| (c + h).min(1.0)).collect();
    let mut x = x0;
    let mut best = v0;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..4 {
        for axis in 0..x.len() {
            let (mut a, mut b) = (lo[axis], hi[axis]);
            let mut probe = x.clone();
            let mut at = |t: f64| {
                probe[axis] = t;
                g(&probe)
            };
            let mut c = b - ratio * (b - a);
            let mut d = a + ratio * (b - a);
            let (mut fc, mut fd) = (at(c), at(d));
            for _ in 0..60 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - ratio * (b - a);
                    fc = at(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + ratio * (b - a);
                    fd = at(d);
                }
            }
            let t = 0.5 * (a + b);
            let v = at(t);
            if v < best {
                best = v;
                x[axis] = t;
            }
        }
    }
    (x, best)
}
