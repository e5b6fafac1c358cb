//! Univariate polynomials in the Chebyshev basis of the first kind.
//!
//! A [`ChebPoly1`] stores `c_0..c_deg` for `p = Σ c_k T_k`. Only literal
//! trailing zeros are trimmed, so the stored degree never drops because a
//! coefficient is merely small.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{PklError, Result};

/// Degree above which the monomial bridge is considered ill-conditioned.
pub const MONOMIAL_BRIDGE_LIMIT: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebPoly1 {
    coeffs: Vec<f64>,
}

impl ChebPoly1 {
    /// Builds a polynomial from Chebyshev coefficients, trimming exact
    /// trailing zeros. Panics on non-finite input; use [`ChebPoly1::try_new`]
    /// for untrusted data.
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self::try_new(coeffs).expect("non-finite Chebyshev coefficient")
    }

    pub fn try_new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PklError::NonFinite);
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The basis polynomial `T_k`.
    pub fn basis(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `T_k`, zero beyond the stored degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Clenshaw evaluation of `Σ c_k T_k(x)`. Valid for any real `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + self.coeffs[0]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Product via `T_j T_k = ½(T_{j+k} + T_{|j-k|})`.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.degree() + other.degree();
        let mut out = vec![0.0; n + 1];
        for (j, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (k, &b) in other.coeffs.iter().enumerate() {
                let h = 0.5 * a * b;
                out[j + k] += h;
                out[j.abs_diff(k)] += h;
            }
        }
        Self::new(out)
    }

    /// Exact `order`-th derivative, computed with the backward recurrence
    /// `c'_{k-1} = c'_{k+1} + 2k c_k`.
    pub fn derivative(&self, order: usize) -> Self {
        let mut cur = self.coeffs.clone();
        for _ in 0..order {
            let n = cur.len() - 1;
            if n == 0 {
                return Self::zero();
            }
            let mut d = vec![0.0; n + 1];
            for k in (1..=n).rev() {
                d[k - 1] = d.get(k + 1).copied().unwrap_or(0.0) + 2.0 * k as f64 * cur[k];
            }
            d[0] *= 0.5;
            d.truncate(n);
            cur = d;
        }
        Self::new(cur)
    }

    /// `‖p‖_{1,cheb} = Σ |c_k|`.
    pub fn norm_1cheb(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Lower bound on `‖p‖_∞` over `[-1,1]`: the maximum of `|p|` over
    /// `grid_size` Chebyshev extreme points, refined by a golden-section
    /// search around the best few samples. Every value returned is an actual
    /// value of `|p|`, so the result never exceeds the true sup norm.
    pub fn sup_norm_sampled(&self, grid_size: usize) -> f64 {
        let m = grid_size.max(self.degree() + 1).max(2);
        let xs: Vec<f64> = (0..m)
            .map(|j| (PI * j as f64 / (m - 1) as f64).cos())
            .collect();
        let vals: Vec<f64> = xs.iter().map(|&x| self.eval(x).abs()).collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        let mut best = vals[order[0]];
        for &j in order.iter().take(4) {
            // xs is decreasing in j
            let hi = xs[j.saturating_sub(1)];
            let lo = xs[(j + 1).min(m - 1)];
            best = best.max(golden_max(|x| self.eval(x).abs(), lo, hi));
        }
        best
    }

    /// Monomial coefficients `a_0..a_deg` with `p = Σ a_k x^k`.
    pub fn to_monomial(&self) -> Vec<f64> {
        let n = self.degree();
        if n > MONOMIAL_BRIDGE_LIMIT {
            warn!("monomial conversion at degree {n} is ill-conditioned");
        }
        let mut out = vec![0.0; n + 1];
        let mut prev = vec![1.0];
        let mut cur = vec![0.0, 1.0];
        out[0] += self.coeffs[0];
        if n >= 1 {
            for (i, v) in cur.iter().enumerate() {
                out[i] += self.coeffs[1] * v;
            }
        }
        for k in 2..=n {
            let mut next = vec![0.0; k + 1];
            for (i, &v) in cur.iter().enumerate() {
                next[i + 1] += 2.0 * v;
            }
            for (i, &v) in prev.iter().enumerate() {
                next[i] -= v;
            }
            for (i, &v) in next.iter().enumerate() {
                out[i] += self.coeffs[k] * v;
            }
            prev = cur;
            cur = next;
        }
        out
    }

    /// Inverse of [`ChebPoly1::to_monomial`].
    pub fn from_monomial(mono: &[f64]) -> Self {
        if mono.len() > MONOMIAL_BRIDGE_LIMIT + 1 {
            warn!(
                "monomial conversion at degree {} is ill-conditioned",
                mono.len() - 1
            );
        }
        let mut out = vec![0.0; mono.len().max(1)];
        // xk holds x^k in the Chebyshev basis
        let mut xk = vec![1.0];
        for (k, &a) in mono.iter().enumerate() {
            if k > 0 {
                let mut next = vec![0.0; k + 1];
                for (j, &v) in xk.iter().enumerate() {
                    if j == 0 {
                        next[1] += v;
                    } else {
                        next[j + 1] += 0.5 * v;
                        next[j - 1] += 0.5 * v;
                    }
                }
                xk = next;
            }
            for (j, &v) in xk.iter().enumerate() {
                out[j] += a * v;
            }
        }
        Self::new(out)
    }

    /// Interpolant of `f` at the `degree + 1` Chebyshev points of the first
    /// kind. Exact (to rounding) when `f` is itself a polynomial of degree
    /// at most `degree`.
    pub fn interpolate<F: Fn(f64) -> f64>(degree: usize, f: F) -> Self {
        let n = degree + 1;
        let thetas: Vec<f64> = (0..n)
            .map(|j| PI * (j as f64 + 0.5) / n as f64)
            .collect();
        let vals: Vec<f64> = thetas.iter().map(|t| f(t.cos())).collect();
        Self::new(dct_coefficients(&thetas, &vals))
    }

    /// Returns `self + a`, where only the coefficient of `T_0` changes.
    pub fn add_constant(&self, a: f64) -> Self {
        let mut c = self.coeffs.clone();
        c[0] += a;
        Self::new(c)
    }
}

/// Reusable interpolation at the `degree + 1` first-kind Chebyshev points.
/// Caches the cosine table so that many interpolants of the same degree cost
/// one matrix-vector product each.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    points: Vec<f64>,
    // table[k * n + j] = cos(k θ_j)
    table: Vec<f64>,
}

impl ChebGrid {
    pub fn new(degree: usize) -> Self {
        let n = degree + 1;
        let thetas: Vec<f64> = (0..n)
            .map(|j| PI * (j as f64 + 0.5) / n as f64)
            .collect();
        let mut table = vec![0.0; n * n];
        for k in 0..n {
            for (j, t) in thetas.iter().enumerate() {
                table[k * n + j] = (k as f64 * t).cos();
            }
        }
        Self {
            points: thetas.iter().map(|t| t.cos()).collect(),
            table,
        }
    }

    pub fn degree(&self) -> usize {
        self.points.len() - 1
    }

    /// Interpolation points `cos((j + ½)π / (degree + 1))`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Chebyshev coefficients of the interpolant of `vals` given at
    /// [`ChebGrid::points`].
    pub fn fit(&self, vals: &[f64]) -> ChebPoly1 {
        let n = self.points.len();
        assert_eq!(vals.len(), n, "ChebGrid::fit needs one value per point");
        let mut coeffs: Vec<f64> = (0..n)
            .map(|k| {
                let row = &self.table[k * n..(k + 1) * n];
                2.0 * row.iter().zip(vals).map(|(c, v)| c * v).sum::<f64>() / n as f64
            })
            .collect();
        coeffs[0] *= 0.5;
        ChebPoly1::new(coeffs)
    }

    pub fn interpolate<F: Fn(f64) -> f64>(&self, f: F) -> ChebPoly1 {
        let vals: Vec<f64> = self.points.iter().map(|&x| f(x)).collect();
        self.fit(&vals)
    }
}

pub(crate) fn dct_coefficients(thetas: &[f64], vals: &[f64]) -> Vec<f64> {
    let n = thetas.len();
    let mut coeffs = vec![0.0; n];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let s: f64 = thetas
            .iter()
            .zip(vals)
            .map(|(t, v)| v * (k as f64 * t).cos())
            .sum();
        *ck = 2.0 * s / n as f64;
    }
    coeffs[0] *= 0.5;
    coeffs
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = f(lo).max(f(hi));
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..80 {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
        best = best.max(fa).max(fb);
    }
    best
}

/// Markov-type bound `k^{2ℓ} / (2ℓ-1)!!` on `|T_k^{(ℓ)}|` over `[-1,1]`.
pub fn markov_bound(k: u32, ell: u32) -> Result<f64> {
    if ell == 0 {
        return Err(PklError::Precondition("markov_bound needs ell >= 1".into()));
    }
    let num = (k as f64).powi(2 * ell as i32);
    if !num.is_finite() {
        return Err(PklError::Overflow(format!("k^(2l) for k={k}, l={ell}")));
    }
    Ok(num / double_factorial(2 * ell as i64 - 1))
}

/// `n!! ` with the conventions `0!! = (-1)!! = 1`.
pub fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut m = n;
    while m > 1 {
        acc *= m as f64;
        m -= 2;
    }
    acc
}

impl Add for &ChebPoly1 {
    type Output = ChebPoly1;
    fn add(self, rhs: &ChebPoly1) -> ChebPoly1 {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ChebPoly1::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &ChebPoly1 {
    type Output = ChebPoly1;
    fn sub(self, rhs: &ChebPoly1) -> ChebPoly1 {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ChebPoly1::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &ChebPoly1 {
    type Output = ChebPoly1;
    fn mul(self, rhs: &ChebPoly1) -> ChebPoly1 {
        ChebPoly1::mul(self, rhs)
    }
}

impl Neg for &ChebPoly1 {
    type Output = ChebPoly1;
    fn neg(self) -> ChebPoly1 {
        self.scale(-1.0)
    }
}
