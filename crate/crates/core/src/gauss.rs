//! Gauss–Weierstrass smoothing: exact action on polynomials through the
//! Gaussian moment formula, the truncated operator by quadrature, and the
//! error bounds that relate them to the identity.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::cheb::{double_factorial, ChebPoly1, MONOMIAL_BRIDGE_LIMIT};
use crate::error::{PklError, Result};
use crate::quadrature::integrate_panels;

/// Convolution with the `N(0, σ²)` density. `σ = 0` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussOperator {
    sigma: f64,
}

impl GaussOperator {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(PklError::Precondition(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn apply(&self, p: &ChebPoly1) -> Result<ChebPoly1> {
        apply_gauss(p, self.sigma)
    }

    /// Gaussian density value `K_G^σ(x, y)`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        let s = self.sigma;
        (-(x - y).powi(2) / (2.0 * s * s)).exp() / ((2.0 * PI).sqrt() * s)
    }
}

/// Truncation half-width `R > 1` and tail parameter `γ ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub radius: f64,
    pub gamma: f64,
}

impl TruncationParams {
    pub fn new(radius: f64, gamma: f64) -> Result<Self> {
        if !(radius > 1.0) {
            return Err(PklError::Precondition(format!("R must exceed 1, got {radius}")));
        }
        if !(gamma >= 1.0) {
            return Err(PklError::Precondition(format!("gamma must be >= 1, got {gamma}")));
        }
        Ok(Self { radius, gamma })
    }
}

/// `E[Z^ℓ]` for `Z ~ N(0, σ²)`: `σ^ℓ (ℓ-1)!!` for even `ℓ`, zero for odd.
pub fn gauss_moment(ell: u32, sigma: f64) -> f64 {
    if ell % 2 == 1 {
        0.0
    } else {
        sigma.powi(ell as i32) * double_factorial(ell as i64 - 1)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact image of `p` under the Gauss–Weierstrass operator, using
/// `K(x^k) = Σ_ℓ C(k, 2ℓ) σ^{2ℓ} (2ℓ-1)!! x^{k-2ℓ}`. The degree is preserved.
pub fn apply_gauss(p: &ChebPoly1, sigma: f64) -> Result<ChebPoly1> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(PklError::Precondition(format!("sigma must be >= 0, got {sigma}")));
    }
    if p.degree() > MONOMIAL_BRIDGE_LIMIT {
        return Err(PklError::DegreeLimit {
            degree: p.degree(),
            limit: MONOMIAL_BRIDGE_LIMIT,
        });
    }
    if sigma == 0.0 {
        return Ok(p.clone());
    }
    let mono = p.to_monomial();
    let mut out = vec![0.0; mono.len()];
    for (k, &a) in mono.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let k = k as u32;
        for l in 0..=k / 2 {
            out[(k - 2 * l) as usize] += a * binomial(k, 2 * l) * gauss_moment(2 * l, sigma);
        }
    }
    Ok(ChebPoly1::from_monomial(&out))
}

/// Sup-norm bound `Σ_{ℓ=1}^{⌊k/2⌋} (2ℓ-1)!! / ((2ℓ)! (4ℓ-1)!!) (k²σ)^{2ℓ}`
/// on `‖T_k - K_G^σ T_k‖_∞`.
pub fn sup_error_bound(k: u32, sigma: f64) -> f64 {
    let x = (k as f64).powi(2) * sigma;
    (1..=k / 2)
        .map(|l| {
            let l = l as i64;
            let fact: f64 = (1..=2 * l).map(|i| i as f64).product();
            double_factorial(2 * l - 1) / (fact * double_factorial(4 * l - 1)) * x.powi(2 * l as i32)
        })
        .sum()
}

/// Coefficient-norm bound `k^{9/2} σ²`, valid when `k² σ ≤ 1`.
pub fn cheb_error_bound(k: u32, sigma: f64) -> Result<f64> {
    let kf = k as f64;
    if kf * kf * sigma > 1.0 {
        return Err(PklError::Hypothesis(format!(
            "k^2 sigma <= 1 fails: {} > 1",
            kf * kf * sigma
        )));
    }
    Ok(kf.powf(4.5) * sigma * sigma)
}

/// The value `2√2 e^{-γ²}` with no hypothesis check.
pub fn tail_bound_value(gamma: f64) -> f64 {
    2.0 * SQRT_2 * (-gamma * gamma).exp()
}

/// Bound `2√2 e^{-γ²}` on `‖K_G^σ T_k - K_G^{σ,R} T_k‖_∞`, checked against
/// `kσ² ≤ 1`, `R ≥ 1`, `γ ≥ 1` and `R - 1 ≥ γ(2+√2)√k σ`.
pub fn tail_bound(k: u32, sigma: f64, radius: f64, gamma: f64) -> Result<f64> {
    let kf = k as f64;
    if kf * sigma * sigma > 1.0 {
        return Err(PklError::Hypothesis(format!(
            "k sigma^2 <= 1 fails: {} > 1",
            kf * sigma * sigma
        )));
    }
    if radius < 1.0 {
        return Err(PklError::Hypothesis(format!("R >= 1 fails: R = {radius}")));
    }
    if gamma < 1.0 {
        return Err(PklError::Hypothesis(format!("gamma >= 1 fails: gamma = {gamma}")));
    }
    let need = gamma * (2.0 + SQRT_2) * kf.sqrt() * sigma;
    if radius - 1.0 < need {
        return Err(PklError::Hypothesis(format!(
            "R - 1 >= gamma (2 + sqrt 2) sqrt(k) sigma fails: {} < {need}",
            radius - 1.0
        )));
    }
    Ok(tail_bound_value(gamma))
}

/// Gaussian tail bound `P(|X - μ| ≥ c) ≤ 2 e^{-c²/(2σ²)}`.
pub fn chernoff_tail(c: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(PklError::Precondition("chernoff_tail needs sigma > 0".into()));
    }
    if !(c >= 0.0) {
        return Err(PklError::Precondition("chernoff_tail needs c >= 0".into()));
    }
    Ok(2.0 * (-c * c / (2.0 * sigma * sigma)).exp())
}

/// Evaluates `∫_{[-R,R]} K_G^σ(x, y) p(y) dy` at each `x` by adaptive
/// Gauss–Legendre panels (`nodes` points per panel) with breakpoints
/// clustered around the Gaussian peak. The truncated operator does not map
/// polynomials to polynomials, so the result is a list of samples.
pub fn apply_truncated_gauss_numeric(
    p: &ChebPoly1,
    sigma: f64,
    radius: f64,
    nodes: usize,
    xs: &[f64],
) -> Result<Vec<f64>> {
    if nodes < 64 {
        return Err(PklError::Precondition(format!(
            "truncated operator needs at least 64 nodes per panel, got {nodes}"
        )));
    }
    if !(sigma >= 0.0 && radius > 0.0) {
        return Err(PklError::Precondition("need sigma >= 0 and R > 0".into()));
    }
    let op = GaussOperator::new(sigma)?;
    xs.iter()
        .map(|&x| {
            if sigma == 0.0 {
                return Ok(if x.abs() < radius { p.eval(x) } else { 0.0 });
            }
            let mut breaks = vec![-radius, radius];
            for j in -8i32..=8 {
                let b = x + j as f64 * sigma;
                if b > -radius && b < radius {
                    breaks.push(b);
                }
            }
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let (v, _) = integrate_panels(|y| op.density(x, y) * p.eval(y), &breaks, nodes, 1e-11)?;
            Ok(v)
        })
        .collect()
}
