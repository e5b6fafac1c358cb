//! The integral operator `f ↦ ∫_{[-R,R]} K(x, y) f(y) dy` of an SOS kernel,
//! evaluated exactly by Gauss–Legendre quadrature, together with the
//! weighted-squares form of its images and the approximate-identity bounds.

use std::f64::consts::{E, PI, SQRT_2};

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheb::{ChebGrid, ChebPoly1};
use crate::chebn::{ChebPolyN, DenseChebN, MultiIndex};
use crate::error::{PklError, Result};
use crate::expkernel::KernelSpec;
use crate::gauss::{cheb_error_bound, tail_bound, tail_bound_value};
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::sos::{Root, WeightedSquaresSOS};

/// Largest tensor quadrature accepted by [`apply_product_kernel`].
pub const TENSOR_NODE_CAP: usize = 1_000_000;

/// `⌈(deg f + deg K)/2⌉ + 1` nodes, enough for exactness on the integrand.
pub fn node_count(deg_f: usize, deg_k: usize) -> usize {
    (deg_f + deg_k).div_ceil(2) + 1
}

/// Gauss–Legendre rule on `[-R, R]` exact for `K(x, ·) f` with `deg f = deg_f`.
pub fn kernel_quadrature(kernel: &KernelSpec, deg_f: usize) -> Result<QuadratureRule> {
    gauss_legendre(
        node_count(deg_f, kernel.kernel_degree),
        -kernel.radius,
        kernel.radius,
    )
}

/// `s((x - ω)²/(4σ²))` as a polynomial in `x`, one per node.
pub fn kernel_roots(kernel: &KernelSpec, nodes: &[f64]) -> Vec<ChebPoly1> {
    let grid = ChebGrid::new(2 * kernel.s.achieved_degree);
    nodes
        .par_iter()
        .map(|&w| grid.interpolate(|x| kernel.root_eval(x, w)))
        .collect()
}

/// Exact image `𝒦f`, a polynomial of degree `deg K`.
pub fn apply_kernel(kernel: &KernelSpec, f: &ChebPoly1) -> Result<ChebPoly1> {
    let q = kernel_quadrature(kernel, f.degree())?;
    let weights: Vec<f64> = q
        .nodes
        .iter()
        .zip(&q.weights)
        .map(|(&w, &c)| c * f.eval(w) * kernel.prefactor())
        .collect();
    let grid = ChebGrid::new(kernel.kernel_degree);
    let vals: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|&x| {
            q.nodes
                .iter()
                .zip(&weights)
                .map(|(&w, &c)| c * kernel.root_eval(x, w).powi(2))
                .sum()
        })
        .collect();
    Ok(grid.fit(&vals))
}

/// `𝒦f = Σ_j c_j f(ω_j) K(x, ω_j)` as weighted squares of
/// `s((x - ω_j)²/(4σ²))`. With `check` set, any node where `f < 0` is refused;
/// otherwise such nodes are dropped (the result is then an SOS polynomial
/// that no longer equals `𝒦f`). Nodes with `f(ω_j) = 0` are always skipped.
pub fn sos_decompose_image(
    kernel: &KernelSpec,
    f: &ChebPoly1,
    check: bool,
) -> Result<WeightedSquaresSOS> {
    let q = kernel_quadrature(kernel, f.degree())?;
    let fv: Vec<f64> = q.nodes.iter().map(|&w| f.eval(w)).collect();
    if check {
        if let Some((j, &v)) = fv.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(PklError::NegativeNode {
                node: vec![q.nodes[j]],
                value: v,
            });
        }
    }
    let roots = kernel_roots(kernel, &q.nodes);
    let mut out = WeightedSquaresSOS::new(1, 0);
    let mut dropped = 0usize;
    for ((c, v), root) in q.weights.iter().zip(&fv).zip(roots) {
        if *v > 0.0 {
            out.push(c * v * kernel.prefactor(), Root::Tensor(vec![root]))?;
        } else if *v < 0.0 {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} quadrature nodes with negative values");
    }
    Ok(out)
}

/// Image of the product kernel `Π_i K(x_i, y_i)` in both expanded and
/// weighted-squares form.
#[derive(Debug, Clone)]
pub struct ProductImage {
    pub image: ChebPolyN,
    pub sos: WeightedSquaresSOS,
    pub nodes_per_axis: usize,
}

struct TensorSetup {
    n: usize,
    q: QuadratureRule,
    values: Vec<f64>,
}

impl TensorSetup {
    fn new(kernel: &KernelSpec, f: &ChebPolyN) -> Result<Self> {
        let n = f.nvars();
        let deg_f = f.axis_degrees().into_iter().max().unwrap_or(0) as usize;
        let q = kernel_quadrature(kernel, deg_f)?;
        let needed = (q.len() as u128).pow(n as u32);
        if needed > TENSOR_NODE_CAP as u128 {
            return Err(PklError::TensorOverflow {
                needed,
                cap: TENSOR_NODE_CAP,
            });
        }
        debug!("product kernel: {} nodes per axis, {needed} total", q.len());
        let mut setup = Self {
            n,
            q,
            values: Vec::new(),
        };
        setup.values = (0..needed as usize)
            .into_par_iter()
            .map(|flat| f.eval(&setup.point(flat)).expect("dimension checked"))
            .collect();
        Ok(setup)
    }

    fn index(&self, flat: usize) -> Vec<usize> {
        let m = self.q.len();
        let mut idx = vec![0; self.n];
        let mut rem = flat;
        for axis in (0..self.n).rev() {
            idx[axis] = rem % m;
            rem /= m;
        }
        idx
    }

    fn point(&self, flat: usize) -> Vec<f64> {
        self.index(flat).iter().map(|&j| self.q.nodes[j]).collect()
    }

    /// Contracts node values with `c_j · prefactor · root_j²` on every axis.
    fn image(&self, kernel: &KernelSpec, roots: &[ChebPoly1]) -> ChebPolyN {
        let rows: Vec<Vec<f64>> = roots
            .par_iter()
            .zip(&self.q.weights)
            .map(|(r, c)| r.mul(r).scale(c * kernel.prefactor()).into_coeffs())
            .collect();
        let m = self.q.len();
        let mut image = DenseChebN::from_parts(vec![m; self.n], self.values.clone());
        for axis in 0..self.n {
            image = image.mode_product(axis, &rows, kernel.kernel_degree + 1);
        }
        image.to_poly()
    }
}

/// `K_n f` for any `f` (no sign requirement), by tensor quadrature.
pub fn product_kernel_image(kernel: &KernelSpec, f: &ChebPolyN) -> Result<ChebPolyN> {
    let setup = TensorSetup::new(kernel, f)?;
    let roots = kernel_roots(kernel, &setup.q.nodes);
    Ok(setup.image(kernel, &roots))
}

/// `K_n f` on `[-R, R]^n` by tensor Gauss–Legendre quadrature, with its
/// weighted-squares form. Every node value of `f` must be nonnegative.
pub fn apply_product_kernel(kernel: &KernelSpec, f: &ChebPolyN) -> Result<ProductImage> {
    let setup = TensorSetup::new(kernel, f)?;
    if let Some((flat, &v)) = setup.values.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(PklError::NegativeNode {
            node: setup.point(flat),
            value: v,
        });
    }
    let roots = kernel_roots(kernel, &setup.q.nodes);
    let scaled: Vec<f64> = setup.q.weights.iter().map(|c| c * kernel.prefactor()).collect();
    let mut sos = WeightedSquaresSOS::new(setup.n, 0);
    for (flat, &v) in setup.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let idx = setup.index(flat);
        let w: f64 = idx.iter().map(|&j| scaled[j]).product::<f64>() * v;
        sos.push(w, Root::Tensor(idx.iter().map(|&j| roots[j].clone()).collect()))?;
    }
    Ok(ProductImage {
        image: setup.image(kernel, &roots),
        sos,
        nodes_per_axis: setup.q.len(),
    })
}

/// `ε Σ_{i<n} (1+ε)^i`, the error of an `n`-fold product of operators each
/// within `ε` of the identity on basis polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductErrorBound {
    pub value: f64,
    /// `ε ≤ 1/n`, in which case `value ≤ e ε n`.
    pub simplified: bool,
    pub simplified_value: f64,
}

pub fn multivariate_error_bound(epsilon: f64, n: u32) -> Result<ProductErrorBound> {
    if !(epsilon >= 0.0) || n == 0 {
        return Err(PklError::Precondition(format!(
            "need epsilon >= 0 and n >= 1, got {epsilon}, {n}"
        )));
    }
    let value = epsilon * (0..n).map(|i| (1.0 + epsilon).powi(i as i32)).sum::<f64>();
    Ok(ProductErrorBound {
        value,
        simplified: epsilon <= 1.0 / n as f64,
        simplified_value: E * epsilon * n as f64,
    })
}

/// `(7/2 d^{9/2} + 14) log r / r²`.
pub fn approx_identity_bound(r: f64, d: u32) -> f64 {
    (3.5 * (d as f64).powf(4.5) + 14.0) * r.ln() / (r * r)
}

/// `7/2 k^{9/2} log r/r² + √(2(r+1)) (2√2 r^{-5/2} + 24/√(2π) · r^{-5/2}/√(7/2 log r))`,
/// the unsimplified per-`k` form of [`approx_identity_bound`].
pub fn approx_identity_bound_detailed(r: f64, k: u32) -> f64 {
    let l = r.ln();
    3.5 * (k as f64).powf(4.5) * l / (r * r)
        + (2.0 * (r + 1.0)).sqrt()
            * (2.0 * SQRT_2 * r.powf(-2.5)
                + 24.0 / (2.0 * PI).sqrt() * r.powf(-2.5) / (3.5 * l).sqrt())
}

/// The three contributions bounding `‖𝒦T_k - T_k‖_{1,cheb}` at a kernel's
/// parameters: the Gaussian smoothing error, the truncation tail and the
/// kernel-versus-Gaussian gap, the last two converted from sup norm with the
/// factor `√(2(D+1))`, `D` the kernel degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityBoundTerms {
    pub k: u32,
    pub gauss: f64,
    pub gamma: f64,
    pub tail: f64,
    /// Whether all hypotheses of the tail estimate hold at `gamma`.
    pub tail_hypotheses_hold: bool,
    pub truncation: f64,
    pub norm_factor: f64,
    pub total: f64,
}

/// Uses the kernel's own `γ` when it has one, otherwise the largest `γ`
/// with `R - 1 ≥ γ(2+√2)√k σ`.
pub fn identity_bound_terms(kernel: &KernelSpec, k: u32) -> Result<IdentityBoundTerms> {
    if k == 0 {
        return Err(PklError::Precondition("identity bound needs k >= 1".into()));
    }
    let sigma = kernel.sigma;
    let gauss = cheb_error_bound(k, sigma)?;
    let gamma = kernel.gamma.unwrap_or_else(|| {
        (kernel.radius - 1.0) / ((2.0 + SQRT_2) * (k as f64).sqrt() * sigma)
    });
    let (tail, ok) = match tail_bound(k, sigma, kernel.radius, gamma) {
        Ok(v) => (v, true),
        Err(_) => (tail_bound_value(gamma), false),
    };
    let truncation = kernel.truncation_bound(k);
    let norm_factor = (2.0 * (kernel.kernel_degree as f64 + 1.0)).sqrt();
    Ok(IdentityBoundTerms {
        k,
        gauss,
        gamma,
        tail,
        tail_hypotheses_hold: ok,
        truncation,
        norm_factor,
        total: gauss + norm_factor * (tail + truncation),
    })
}

/// `‖𝒦T_k - T_k‖_{1,cheb}`.
pub fn measured_identity_error(kernel: &KernelSpec, k: usize) -> Result<f64> {
    let tk = ChebPoly1::basis(k);
    Ok((&apply_kernel(kernel, &tk)? - &tk).norm_1cheb())
}

/// `‖K_n T_α - T_α‖_{1,cheb}`.
pub fn measured_product_identity_error(kernel: &KernelSpec, alpha: &MultiIndex) -> Result<f64> {
    let t = ChebPolyN::basis(alpha.clone());
    Ok((&product_kernel_image(kernel, &t)? - &t).norm_1cheb())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::chernoff_tail;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_kernel() -> KernelSpec {
        KernelSpec::schedule_off(0.1, 1e-6, 1.4, 2).unwrap()
    }

    #[test]
    fn node_count_rule() {
        assert_eq!(node_count(3, 40), 23);
        assert_eq!(node_count(0, 40), 21);
        let k = small_kernel();
        let q = kernel_quadrature(&k, 3).unwrap();
        assert!(q.exact_degree >= 3 + k.kernel_degree);
        assert!(q.weights.iter().all(|&w| w > 0.0));
        assert!(q.nodes.iter().all(|&x| x.abs() < k.radius));
    }

    #[test]
    fn constant_is_nearly_preserved() {
        let k = small_kernel();
        let img = apply_kernel(&k, &ChebPoly1::constant(1.0)).unwrap();
        assert_eq!(img.degree(), k.kernel_degree);
        let bound = chernoff_tail(k.radius - 1.0, k.sigma).unwrap()
            + 2.0 * k.radius * k.pointwise_gap_bound();
        let err = img.add_constant(-1.0).sup_norm_sampled(2000);
        assert!(err <= bound, "err {err} bound {bound}");
    }

    #[test]
    fn image_matches_numeric_integral() {
        let k = small_kernel();
        let f = ChebPoly1::new(vec![2.0, 0.5, -0.25]);
        let img = apply_kernel(&k, &f).unwrap();
        for x in [-1.0, -0.3, 0.2, 0.95] {
            let mut breaks: Vec<f64> = [x - 0.5, x, x + 0.5]
                .into_iter()
                .map(|b: f64| b.clamp(-k.radius, k.radius))
                .collect();
            breaks.insert(0, -k.radius);
            breaks.push(k.radius);
            let (v, ok) = crate::quadrature::integrate_panels(
                |y| k.eval(x, y) * f.eval(y),
                &breaks,
                32,
                1e-13,
            )
            .unwrap();
            assert!(ok);
            assert!((img.eval(x) - v).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn decomposition_equals_image() {
        let k = small_kernel();
        let f = ChebPoly1::new(vec![3.0, 1.0, 0.5]);
        let sos = sos_decompose_image(&k, &f, true).unwrap();
        let img = apply_kernel(&k, &f).unwrap();
        let e = sos.expand().to_univariate().unwrap();
        assert!((&e - &img).norm_1cheb() <= 1e-9);
        assert!(sos.terms().iter().all(|t| t.weight > 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: f64 = rng.gen_range(-1.0..=1.0);
            assert!((sos.eval(&[x]).unwrap() - img.eval(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_decomposition_has_positive_weights() {
        let k = small_kernel();
        let sos = sos_decompose_image(&k, &ChebPoly1::constant(1.0), true).unwrap();
        let q = kernel_quadrature(&k, 0).unwrap();
        assert_eq!(sos.len(), q.len());
        for (t, c) in sos.terms().iter().zip(&q.weights) {
            assert!((t.weight - c * k.prefactor()).abs() < 1e-15);
        }
    }

    #[test]
    fn decomposition_node_checks() {
        let k = KernelSpec::schedule_off(0.2, 1e-4, 1.0, 2).unwrap();
        let one_minus_x2 = ChebPoly1::new(vec![0.5, 0.0, -0.5]);
        assert!(sos_decompose_image(&k, &one_minus_x2, true).is_ok());
        let x = ChebPoly1::basis(1);
        assert!(matches!(
            sos_decompose_image(&k, &x, true),
            Err(PklError::NegativeNode { .. })
        ));
        let dropped = sos_decompose_image(&k, &x, false).unwrap();
        assert!(dropped.terms().iter().all(|t| t.weight > 0.0));
    }

    #[test]
    fn product_kernel_structure() {
        let k = KernelSpec::schedule_off(0.2, 1e-4, 1.3, 2).unwrap();
        let one = ChebPolyN::constant(2, 1.0);
        let p = apply_product_kernel(&k, &one).unwrap();
        let k1 = apply_kernel(&k, &ChebPoly1::constant(1.0)).unwrap();
        let want = ChebPolyN::tensor(&[k1.clone(), k1.clone()]);
        assert!((&p.image - &want).norm_1cheb() < 1e-10);
        assert!((&p.sos.expand() - &p.image).norm_1cheb() < 1e-9);

        // separable input acts axis by axis
        let g = ChebPoly1::new(vec![2.0, 1.0, 0.3]);
        let sep = ChebPolyN::from_univariate(&g, 2, 0);
        let p = apply_product_kernel(&k, &sep).unwrap();
        let want = ChebPolyN::tensor(&[apply_kernel(&k, &g).unwrap(), k1.clone()]);
        assert!((&p.image - &want).norm_1cheb() < 1e-10);
    }

    #[test]
    fn product_kernel_refuses_negative_nodes_and_overflow() {
        let k = KernelSpec::schedule_off(0.2, 1e-4, 1.3, 2).unwrap();
        let t11 = ChebPolyN::basis(MultiIndex(vec![1, 1]));
        assert!(matches!(
            apply_product_kernel(&k, &t11),
            Err(PklError::NegativeNode { .. })
        ));
        let tiny = KernelSpec::schedule_off(0.01, 1e-8, 1.05, 2).unwrap();
        let one = ChebPolyN::constant(3, 1.0);
        assert!(matches!(
            apply_product_kernel(&tiny, &one),
            Err(PklError::TensorOverflow { .. })
        ));
    }

    #[test]
    fn geometric_sum_examples() {
        assert_eq!(multivariate_error_bound(0.25, 1).unwrap().value, 0.25);
        let b = multivariate_error_bound(0.1, 3).unwrap();
        assert!((b.value - 0.331).abs() < 1e-15);
        for n in 1..20u32 {
            let b = multivariate_error_bound(1.0 / n as f64, n).unwrap();
            assert!(b.simplified);
            assert!(b.value < b.simplified_value);
        }
        assert!(multivariate_error_bound(-1.0, 2).is_err());
    }

    #[test]
    fn detailed_identity_bound_is_below_simplified() {
        for d in [2u32, 3, 4] {
            let r0 = crate::expkernel::smallest_feasible_r(d).unwrap() as f64;
            for r in [r0, 2.0 * r0, 10.0 * r0] {
                for k in 1..=d {
                    assert!(approx_identity_bound_detailed(r, k) <= approx_identity_bound(r, d));
                }
            }
        }
    }

    #[test]
    fn identity_error_within_bound_terms() {
        let k = KernelSpec::schedule_off(0.05, 1e-6, 1.3, 2).unwrap();
        for deg in 1..=2u32 {
            let t = identity_bound_terms(&k, deg).unwrap();
            let m = measured_identity_error(&k, deg as usize).unwrap();
            assert!(m <= t.total, "k={deg} measured {m} bound {}", t.total);
        }
    }
}
