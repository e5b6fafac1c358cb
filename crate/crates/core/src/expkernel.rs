//! Polynomial approximation of `exp(-t)` on `[0, b]`, the parameter schedule
//! driving the kernel construction, and the SOS kernel
//! `K(x, y) = s((x-y)²/(4σ²))² / (√(2π) σ)`.

use std::f64::consts::{E, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::cheb::ChebPoly1;
use crate::error::{PklError, Result};

/// Uniform verification grid size for [`build_exp_approx`].
pub const EXP_GRID_POINTS: usize = 10_000;

/// A polynomial `s` with `|exp(-t) - s(t)| ≤ δ` on `[0, b]`, stored in the
/// Chebyshev basis of the mapped variable `u = 2t/b - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpApprox {
    pub b: f64,
    pub delta: f64,
    pub coeffs: ChebPoly1,
    pub theoretical_degree: usize,
    pub achieved_degree: usize,
    pub achieved_error: f64,
}

/// The scalar facts about an [`ExpApprox`], as reported by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpApproxSummary {
    pub b: f64,
    pub delta: f64,
    pub theoretical_degree: usize,
    pub achieved_degree: usize,
    pub achieved_error: f64,
}

impl ExpApprox {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.eval(2.0 * t / self.b - 1.0)
    }

    pub fn summary(&self) -> ExpApproxSummary {
        ExpApproxSummary {
            b: self.b,
            delta: self.delta,
            theoretical_degree: self.theoretical_degree,
            achieved_degree: self.achieved_degree,
            achieved_error: self.achieved_error,
        }
    }

    /// `max |exp(-t) - s(t)|` and `max |exp(-2t) - s(t)²|` over the
    /// verification points.
    pub fn grid_errors(&self) -> (f64, f64) {
        verification_points(self.b, self.achieved_degree)
            .into_iter()
            .fold((0.0f64, 0.0f64), |(e1, e2), t| {
                let s = self.eval(t);
                (e1.max(((-t).exp() - s).abs()), e2.max(((-2.0 * t).exp() - s * s).abs()))
            })
    }
}

/// `θ = ⌈max(½ b e², log(2/δ))⌉`.
pub fn theta(b: f64, delta: f64) -> f64 {
    (0.5 * b * E * E).max((2.0 / delta).ln()).ceil()
}

/// Whether the `½ b e²` branch attains the maximum in [`theta`].
pub fn theta_uses_b_branch(b: f64, delta: f64) -> bool {
    0.5 * b * E * E >= (2.0 / delta).ln()
}

/// Degree `⌈√(2θ log(4/δ))⌉` for which a `δ`-approximation of `exp(-t)` on
/// `[0, b]` is known to exist.
pub fn theoretical_degree(b: f64, delta: f64) -> Result<usize> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(PklError::Precondition(format!("b must be positive, got {b}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PklError::Precondition(format!("delta must lie in (0,1), got {delta}")));
    }
    let deg = (2.0 * theta(b, delta) * (4.0 / delta).ln()).sqrt().ceil();
    if deg > u32::MAX as f64 {
        return Err(PklError::Overflow(format!("theoretical degree {deg:e}")));
    }
    Ok(deg as usize)
}

fn verification_points(b: f64, degree: usize) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..EXP_GRID_POINTS)
        .map(|i| b * i as f64 / (EXP_GRID_POINTS - 1) as f64)
        .collect();
    // extreme points of the fitted degree resolve the boundary layer at t = 0
    let m = (4 * degree + 16).max(64);
    ts.extend((0..=m).map(|j| 0.5 * b * (1.0 - (PI * j as f64 / m as f64).cos())));
    ts
}

/// Truncated Chebyshev interpolant of `exp(-t)` on `[0, b]` of the smallest
/// degree whose verified error is at most `δ`, searched up to twice the
/// theoretical degree.
pub fn build_exp_approx(b: f64, delta: f64) -> Result<ExpApprox> {
    let theoretical = theoretical_degree(b, delta)?;
    let cap = 2 * theoretical;
    let full = ChebPoly1::interpolate(2 * cap + 32, |u| (-0.5 * b * (u + 1.0)).exp());
    let truncate = |m: usize| ChebPoly1::new(full.coeffs()[..=m.min(full.degree())].to_vec());
    let error_at = |m: usize| {
        let s = truncate(m);
        verification_points(b, m)
            .into_iter()
            .map(|t| ((-t).exp() - s.eval(2.0 * t / b - 1.0)).abs())
            .fold(0.0, f64::max)
    };
    let cap_err = error_at(cap);
    if cap_err > delta {
        return Err(PklError::ExpApprox {
            cap,
            error: cap_err,
            delta,
        });
    }
    // smallest passing degree, assuming the error decreases with the degree
    let (mut lo, mut hi) = (0usize, cap);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if error_at(mid) <= delta {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let achieved_error = error_at(hi);
    let (m, err) = if achieved_error <= delta {
        (hi, achieved_error)
    } else {
        (cap, cap_err)
    };
    Ok(ExpApprox {
        b,
        delta,
        coeffs: truncate(m),
        theoretical_degree: theoretical,
        achieved_degree: m,
        achieved_error: err,
    })
}

/// Parameter values of the kernel schedule at level `r` for degree `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub r: u64,
    pub d: u32,
    pub delta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub radius: f64,
    pub b: f64,
    /// `r / log r`.
    pub ratio: f64,
    /// `10√35 (1 + 1/√2) d^{5/2}`.
    pub required: f64,
    pub feasible: bool,
}

/// `10√35 (1 + 1/√2) d^{5/2}`.
pub fn feasibility_threshold(d: u32) -> f64 {
    10.0 * 35f64.sqrt() * (1.0 + 1.0 / SQRT_2) * (d as f64).powf(2.5)
}

/// `δ = r^{-7/2}`, `σ = √(log(1/δ))/r`, `γ = √(5/2 log r)`,
/// `R = 1 + γ(2+√2)√d σ`, `b = (R+1)²/(4σ²)`.
pub fn schedule(r: u64, d: u32) -> Result<Schedule> {
    if r < 2 || d < 2 {
        return Err(PklError::Precondition(format!(
            "schedule needs r >= 2 and d >= 2, got r = {r}, d = {d}"
        )));
    }
    let rf = r as f64;
    let delta = rf.powf(-3.5);
    let sigma = (1.0 / delta).ln().sqrt() / rf;
    let gamma = (2.5 * rf.ln()).sqrt();
    let radius = 1.0 + gamma * (2.0 + SQRT_2) * (d as f64).sqrt() * sigma;
    let b = (radius + 1.0).powi(2) / (4.0 * sigma * sigma);
    let ratio = rf / rf.ln();
    let required = feasibility_threshold(d);
    Ok(Schedule {
        r,
        d,
        delta,
        sigma,
        gamma,
        radius,
        b,
        ratio,
        required,
        feasible: ratio >= required,
    })
}

/// Smallest `r ≥ 2` whose schedule is feasible for degree `d`.
pub fn smallest_feasible_r(d: u32) -> Result<u64> {
    let need = feasibility_threshold(d);
    // r / log r is increasing for r ≥ e
    let (mut lo, mut hi) = (3u64, 4u64);
    while (hi as f64) / (hi as f64).ln() < need {
        lo = hi;
        hi *= 2;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if (mid as f64) / (mid as f64).ln() >= need {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    schedule(hi, d.max(2)).map(|s| s.r)
}

/// `4 ⌈√(2θ log(4/δ))⌉` at the schedule's `(b, δ)`: the kernel degree as
/// accounted from the theoretical exp-approximation degree.
pub fn kernel_degree_formula(r: u64, d: u32) -> Result<usize> {
    let s = schedule(r, d)?;
    Ok(4 * theoretical_degree(s.b, s.delta)?)
}

/// `20e r + 4√(7 log r) + 20√(log 4) e r / √(7/2 log r) + 4√(2 log 4)`,
/// the explicit upper bound on the kernel degree behind the `104 r` figure.
pub fn kernel_degree_upper_bound(r: u64) -> f64 {
    let rf = r as f64;
    let l4 = 4f64.ln();
    20.0 * E * rf
        + 4.0 * (7.0 * rf.ln()).sqrt()
        + 20.0 * l4.sqrt() * E * rf / (3.5 * rf.ln()).sqrt()
        + 4.0 * (2.0 * l4).sqrt()
}

/// The SOS kernel together with the parameters that produced it. `r` and
/// `gamma` are `None` for kernels built from explicitly chosen parameters
/// ("schedule-off" mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub r: Option<u64>,
    pub d: u32,
    pub delta: f64,
    pub sigma: f64,
    pub gamma: Option<f64>,
    pub radius: f64,
    pub b: f64,
    pub s: ExpApprox,
    /// Degree of `K(x, y)` in `x`.
    pub kernel_degree: usize,
}

/// Kernel for the schedule at `(r, d)`. Refuses infeasible schedules.
pub fn build_kernel(r: u64, d: u32) -> Result<KernelSpec> {
    let s = schedule(r, d)?;
    if !s.feasible {
        return Err(PklError::InfeasibleSchedule {
            r,
            d,
            ratio: s.ratio,
            required: s.required,
        });
    }
    let approx = build_exp_approx(s.b, s.delta)?;
    Ok(KernelSpec {
        r: Some(r),
        d,
        delta: s.delta,
        sigma: s.sigma,
        gamma: Some(s.gamma),
        radius: s.radius,
        b: s.b,
        kernel_degree: 4 * approx.achieved_degree,
        s: approx,
    })
}

impl KernelSpec {
    /// Kernel from directly chosen `σ`, `δ` and `R`, with `b = (R+1)²/(4σ²)`
    /// so that the approximation covers every `x ∈ [-1,1]`, `y ∈ [-R,R]`.
    pub fn schedule_off(sigma: f64, delta: f64, radius: f64, d: u32) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(PklError::Precondition(format!("sigma must be positive, got {sigma}")));
        }
        if !(radius >= 1.0 && radius.is_finite()) {
            return Err(PklError::Precondition(format!("R must be >= 1, got {radius}")));
        }
        let b = (radius + 1.0).powi(2) / (4.0 * sigma * sigma);
        let approx = build_exp_approx(b, delta)?;
        Ok(Self {
            r: None,
            d,
            delta,
            sigma,
            gamma: None,
            radius,
            b,
            kernel_degree: 4 * approx.achieved_degree,
            s: approx,
        })
    }

    /// `1 / (√(2π) σ)`.
    pub fn prefactor(&self) -> f64 {
        1.0 / ((2.0 * PI).sqrt() * self.sigma)
    }

    /// `s((x-y)²/(4σ²))`, the square root of the kernel up to the prefactor.
    #[inline]
    pub fn root_eval(&self, x: f64, y: f64) -> f64 {
        self.s.eval((x - y).powi(2) / (4.0 * self.sigma * self.sigma))
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.prefactor() * self.root_eval(x, y).powi(2)
    }

    /// The Gaussian density the kernel approximates.
    pub fn gaussian(&self, x: f64, y: f64) -> f64 {
        self.prefactor() * (-(x - y).powi(2) / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// `3δ / (√(2π) σ)`, the pointwise gap to the Gaussian on
    /// `[-1,1] × [-R,R]`.
    pub fn pointwise_gap_bound(&self) -> f64 {
        3.0 * self.delta * self.prefactor()
    }

    /// `2R · 3δ/(√(2π)σ) · max_{[-R,R]} |T_k|`, bounding the sup distance
    /// between the kernel operator and the truncated Gaussian operator on `T_k`.
    pub fn truncation_bound(&self, k: u32) -> f64 {
        2.0 * self.radius * self.pointwise_gap_bound() * max_abs_cheb_on(k, self.radius)
    }
}

/// Free evaluation, equal to [`KernelSpec::eval`].
pub fn kernel_eval(kernel: &KernelSpec, x: f64, y: f64) -> f64 {
    kernel.eval(x, y)
}

/// `max_{[-R,R]} |T_k| = T_k(R) = cosh(k arccosh R)` for `R ≥ 1`.
pub fn max_abs_cheb_on(k: u32, radius: f64) -> f64 {
    if radius <= 1.0 {
        1.0
    } else {
        (k as f64 * radius.acosh()).cosh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_examples() {
        let s = schedule(10, 2).unwrap();
        assert_relative_eq!(s.delta, 3.1623e-4, max_relative = 1e-4);
        assert_relative_eq!(s.sigma, 0.28391, max_relative = 1e-4);
        assert!(!schedule(2, 2).unwrap().feasible);
        assert_relative_eq!(feasibility_threshold(2), 571.3, max_relative = 1e-3);
        assert!(schedule(1, 2).is_err());
    }

    #[test]
    fn gamma_at_e_uses_natural_log() {
        // r must be an integer, so check the formula through the same expression
        let r = 7u64;
        let s = schedule(r, 2).unwrap();
        assert_relative_eq!(s.gamma, (2.5 * (7f64).ln()).sqrt(), max_relative = 1e-15);
        assert_relative_eq!((2.5 * E.ln()).sqrt(), 2.5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn schedule_identities() {
        for r in [10u64, 50, 200, 1000] {
            for d in [2u32, 3, 4] {
                let s = schedule(r, d).unwrap();
                let rf = r as f64;
                let delta = 1.0 / (rf * rf * rf * rf.sqrt());
                let sigma = (3.5 * rf.ln()).sqrt() / rf;
                let gamma = (2.5 * rf.ln()).sqrt();
                let big_r = 1.0 + gamma * (2.0 + 2f64.sqrt()) * (d as f64).sqrt() * sigma;
                let b = (big_r + 1.0) * (big_r + 1.0) / (4.0 * sigma * sigma);
                assert_relative_eq!(s.delta, delta, max_relative = 1e-12);
                assert_relative_eq!(s.sigma, sigma, max_relative = 1e-12);
                assert_relative_eq!(s.gamma, gamma, max_relative = 1e-12);
                assert_relative_eq!(s.radius, big_r, max_relative = 1e-12);
                assert_relative_eq!(s.b, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn theoretical_degree_examples() {
        assert_eq!(theta(1.0, 0.5), 4.0);
        assert_eq!(theoretical_degree(1.0, 0.5).unwrap(), 5);
        assert_eq!(theta(100.0, 1e-3), 370.0);
        assert_eq!(theoretical_degree(100.0, 1e-3).unwrap(), 79);
        assert!(theoretical_degree(1.0, 1.0).is_err());
        assert!(theoretical_degree(0.0, 0.5).is_err());
    }

    #[test]
    fn exp_approx_small_case() {
        let a = build_exp_approx(1.0, 0.5).unwrap();
        assert!(a.achieved_degree <= 5);
        assert!(a.achieved_error <= 0.5);
        assert!((1.0 - a.eval(0.0)).abs() <= 0.5);
    }

    #[test]
    fn exp_approx_meets_delta_and_square_bound() {
        for (b, delta) in [(1.0, 1e-2), (10.0, 1e-4), (100.0, 1e-6)] {
            let a = build_exp_approx(b, delta).unwrap();
            let (e1, e2) = a.grid_errors();
            assert!(e1 <= delta, "b={b} err {e1}");
            assert!(e2 <= 3.0 * delta, "b={b} squared err {e2}");
            assert!(a.achieved_degree <= 2 * a.theoretical_degree);
            assert!((1.0 - a.eval(0.0)).abs() <= delta);
        }
    }

    #[test]
    fn feasible_schedules_use_b_branch_and_small_radius() {
        for d in [2u32, 3, 4] {
            let r0 = smallest_feasible_r(d).unwrap();
            assert!(!schedule(r0 - 1, d).unwrap().feasible);
            for r in [r0, r0 + 1, 2 * r0, 10 * r0] {
                let s = schedule(r, d).unwrap();
                assert!(s.feasible);
                assert!(theta_uses_b_branch(s.b, s.delta));
                assert!(s.radius <= 1.0 + 1.0 / (10.0 * d as f64));
            }
        }
    }

    #[test]
    fn kernel_degree_accounting_below_104r() {
        for d in [2u32, 3, 4] {
            let r0 = smallest_feasible_r(d).unwrap();
            for r in (r0..=r0.max(10_000)).step_by(97) {
                let deg = kernel_degree_formula(r, d).unwrap();
                assert!((deg as f64) < 104.0 * r as f64, "r={r} d={d} deg={deg}");
                assert!((deg as f64) <= kernel_degree_upper_bound(r) + 8.0);
            }
            assert!(kernel_degree_upper_bound(r0) < 104.0 * r0 as f64);
        }
    }

    #[test]
    fn build_kernel_refuses_infeasible() {
        assert!(matches!(
            build_kernel(50, 2),
            Err(PklError::InfeasibleSchedule { .. })
        ));
    }

    #[test]
    fn kernel_values_and_gap() {
        let k = KernelSpec::schedule_off(0.1, 1e-5, 1.2, 2).unwrap();
        assert_eq!(k.kernel_degree, 4 * k.s.achieved_degree);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gap = k.pointwise_gap_bound();
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-1.0..=1.0);
            let y: f64 = rng.gen_range(-k.radius..=k.radius);
            let v = kernel_eval(&k, x, y);
            assert!(v >= 0.0);
            assert_eq!(v, k.eval(y, x));
            assert!((v - k.gaussian(x, y)).abs() <= gap);
        }
        for i in 0..=20 {
            let x = -1.0 + 0.1 * i as f64;
            let v = k.eval(x, x) / k.prefactor();
            assert!(v > 0.0);
            assert!(v >= (1.0 - k.delta).powi(2) && v <= (1.0 + k.delta).powi(2));
        }
    }

    #[test]
    fn max_abs_cheb_matches_endpoint_value() {
        for k in 0..6u32 {
            let t = ChebPoly1::basis(k as usize);
            assert_relative_eq!(max_abs_cheb_on(k, 1.3), t.eval(1.3).abs(), max_relative = 1e-12);
        }
        assert_eq!(max_abs_cheb_on(4, 0.9), 1.0);
    }
}
