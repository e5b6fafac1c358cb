//! Gauss–Legendre rules. These are the positive-weight, interior-node rules
//! used to discretise kernel integrals exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PklError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Polynomials up to this degree are integrated exactly.
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `N`-point Gauss–Legendre rule on `[a, b]`, exact to degree `2N - 1`.
///
/// Nodes come from Newton iteration on the Legendre three-term recurrence,
/// started from the Tricomi asymptotic guess, and are paired symmetrically.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(PklError::Precondition("gauss_legendre needs N >= 1".into()));
    }
    if !(a < b) {
        return Err(PklError::Precondition(format!(
            "gauss_legendre needs a < b, got [{a}, {b}]"
        )));
    }
    let (xs, ws) = legendre_reference(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(QuadratureRule {
        nodes: xs.iter().map(|x| mid + half * x).collect(),
        weights: ws.iter().map(|w| w * half).collect(),
        exact_degree: 2 * n - 1,
    })
}

/// Nodes (ascending) and weights on `[-1, 1]`.
fn legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos()
            * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[n - 1 - i] = x;
        xs[i] = -x;
        ws[n - 1 - i] = w;
        ws[i] = w;
    }
    if n % 2 == 1 {
        let (_, d) = legendre_with_derivative(n, 0.0);
        xs[n / 2] = 0.0;
        ws[n / 2] = 2.0 / (d * d);
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive composite Gauss–Legendre integration of `f` over `[a, b]` with
/// mandatory breakpoints. Panels inside each piece are doubled until two
/// successive estimates differ by less than `tol` (absolute) or the panel
/// budget runs out; returns the last estimate and whether it converged.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    points_per_panel: usize,
    tol: f64,
) -> Result<(f64, bool)> {
    let rule = gauss_legendre(points_per_panel, -1.0, 1.0)?;
    let composite = |lo: f64, hi: f64, panels: usize| -> f64 {
        let h = (hi - lo) / panels as f64;
        (0..panels)
            .map(|j| {
                let a = lo + h * j as f64;
                let mid = a + 0.5 * h;
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * f(mid + 0.5 * h * x))
                    .sum::<f64>()
                    * 0.5
                    * h
            })
            .sum()
    };
    let mut panels = 1usize;
    let mut prev = f64::NAN;
    for _ in 0..14 {
        let cur: f64 = breakpoints
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| composite(w[0], w[1], panels))
            .sum();
        if (cur - prev).abs() < tol {
            return Ok((cur, true));
        }
        prev = cur;
        panels *= 2;
    }
    Ok((prev, false))
}
