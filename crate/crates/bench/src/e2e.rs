//! Certified lower bounds on `min f` over `[-1,1]^n`, either as the rate
//! arithmetic at the hierarchy level that guarantees a relative error `ε`,
//! or as an actual kernel-built certificate at small parameters.

use std::f64::consts::E;

use pkl_core::certificates::{certify_lower_bound, verify, CertifiedLowerBound};
use pkl_core::expkernel::{kernel_degree_upper_bound, schedule, KernelSpec, Schedule};
use pkl_core::kernel_op::{apply_product_kernel, approx_identity_bound, kernel_quadrature};
use pkl_core::oracle::{grid_oracle, OracleResult};
use pkl_core::{ChebPolyN, PklError};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Largest level the threshold search will return.
pub const MAX_LEVEL_R: u64 = 1_000_000_000;
/// Kernel degree multiplier: `deg K_r ≤ 104 r`.
pub const DEGREE_FACTOR: u64 = 104;
pub const ORACLE_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Arithmetic,
    Construct,
}

/// Kernel parameters for construction mode, chosen directly rather than
/// from the rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructParams {
    pub sigma: f64,
    pub delta: f64,
    pub radius: f64,
}

impl Default for ConstructParams {
    fn default() -> Self {
        Self { sigma: 0.15, delta: 1e-3, radius: 1.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    /// Always `"schedule-off"`: these parameters are not the rate schedule.
    pub flag: String,
    pub params: ConstructParams,
    pub kernel_degree: usize,
    pub nodes_per_axis: usize,
    /// Shift `c` with `f - c ≥ 0` on every quadrature node.
    pub shift: f64,
    pub epsilon: f64,
    pub bound_value: f64,
    pub level: u32,
    pub verify_residual: f64,
    pub certificate: CertifiedLowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndReport {
    pub mode: Mode,
    pub n: usize,
    pub d: u32,
    pub epsilon: f64,
    /// `300 d^{5/2} / ε`.
    pub threshold: f64,
    /// Smallest integer `r` with `r / log r ≥ threshold`.
    pub r: u64,
    pub ratio: f64,
    /// `t = 104 r`.
    pub t: u64,
    /// `2 n t = 208 n r`, the hierarchy level the rate applies to.
    pub level: u64,
    pub f_min: f64,
    pub f_max: f64,
    /// `"oracle"` (grid oracle, `n ≤ 3`) or `"norm"` (`±‖f‖_{1,cheb}`).
    pub range_source: String,
    pub norm_1cheb: f64,
    /// `ε (f_max - f_min)`.
    pub slack_range: f64,
    /// `e n (7/2 d^{9/2} + 14) ‖f‖_{1,cheb} log r / r²`.
    pub slack_rate: f64,
    pub slack: f64,
    /// `f_min - slack`, the lower bound the rate certifies at `level`.
    pub bound_value: f64,
    /// `(7/2 d^{9/2} + 14) log r / r²` at `r`.
    pub identity_bound: f64,
    /// Schedule at `(r, max(d, 2))`.
    pub schedule: Schedule,
    /// Explicit degree bound behind the `104 r` factor.
    pub kernel_degree_bound: f64,
    pub construction: Option<ConstructionReport>,
}

/// `300 d^{5/2} / ε`.
pub fn threshold(d: u32, eps: f64) -> f64 {
    300.0 * (d as f64).powf(2.5) / eps
}

/// Smallest integer `r ≥ 3` with `r / log r ≥ need`.
pub fn smallest_r(need: f64) -> Result<u64> {
    let ratio = |r: u64| r as f64 / (r as f64).ln();
    if !(need.is_finite()) || ratio(MAX_LEVEL_R) < need {
        return Err(BenchError::Precondition(format!(
            "r / log r >= {need} needs r above {MAX_LEVEL_R}"
        )));
    }
    let (mut lo, mut hi) = (3u64, MAX_LEVEL_R);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if ratio(mid) >= need {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// `e n (7/2 d^{9/2} + 14) ‖f‖ log r / r²`.
pub fn rate_slack(n: usize, d: u32, norm: f64, r: u64) -> f64 {
    E * n as f64 * approx_identity_bound(r as f64, d) * norm
}

fn range(f: &ChebPolyN) -> Result<(f64, f64, String, Option<OracleResult>)> {
    if f.nvars() <= 3 {
        let o = grid_oracle(f, ORACLE_POINTS)?;
        Ok((o.f_min_hat, o.f_max_hat, "oracle".into(), Some(o)))
    } else {
        let m = f.norm_1cheb();
        Ok((-m, m, "norm".into(), None))
    }
}

pub fn end_to_end_bound(f: &ChebPolyN, eps: f64, mode: Mode) -> Result<EndToEndReport> {
    end_to_end_bound_with(f, eps, mode, ConstructParams::default())
}

pub fn end_to_end_bound_with(f: &ChebPolyN, eps: f64, mode: Mode, params: ConstructParams) -> Result<EndToEndReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(BenchError::Precondition(format!("eps must be in (0, 1), got {eps}")));
    }
    let d = f.total_degree();
    if d == 0 {
        return Err(BenchError::Precondition("f must be nonconstant".into()));
    }
    let n = f.nvars();
    let need = threshold(d, eps);
    let r = smallest_r(need)?;
    let t = DEGREE_FACTOR * r;
    let level = 2 * n as u64 * t;
    let (f_min, f_max, range_source, _) = range(f)?;
    let norm = f.norm_1cheb();
    let slack_range = eps * (f_max - f_min);
    let slack_rate = rate_slack(n, d, norm, r);
    let construction = match mode {
        Mode::Arithmetic => None,
        Mode::Construct => Some(construct_certificate(f, params)?),
    };
    Ok(EndToEndReport {
        mode,
        n,
        d,
        epsilon: eps,
        threshold: need,
        r,
        ratio: r as f64 / (r as f64).ln(),
        t,
        level,
        f_min,
        f_max,
        range_source,
        norm_1cheb: norm,
        slack_range,
        slack_rate,
        slack: slack_range + slack_rate,
        bound_value: f_min - slack_range - slack_rate,
        identity_bound: approx_identity_bound(r as f64, d),
        schedule: schedule(r, d.max(2))?,
        kernel_degree_bound: kernel_degree_upper_bound(r),
        construction,
    })
}

/// Minimum of `f` over the tensor grid of kernel quadrature nodes.
fn node_minimum(f: &ChebPolyN, nodes: &[f64]) -> Result<f64> {
    let n = f.nvars();
    let m = nodes.len();
    let total = (m as u128).pow(n as u32);
    if total > 50_000_000 {
        return Err(PklError::TensorOverflow { needed: total, cap: 50_000_000 }.into());
    }
    let mut best = f64::INFINITY;
    let mut x = vec![0.0; n];
    for flat in 0..total as usize {
        let mut rem = flat;
        for axis in (0..n).rev() {
            x[axis] = nodes[rem % m];
            rem /= m;
        }
        best = best.min(f.eval(&x)?);
    }
    Ok(best)
}

/// Builds `f - c ≈ K_n(f - c)`, an explicit weighted-squares image, and
/// turns it into a certificate of `f ≥ c - ε` on the box.
pub fn construct_certificate(f: &ChebPolyN, params: ConstructParams) -> Result<ConstructionReport> {
    let d = f.total_degree();
    let kernel = KernelSpec::schedule_off(params.sigma, params.delta, params.radius, d)?;
    let deg_f = f.axis_degrees().into_iter().max().unwrap_or(0) as usize;
    let q = kernel_quadrature(&kernel, deg_f)?;
    let mut c = node_minimum(f, &q.nodes)?;
    c -= 1e-12 * (1.0 + c.abs());
    let mut attempts = 0;
    let img = loop {
        match apply_product_kernel(&kernel, &f.add_constant(-c)) {
            Ok(img) => break img,
            Err(PklError::NegativeNode { value, .. }) if attempts < 16 => {
                c += value - 1e-12 * (1.0 + c.abs());
                attempts += 1;
            }
            Err(e) => return Err(e.into()),
        }
    };
    let cert = certify_lower_bound(f, c, &img.sos)?;
    let report = verify(&cert.certificate, &f.add_constant(-cert.bound_value))?;
    Ok(ConstructionReport {
        flag: "schedule-off".into(),
        params,
        kernel_degree: kernel.kernel_degree,
        nodes_per_axis: img.nodes_per_axis,
        shift: c,
        epsilon: cert.epsilon,
        bound_value: cert.bound_value,
        level: cert.r_level,
        verify_residual: report.residual,
        certificate: cert,
    })
}
