//! Explicit elements of the quadratic module generated by `1 - x_i²` on
//! `[-1,1]^n`, their constructors, and an expansion-based verifier.

use serde::{Deserialize, Serialize};

use crate::cheb::ChebPoly1;
use crate::chebn::{ChebPolyN, MultiIndex};
use crate::error::{PklError, Result};
use crate::oracle::OracleResult;
use crate::sos::{Root, WeightedSquaresSOS};

/// `σ₀ + Σ_i (1 - x_i²) σ_i` with every `σ` a weighted sum of squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModuleElement {
    pub n: usize,
    pub declared_degree: u32,
    pub base: WeightedSquaresSOS,
    pub multipliers: Vec<WeightedSquaresSOS>,
}

/// `1 - x_i²` in the Chebyshev basis.
pub fn box_constraint(n: usize, axis: usize) -> ChebPolyN {
    let mut g = ChebPolyN::constant(n, 0.5);
    g.add_term(MultiIndex::axis(n, axis, 2), -0.5);
    g
}

impl QuadraticModuleElement {
    pub fn empty(n: usize, declared_degree: u32) -> Self {
        Self {
            n,
            declared_degree,
            base: WeightedSquaresSOS::new(n, 0),
            multipliers: (0..n).map(|_| WeightedSquaresSOS::new(n, 2)).collect(),
        }
    }

    pub fn expand(&self) -> ChebPolyN {
        let mut out = self.base.expand();
        for (i, m) in self.multipliers.iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            out = &out + &box_constraint(self.n, i).mul(&m.expand());
        }
        out
    }

    /// Adds `scale · other` component by component.
    pub fn absorb(&mut self, other: &QuadraticModuleElement, scale: f64) -> Result<()> {
        if other.n != self.n {
            return Err(PklError::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        self.base.extend_scaled(&other.base, scale)?;
        for (m, o) in self.multipliers.iter_mut().zip(&other.multipliers) {
            m.extend_scaled(o, scale)?;
        }
        Ok(())
    }

    /// Evaluates the certificate structurally: `σ₀(x) + Σ (1 - x_i²) σ_i(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.base.eval(x)?;
        for (m, xi) in self.multipliers.iter().zip(x) {
            v += (1.0 - xi * xi) * m.eval(x)?;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDegree {
    pub name: String,
    pub degree: u32,
    pub limit: u32,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// `‖expand(cert) - target‖_{1,cheb}`.
    pub residual: f64,
    /// Largest `|expand(cert) - target|` over a sample grid of the box.
    pub sup_residual: f64,
    pub expanded_degree: u32,
    pub components: Vec<ComponentDegree>,
    pub degrees_ok: bool,
}

pub fn verify(cert: &QuadraticModuleElement, target: &ChebPolyN) -> Result<VerifyReport> {
    if target.nvars() != cert.n {
        return Err(PklError::DimensionMismatch {
            expected: cert.n,
            got: target.nvars(),
        });
    }
    let expanded = cert.expand();
    let diff = &expanded - target;
    let mut components = vec![ComponentDegree {
        name: "base".into(),
        degree: cert.base.degree(),
        limit: cert.declared_degree,
        within: cert.base.degree() <= cert.declared_degree,
    }];
    for (i, m) in cert.multipliers.iter().enumerate() {
        let limit = cert.declared_degree.saturating_sub(2);
        components.push(ComponentDegree {
            name: format!("multiplier[{i}]"),
            degree: m.degree(),
            limit,
            within: m.is_empty() || m.degree() <= limit,
        });
    }
    let expanded_degree = expanded.total_degree();
    let degrees_ok =
        expanded_degree <= cert.declared_degree && components.iter().all(|c| c.within);
    Ok(VerifyReport {
        residual: diff.norm_1cheb(),
        sup_residual: sampled_sup(&diff),
        expanded_degree,
        components,
        degrees_ok,
    })
}

fn sampled_sup(p: &ChebPolyN) -> f64 {
    let n = p.nvars();
    let m: usize = match n {
        1 => 201,
        2 => 41,
        _ => 13,
    };
    let mut best = 0.0f64;
    let mut x = vec![0.0; n];
    for flat in 0..m.pow(n as u32) {
        let mut rem = flat;
        for xi in x.iter_mut() {
            *xi = -1.0 + 2.0 * (rem % m) as f64 / (m - 1) as f64;
            rem /= m;
        }
        best = best.max(p.eval(&x).expect("dimension").abs());
    }
    best
}

/// `U_{k-1} = T_k' / k` in Chebyshev-T coefficients.
pub fn chebyshev_u(k_minus_one: usize) -> ChebPoly1 {
    let k = k_minus_one + 1;
    ChebPoly1::basis(k).derivative(1).scale(1.0 / k as f64)
}

/// `1 - T_k² = (1 - x²) U_{k-1}²`.
pub fn pell_certificate(k: u32) -> Result<QuadraticModuleElement> {
    if k == 0 {
        return Err(PklError::Precondition("pell_certificate needs k >= 1".into()));
    }
    let mut cert = QuadraticModuleElement::empty(1, 2 * k);
    cert.multipliers[0].push(1.0, Root::Tensor(vec![chebyshev_u(k as usize - 1)]))?;
    Ok(cert)
}

/// Certificate for `1 + sign · T_α` of degree `2|α|`:
/// `1 ± P = ½(1 ± P)² + ½(1 - P²)` with
/// `1 - Π T_{α_i}² = Σ_i (1 - x_i²) (U_{α_i - 1}(x_i) Π_{j>i} T_{α_j}(x_j))²`.
pub fn one_pm_talpha(alpha: &MultiIndex, sign: i8) -> Result<QuadraticModuleElement> {
    if alpha.total() == 0 {
        return Err(PklError::Precondition("one_pm_talpha needs |alpha| >= 1".into()));
    }
    if sign != 1 && sign != -1 {
        return Err(PklError::Precondition(format!("sign must be +1 or -1, got {sign}")));
    }
    let n = alpha.len();
    let mut cert = QuadraticModuleElement::empty(n, 2 * alpha.total());
    let mut lin = ChebPolyN::constant(n, 1.0);
    lin.add_term(alpha.clone(), sign as f64);
    cert.base.push(0.5, Root::Poly(lin))?;
    for (i, &a) in alpha.0.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let factors: Vec<ChebPoly1> = (0..n)
            .map(|j| match j.cmp(&i) {
                std::cmp::Ordering::Less => ChebPoly1::constant(1.0),
                std::cmp::Ordering::Equal => chebyshev_u(a as usize - 1),
                std::cmp::Ordering::Greater => ChebPoly1::basis(alpha.0[j] as usize),
            })
            .collect();
        cert.multipliers[i].push(0.5, Root::Tensor(factors))?;
    }
    Ok(cert)
}

/// Certificate for `‖p‖_{1,cheb} - p` of degree `2 deg p`, summing
/// `|p_α| (1 - sign(p_α) T_α)` over the terms of `p`.
pub fn norm_shift_certificate(p: &ChebPolyN) -> Result<QuadraticModuleElement> {
    if p.is_zero() {
        return Err(PklError::Precondition("norm_shift_certificate needs p != 0".into()));
    }
    let n = p.nvars();
    let mut cert = QuadraticModuleElement::empty(n, 2 * p.total_degree());
    for (alpha, c) in p.terms() {
        if alpha.total() == 0 {
            if c < 0.0 {
                cert.base
                    .push(-2.0 * c, Root::Poly(ChebPolyN::constant(n, 1.0)))?;
            }
            continue;
        }
        let sign = if c > 0.0 { -1 } else { 1 };
        cert.absorb(&one_pm_talpha(alpha, sign)?, c.abs())?;
    }
    Ok(cert)
}

/// Certificate for `f + ε` with `ε = ‖f - q‖_{1,cheb}` and `q` the expansion
/// of `q_sos`: `f + ε = q + (‖q - f‖ - (q - f))`.
pub fn assemble_putinar(
    f: &ChebPolyN,
    q_sos: &WeightedSquaresSOS,
) -> Result<(f64, QuadraticModuleElement)> {
    if f.nvars() != q_sos.nvars() {
        return Err(PklError::DimensionMismatch {
            expected: f.nvars(),
            got: q_sos.nvars(),
        });
    }
    let q = q_sos.expand();
    if q.total_degree() < f.total_degree() {
        return Err(PklError::Precondition(format!(
            "deg q = {} is below deg f = {}",
            q.total_degree(),
            f.total_degree()
        )));
    }
    let diff = &q - f;
    let eps = diff.norm_1cheb();
    let mut cert = QuadraticModuleElement::empty(f.nvars(), 2 * q.total_degree());
    cert.base.extend_scaled(q_sos, 1.0)?;
    if !diff.is_zero() {
        cert.absorb(&norm_shift_certificate(&diff)?, 1.0)?;
    }
    Ok((eps, cert))
}

/// `‖f - f_min_candidate - expand(q)‖_{1,cheb}`.
pub fn cor_1norm_gap(f: &ChebPolyN, q_sos: &WeightedSquaresSOS, f_min_candidate: f64) -> f64 {
    (&f.add_constant(-f_min_candidate) - &q_sos.expand()).norm_1cheb()
}

/// `1 + f_min / (2 c d² f_max)`.
pub fn extension_radius_threshold(f_min: f64, f_max: f64, d: u32, c: f64) -> f64 {
    1.0 + f_min / (2.0 * c * (d as f64).powi(2) * f_max)
}

/// Whether `R` satisfies the sufficient condition `R ≤ 1 + f_min/(2cd²f_max)`
/// with `f_min`, `f_max` replaced by the oracle's certified bounds.
pub fn check_extension_radius(f: &ChebPolyN, radius: f64, c: f64, oracle: &OracleResult) -> bool {
    if radius <= 1.0 {
        return true;
    }
    let lo = oracle.lower();
    let hi = oracle.upper();
    if lo <= 0.0 {
        return false;
    }
    radius <= extension_radius_threshold(lo, hi, f.total_degree().max(1), c)
}

/// A certificate that `f - bound_value ∈ Q(1 - x²)` at level `r_level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedLowerBound {
    pub f: ChebPolyN,
    pub r_level: u32,
    pub epsilon: f64,
    pub certificate: QuadraticModuleElement,
    pub bound_value: f64,
}

/// From an SOS approximation `q ≈ f - c`, certifies `f ≥ c - ε` on the box.
pub fn certify_lower_bound(
    f: &ChebPolyN,
    c: f64,
    q_sos: &WeightedSquaresSOS,
) -> Result<CertifiedLowerBound> {
    let (eps, cert) = assemble_putinar(&f.add_constant(-c), q_sos)?;
    Ok(CertifiedLowerBound {
        f: f.clone(),
        r_level: cert.declared_degree,
        epsilon: eps,
        certificate: cert,
        bound_value: c - eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::grid_oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(v: Vec<u32>) -> MultiIndex {
        MultiIndex(v)
    }

    fn target_pell(k: u32) -> ChebPolyN {
        let t = ChebPolyN::basis(m(vec![k]));
        &ChebPolyN::constant(1, 1.0) - &t.mul(&t)
    }

    #[test]
    fn pell_small_cases() {
        // k = 2: 1 - T_2² = (1 - x²)(2x)²
        let c = pell_certificate(2).unwrap();
        let root = match &c.multipliers[0].terms()[0].root {
            Root::Tensor(f) => f[0].clone(),
            _ => unreachable!(),
        };
        assert_eq!(root, ChebPoly1::new(vec![0.0, 2.0]));
        let c1 = pell_certificate(1).unwrap();
        assert!(verify(&c1, &target_pell(1)).unwrap().residual == 0.0);
        for k in 1..=12 {
            let r = verify(&pell_certificate(k).unwrap(), &target_pell(k)).unwrap();
            assert!(r.residual <= 1e-12, "k={k} residual {}", r.residual);
            assert!(r.degrees_ok);
        }
        assert!(pell_certificate(0).is_err());
    }

    #[test]
    fn one_minus_x() {
        let c = one_pm_talpha(&m(vec![1]), -1).unwrap();
        let want = ChebPolyN::from_terms(1, vec![(m(vec![0]), 1.0), (m(vec![1]), -1.0)]).unwrap();
        assert!(verify(&c, &want).unwrap().residual <= 1e-15);
        assert_eq!(c.declared_degree, 2);
    }

    #[test]
    fn bivariate_and_degree_audit() {
        let c = one_pm_talpha(&m(vec![1, 1]), 1).unwrap();
        let want = ChebPolyN::basis(m(vec![1, 1])).add_constant(1.0);
        let r = verify(&c, &want).unwrap();
        assert!(r.residual <= 1e-12);
        assert_eq!(c.declared_degree, 4);
        let c = one_pm_talpha(&m(vec![2, 3]), -1).unwrap();
        let want = ChebPolyN::basis(m(vec![2, 3])).scale(-1.0).add_constant(1.0);
        let r = verify(&c, &want).unwrap();
        assert_eq!(c.declared_degree, 10);
        assert!(r.degrees_ok, "{:?}", r.components);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn norm_shift_examples() {
        let t1 = ChebPolyN::basis(m(vec![1]));
        let c = norm_shift_certificate(&t1).unwrap();
        assert!(verify(&c, &t1.scale(-1.0).add_constant(1.0)).unwrap().residual <= 1e-15);

        let p = ChebPolyN::from_terms(1, vec![(m(vec![1]), 1.0), (m(vec![2]), 1.0)]).unwrap();
        let c = norm_shift_certificate(&p).unwrap();
        assert!(verify(&c, &p.scale(-1.0).add_constant(2.0)).unwrap().residual <= 1e-11);

        let p = ChebPolyN::from_terms(2, vec![(m(vec![1, 0]), -3.0)]).unwrap();
        let c = norm_shift_certificate(&p).unwrap();
        assert!(verify(&c, &p.scale(-1.0).add_constant(3.0)).unwrap().residual <= 1e-14);
        assert_eq!(c.base.terms().len(), 1);
        match &c.base.terms()[0].root {
            Root::Poly(q) => assert_eq!(q.coeff(&m(vec![1, 0])), 1.0),
            _ => unreachable!(),
        }

        let p = ChebPolyN::from_terms(1, vec![(m(vec![0]), -0.5), (m(vec![3]), 0.25)]).unwrap();
        let c = norm_shift_certificate(&p).unwrap();
        assert!(verify(&c, &p.scale(-1.0).add_constant(0.75)).unwrap().residual <= 1e-14);
        assert!(norm_shift_certificate(&ChebPolyN::zero(1)).is_err());
    }

    #[test]
    fn corrupted_weight_is_detected() {
        let mut c = pell_certificate(3).unwrap();
        c.multipliers[0].terms_mut()[0].weight = 2.0;
        assert!(verify(&c, &target_pell(3)).unwrap().residual > 0.1);
    }

    #[test]
    fn degree_report_flags_oversized_multiplier() {
        let mut c = pell_certificate(3).unwrap();
        c.declared_degree = 4;
        let r = verify(&c, &target_pell(3)).unwrap();
        assert!(!r.degrees_ok);
        assert!(!r.components[1].within);
    }

    #[test]
    fn putinar_zero_gap() {
        let mut q = WeightedSquaresSOS::new(1, 0);
        q.push(1.0, Root::Poly(ChebPolyN::constant(1, 1.0))).unwrap();
        let f = ChebPolyN::constant(1, 1.0);
        let (eps, cert) = assemble_putinar(&f, &q).unwrap();
        assert_eq!(eps, 0.0);
        assert_eq!(cert.base, q);
        assert!(cert.multipliers[0].is_empty());
    }

    #[test]
    fn putinar_gap_and_soundness() {
        // f = 1 - x², q = ½ + ½x², so q - f = -½ + (3/2)x²
        let f = ChebPolyN::from_terms(1, vec![(m(vec![0]), 0.5), (m(vec![2]), -0.5)]).unwrap();
        let mut q = WeightedSquaresSOS::new(1, 0);
        q.push(0.5, Root::Poly(ChebPolyN::constant(1, 1.0))).unwrap();
        q.push(0.5, Root::Poly(ChebPolyN::basis(m(vec![1])))).unwrap();
        let (eps, cert) = assemble_putinar(&f, &q).unwrap();
        assert!((eps - (&q.expand() - &f).norm_1cheb()).abs() < 1e-15);
        let r = verify(&cert, &f.add_constant(eps)).unwrap();
        assert!(r.residual <= 1e-12);
        assert!(r.degrees_ok);
        let bad = ChebPolyN::basis(m(vec![3]));
        assert!(assemble_putinar(&bad, &q).is_err());
    }

    #[test]
    fn gap_invariant_under_shift() {
        let f = ChebPolyN::from_terms(1, vec![(m(vec![0]), 2.0), (m(vec![1]), 1.0)]).unwrap();
        let mut q = WeightedSquaresSOS::new(1, 0);
        q.push(0.5, Root::Poly(f.add_constant(-1.0))).unwrap();
        let g1 = cor_1norm_gap(&f, &q, 1.0);
        let g2 = cor_1norm_gap(&f.add_constant(3.0), &q, 4.0);
        assert!((g1 - g2).abs() < 1e-14);
        let empty = WeightedSquaresSOS::new(1, 0);
        assert!((cor_1norm_gap(&ChebPolyN::constant(1, 1.0), &empty, 0.25) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn extension_radius() {
        let t = extension_radius_threshold(0.5, 1.0, 2, 5f64.exp());
        assert!((t - (1.0 + 0.5 / (8.0 * 5f64.exp()))).abs() < 1e-15);
        assert!((t - 1.00042).abs() < 1e-5);
        let f = ChebPolyN::from_terms(1, vec![(m(vec![0]), 3.0), (m(vec![1]), 1.0)]).unwrap();
        let o = grid_oracle(&f, 101).unwrap();
        assert!(check_extension_radius(&f, 1.0, 5f64.exp(), &o));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let r = 1.0 + rng.gen_range(0.0..0.5);
            // c = 1 is the weaker requirement
            if check_extension_radius(&f, r, 5f64.exp(), &o) {
                assert!(check_extension_radius(&f, r, 1.0, &o));
            }
        }
        assert!(check_extension_radius(&f, 1.2, 1.0, &o));
        assert!(!check_extension_radius(&f, 1.2, 5f64.exp(), &o));
    }

    #[test]
    fn json_round_trip() {
        let c = one_pm_talpha(&m(vec![2, 1]), -1).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"declared_degree\":6"));
        let back: QuadraticModuleElement = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
