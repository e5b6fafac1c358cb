//! Gram-matrix parametrisation of sums of squares in the Chebyshev basis.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use pkl_core::sos::{Root, WeightedSquaresSOS};
use pkl_core::{ChebPolyN, MultiIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdpError};
use crate::problem::{LinearForm, SdpProblem};

/// `T_β · T_γ` in the `T_α` basis.
pub fn product_terms(beta: &MultiIndex, gamma: &MultiIndex) -> Vec<(MultiIndex, f64)> {
    let mut acc: Vec<(Vec<u32>, f64)> = vec![(Vec::with_capacity(beta.len()), 1.0)];
    for (&a, &b) in beta.as_slice().iter().zip(gamma.as_slice()) {
        let (s, d) = (a + b, a.abs_diff(b));
        let mut next = Vec::with_capacity(acc.len() * 2);
        for (idx, c) in acc {
            if a == 0 || b == 0 {
                let mut i = idx;
                i.push(s);
                next.push((i, c));
            } else {
                let mut i1 = idx.clone();
                i1.push(s);
                next.push((i1, 0.5 * c));
                let mut i2 = idx;
                i2.push(d);
                next.push((i2, 0.5 * c));
            }
        }
        acc = next;
    }
    let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (i, c) in acc {
        *merged.entry(i).or_insert(0.0) += c;
    }
    merged.into_iter().map(|(i, c)| (MultiIndex(i), c)).collect()
}

/// Linear map from a symmetric Gram matrix `G` to the coefficients of
/// `Σ_pq G_pq T_βp T_βq`.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub nvars: usize,
    pub basis: Vec<MultiIndex>,
    /// `(p, q, terms)` for `p ≤ q`; the terms are the coefficient of `G_pq`
    /// and already include the factor 2 for off-diagonal pairs.
    pub entries: Vec<(usize, usize, Vec<(MultiIndex, f64)>)>,
}

pub fn linearize_products(nvars: usize, basis: &[MultiIndex]) -> Result<Linearization> {
    if let Some(b) = basis.iter().find(|b| b.len() != nvars) {
        return Err(SdpError::Precondition(format!("basis index {b} has wrong dimension")));
    }
    let mut entries = Vec::with_capacity(basis.len() * (basis.len() + 1) / 2);
    for p in 0..basis.len() {
        for q in p..basis.len() {
            let f = if p == q { 1.0 } else { 2.0 };
            let terms = product_terms(&basis[p], &basis[q]).into_iter().map(|(a, c)| (a, f * c)).collect();
            entries.push((p, q, terms));
        }
    }
    Ok(Linearization { nvars, basis: basis.to_vec(), entries })
}

impl Linearization {
    pub fn expand(&self, gram: &DMatrix<f64>) -> ChebPolyN {
        let mut out = ChebPolyN::zero(self.nvars);
        for (p, q, terms) in &self.entries {
            let g = gram[(*p, *q)];
            if g == 0.0 {
                continue;
            }
            for (a, c) in terms {
                out.add_term(a.clone(), g * c);
            }
        }
        out
    }

    /// The adjoint under the Frobenius product on Gram matrices and the
    /// coefficient dot product on polynomials.
    pub fn adjoint(&self, coeffs: &ChebPolyN) -> DMatrix<f64> {
        let n = self.basis.len();
        let mut m = DMatrix::zeros(n, n);
        for (p, q, terms) in &self.entries {
            let v: f64 = terms.iter().map(|(a, c)| c * coeffs.coeff(a)).sum();
            if p == q {
                m[(*p, *p)] = v;
            } else {
                m[(*p, *q)] = 0.5 * v;
                m[(*q, *p)] = 0.5 * v;
            }
        }
        m
    }

    /// Adds `multiplier · Σ G_pq T_βp T_βq` of PSD block `block` into the
    /// coefficient rows, creating rows on demand.
    pub fn add_to_rows(&self, block: usize, multiplier: Option<&ChebPolyN>, rows: &mut BTreeMap<MultiIndex, LinearForm>) {
        for (p, q, terms) in &self.entries {
            let mut contrib: BTreeMap<&MultiIndex, f64> = BTreeMap::new();
            let owned;
            let list: &[(MultiIndex, f64)] = match multiplier {
                None => terms,
                Some(g) => {
                    let mut poly = ChebPolyN::zero(self.nvars);
                    for (a, c) in terms {
                        poly.add_term(a.clone(), *c);
                    }
                    owned = g.mul(&poly).terms().map(|(a, c)| (a.clone(), c)).collect::<Vec<_>>();
                    &owned
                }
            };
            for (a, c) in list {
                *contrib.entry(a).or_insert(0.0) += c;
            }
            for (a, c) in contrib {
                if c != 0.0 {
                    rows.entry(a.clone()).or_default().add_entry(block, *p, *q, c);
                }
            }
        }
    }
}

/// All multi-indices in `n` variables with total degree at most `deg`,
/// graded then lexicographic.
pub fn total_degree_basis(n: usize, deg: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if cur.len() == n {
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, cur, out);
            cur.pop();
        }
    }
    rec(n, deg, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.total().cmp(&b.total()).then_with(|| a.cmp(b)));
    out
}

/// All multi-indices with every entry at most `deg`.
pub fn tensor_basis(n: usize, deg: u32) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex(Vec::new())];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|m| {
                (0..=deg).map(move |k| {
                    let mut v = m.0.clone();
                    v.push(k);
                    MultiIndex(v)
                })
            })
            .collect();
    }
    out
}

/// Adds one equality per coefficient row, `rhs` taken from `target`.
pub fn add_coefficient_rows(problem: &mut SdpProblem, rows: BTreeMap<MultiIndex, LinearForm>, target: &ChebPolyN) -> Vec<MultiIndex> {
    let mut rows = rows;
    for (a, _) in target.terms() {
        rows.entry(a.clone()).or_default();
    }
    let mut keys = Vec::with_capacity(rows.len());
    for (a, form) in rows {
        let rhs = target.coeff(&a);
        problem.add_constraint(form, rhs);
        keys.push(a);
    }
    keys
}

/// A Gram representation `Σ_pq G_pq T_βp T_βq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSOS {
    pub nvars: usize,
    pub basis: Vec<MultiIndex>,
    #[serde(with = "gram_serde")]
    pub gram: DMatrix<f64>,
}

mod gram_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("gram must be square"));
        }
        Ok(DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()))
    }
}

impl GramSOS {
    pub fn new(nvars: usize, basis: Vec<MultiIndex>, gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != basis.len() || gram.ncols() != basis.len() {
            return Err(SdpError::Precondition("gram side does not match basis".into()));
        }
        if basis.iter().any(|b| b.len() != nvars) {
            return Err(SdpError::Precondition("basis index has wrong dimension".into()));
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        Ok(Self { nvars, basis, gram })
    }

    pub fn expand(&self) -> ChebPolyN {
        let lin = linearize_products(self.nvars, &self.basis).expect("basis checked");
        lin.expand(&self.gram)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.basis.is_empty() {
            return 0.0;
        }
        self.gram.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Eigen-decomposition into weighted squares, dropping non-positive
    /// eigenvalues.
    pub fn to_weighted_squares(&self, prefactor_degree: u32) -> Result<WeightedSquaresSOS> {
        let mut out = WeightedSquaresSOS::new(self.nvars, prefactor_degree);
        if self.basis.is_empty() {
            return Ok(out);
        }
        let eig = self.gram.clone().symmetric_eigen();
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam <= 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            let mut root = ChebPolyN::zero(self.nvars);
            for (p, b) in self.basis.iter().enumerate() {
                root.add_term(b.clone(), v[p]);
            }
            out.push(lam, Root::Poly(root))?;
        }
        Ok(out)
    }
}
