//! Sparse multivariate polynomials in the tensor Chebyshev basis
//! `T_α(x) = Π_i T_{α_i}(x_i)`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use crate::cheb::ChebPoly1;
use serde::{Deserialize, Serialize};

use crate::error::{PklError, Result};
use crate::json::PolyJson;

/// Exponent multi-index `α ∈ ℕ₀ⁿ`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// `e_axis * k`.
    pub fn axis(n: usize, axis: usize, k: u32) -> Self {
        let mut v = vec![0; n];
        v[axis] = k;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|α| = Σ α_i`.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Expansion of `T_a T_b` as `(index, weight)` pairs.
#[inline]
pub(crate) fn product_rule(a: u32, b: u32) -> [(u32, f64); 2] {
    if a == 0 || b == 0 {
        [(a + b, 1.0), (0, 0.0)]
    } else {
        [(a + b, 0.5), (a.abs_diff(b), 0.5)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyJson", into = "PolyJson")]
pub struct ChebPolyN {
    n: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl ChebPolyN {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1, "ChebPolyN needs at least one variable");
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(MultiIndex::zero(n), c);
        p
    }

    /// The basis polynomial `T_α`.
    pub fn basis(alpha: MultiIndex) -> Self {
        let mut p = Self::zero(alpha.len());
        p.add_term(alpha, 1.0);
        p
    }

    /// Sums duplicate indices and drops zeros; errors on dimension mismatch
    /// or non-finite coefficients.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut p = Self::zero(n);
        for (alpha, c) in terms {
            if alpha.len() != n {
                return Err(PklError::DimensionMismatch {
                    expected: n,
                    got: alpha.len(),
                });
            }
            if !c.is_finite() {
                return Err(PklError::NonFinite);
            }
            p.add_term(alpha, c);
        }
        Ok(p)
    }

    /// Embeds a univariate polynomial on coordinate `axis` of `ℝⁿ`.
    pub fn from_univariate(p: &ChebPoly1, n: usize, axis: usize) -> Self {
        let mut out = Self::zero(n);
        for (k, &c) in p.coeffs().iter().enumerate() {
            out.add_term(MultiIndex::axis(n, axis, k as u32), c);
        }
        out
    }

    /// `Π_i p_i(x_i)`.
    pub fn tensor(factors: &[ChebPoly1]) -> Self {
        let n = factors.len();
        let mut out = Self::constant(n, 1.0);
        for (axis, f) in factors.iter().enumerate() {
            out = out.mul(&Self::from_univariate(f, n, axis));
        }
        out
    }

    /// Converts a polynomial given by monomial coefficients `x^α`.
    pub fn from_monomial_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut out = Self::zero(n);
        for (alpha, c) in terms {
            if alpha.len() != n {
                return Err(PklError::DimensionMismatch {
                    expected: n,
                    got: alpha.len(),
                });
            }
            let factors: Vec<ChebPoly1> = alpha
                .0
                .iter()
                .map(|&a| {
                    let mut mono = vec![0.0; a as usize + 1];
                    mono[a as usize] = 1.0;
                    ChebPoly1::from_monomial(&mono)
                })
                .collect();
            out = &out + &Self::tensor(&factors).scale(c);
        }
        Ok(out)
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        debug_assert_eq!(alpha.len(), self.n);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(alpha) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, v)| (k, *v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree `max |α|`; zero for the zero polynomial.
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::total).max().unwrap_or(0)
    }

    /// Degree in each variable separately.
    pub fn axis_degrees(&self) -> Vec<u32> {
        let mut out = vec![0; self.n];
        for alpha in self.terms.keys() {
            for (o, &a) in out.iter_mut().zip(&alpha.0) {
                *o = (*o).max(a);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(PklError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let degs = self.axis_degrees();
        // tables[i][k] = T_k(x_i)
        let tables: Vec<Vec<f64>> = x
            .iter()
            .zip(&degs)
            .map(|(&xi, &d)| cheb_values(xi, d as usize))
            .collect();
        Ok(self
            .terms
            .iter()
            .map(|(alpha, c)| {
                c * alpha
                    .0
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| tables[i][a as usize])
                    .product::<f64>()
            })
            .sum())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "ChebPolyN::mul dimension mismatch");
        let mut out = Self::zero(self.n);
        let mut idx = vec![0u32; self.n];
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                expand_product(&a.0, &b.0, 0, ca * cb, &mut idx, &mut out);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.n);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * s);
        }
        out
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.add_term(MultiIndex::zero(self.n), c);
        out
    }

    /// `Σ_α |c_α|`.
    pub fn norm_1cheb(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// Univariate view when `n == 1`.
    pub fn to_univariate(&self) -> Result<ChebPoly1> {
        if self.n != 1 {
            return Err(PklError::DimensionMismatch {
                expected: 1,
                got: self.n,
            });
        }
        let deg = self.total_degree() as usize;
        let mut c = vec![0.0; deg + 1];
        for (alpha, v) in &self.terms {
            c[alpha.0[0] as usize] += v;
        }
        ChebPoly1::try_new(c)
    }

    /// Certified bound `Σ_i ‖∂f/∂x_i‖_∞ ≤ Σ_i Σ_α |c_α| α_i²` from the
    /// Markov inequality `|T_k'| ≤ k²` on `[-1,1]`.
    pub fn gradient_l1_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|(alpha, c)| c.abs() * alpha.0.iter().map(|&a| (a as f64).powi(2)).sum::<f64>())
            .sum()
    }
}

fn expand_product(
    a: &[u32],
    b: &[u32],
    axis: usize,
    coef: f64,
    idx: &mut Vec<u32>,
    out: &mut ChebPolyN,
) {
    if axis == a.len() {
        out.add_term(MultiIndex(idx.clone()), coef);
        return;
    }
    for (k, w) in product_rule(a[axis], b[axis]) {
        if w == 0.0 {
            continue;
        }
        idx[axis] = k;
        expand_product(a, b, axis + 1, coef * w, idx, out);
    }
}

/// Dense coefficient array over the box `Π_i [0, dims_i)` of multi-indices,
/// stored row-major. Used to accumulate large tensor-structured sums.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseChebN {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseChebN {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn from_parts(dims: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Adds `w · ⊗_i factors[i]`; each factor may be shorter than its axis.
    pub fn add_outer(&mut self, w: f64, factors: &[&[f64]]) {
        assert_eq!(factors.len(), self.dims.len());
        fn rec(dims: &[usize], factors: &[&[f64]], axis: usize, base: usize, acc: f64, data: &mut [f64]) {
            if axis == dims.len() {
                data[base] += acc;
                return;
            }
            let stride: usize = dims[axis + 1..].iter().product();
            for (k, &c) in factors[axis].iter().enumerate().take(dims[axis]) {
                if c != 0.0 {
                    rec(dims, factors, axis + 1, base + k * stride, acc * c, data);
                }
            }
        }
        rec(&self.dims, factors, 0, 0, w, &mut self.data);
    }

    /// Mode product along `axis`: entry `j` on that axis is replaced by
    /// `Σ_j old[.., j, ..] · rows[j][k]` for `k < new_len`.
    pub fn mode_product(&self, axis: usize, rows: &[Vec<f64>], new_len: usize) -> Self {
        assert_eq!(rows.len(), self.dims[axis]);
        let pre: usize = self.dims[..axis].iter().product();
        let post: usize = self.dims[axis + 1..].iter().product();
        let old_len = self.dims[axis];
        let mut dims = self.dims.clone();
        dims[axis] = new_len;
        let mut out = vec![0.0; pre * new_len * post];
        for p in 0..pre {
            for (j, row) in rows.iter().enumerate() {
                for q in 0..post {
                    let v = self.data[(p * old_len + j) * post + q];
                    if v == 0.0 {
                        continue;
                    }
                    for (k, &m) in row.iter().enumerate().take(new_len) {
                        out[(p * new_len + k) * post + q] += v * m;
                    }
                }
            }
        }
        Self { dims, data: out }
    }

    pub fn to_poly(&self) -> ChebPolyN {
        let n = self.dims.len();
        let mut out = ChebPolyN::zero(n);
        let mut idx = vec![0u32; n];
        for (flat, &c) in self.data.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut rem = flat;
            for axis in (0..n).rev() {
                idx[axis] = (rem % self.dims[axis]) as u32;
                rem /= self.dims[axis];
            }
            out.add_term(MultiIndex(idx.clone()), c);
        }
        out
    }
}

/// `[T_0(x), ..., T_deg(x)]` by the three-term recurrence.
pub fn cheb_values(x: f64, deg: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(deg + 1);
    t.push(1.0);
    if deg >= 1 {
        t.push(x);
    }
    for k in 2..=deg {
        let v = 2.0 * x * t[k - 1] - t[k - 2];
        t.push(v);
    }
    t
}

impl std::ops::Add for &ChebPolyN {
    type Output = ChebPolyN;
    fn add(self, rhs: &ChebPolyN) -> ChebPolyN {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(k.clone(), *v);
        }
        out
    }
}

impl std::ops::Sub for &ChebPolyN {
    type Output = ChebPolyN;
    fn sub(self, rhs: &ChebPolyN) -> ChebPolyN {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(k.clone(), -*v);
        }
        out
    }
}

impl std::ops::Mul for &ChebPolyN {
    type Output = ChebPolyN;
    fn mul(self, rhs: &ChebPolyN) -> ChebPolyN {
        ChebPolyN::mul(self, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    #[test]
    fn eval_and_mul_examples() {
        let p = ChebPolyN::basis(mi(&[1, 1]));
        assert_eq!(p.eval(&[0.5, 0.5]).unwrap(), 0.25);
        let q = ChebPolyN::basis(mi(&[2, 0])).mul(&ChebPolyN::basis(mi(&[0, 3])));
        assert_eq!(q, ChebPolyN::basis(mi(&[2, 3])));
        let s = ChebPolyN::basis(mi(&[1, 0])).mul(&ChebPolyN::basis(mi(&[1, 0])));
        assert_eq!(s.coeff(&mi(&[2, 0])), 0.5);
        assert_eq!(s.coeff(&mi(&[0, 0])), 0.5);
        assert_eq!(s.num_terms(), 2);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = ChebPolyN::basis(mi(&[1, 1]));
        assert!(matches!(
            p.eval(&[0.1]),
            Err(PklError::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(ChebPolyN::from_terms(2, vec![(mi(&[1]), 1.0)]).is_err());
    }

    #[test]
    fn mul_is_evaluation_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=3usize {
            for _ in 0..10 {
                let rand_poly = |rng: &mut ChaCha8Rng| {
                    let terms: Vec<(MultiIndex, f64)> = (0..6)
                        .map(|_| {
                            (
                                MultiIndex((0..n).map(|_| rng.gen_range(0..5)).collect()),
                                rng.gen_range(-1.0..1.0),
                            )
                        })
                        .collect();
                    ChebPolyN::from_terms(n, terms).unwrap()
                };
                let p = rand_poly(&mut rng);
                let q = rand_poly(&mut rng);
                let pq = p.mul(&q);
                for _ in 0..20 {
                    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let want = p.eval(&x).unwrap() * q.eval(&x).unwrap();
                    let got = pq.eval(&x).unwrap();
                    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn monomial_terms_convert() {
        // x1 * x2^2 = T_1(x1) * (T_2(x2) + 1)/2
        let p = ChebPolyN::from_monomial_terms(2, vec![(mi(&[1, 2]), 1.0)]).unwrap();
        assert_eq!(p.coeff(&mi(&[1, 2])), 0.5);
        assert_eq!(p.coeff(&mi(&[1, 0])), 0.5);
        assert!((p.eval(&[0.3, -0.7]).unwrap() - 0.3 * 0.49).abs() < 1e-15);
    }

    #[test]
    fn cancellation_removes_terms() {
        let p = ChebPolyN::basis(mi(&[1, 0]));
        let z = &p - &p;
        assert!(z.is_zero());
        assert_eq!(z.total_degree(), 0);
    }

    #[test]
    fn univariate_round_trip() {
        let u = ChebPoly1::new(vec![1.0, 0.0, -2.0]);
        let p = ChebPolyN::from_univariate(&u, 1, 0);
        assert_eq!(p.to_univariate().unwrap(), u);
    }

    #[test]
    fn dense_outer_and_mode_product() {
        let mut d = DenseChebN::zeros(vec![3, 2]);
        d.add_outer(2.0, &[&[1.0, 0.0, 3.0], &[0.5, 1.0]]);
        let p = d.to_poly();
        let want = ChebPolyN::tensor(&[ChebPoly1::new(vec![1.0, 0.0, 3.0]), ChebPoly1::new(vec![0.5, 1.0])]).scale(2.0);
        assert_eq!(p, want);
        // mode product with the identity on axis 0 is a no-op
        let id = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(d.mode_product(0, &id, 3), d);
        let sum = d.mode_product(1, &[vec![1.0], vec![1.0]], 1);
        assert_eq!(sum.data(), &[3.0, 0.0, 9.0]);
    }
}
