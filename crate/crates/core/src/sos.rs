//! Weighted sums of squares `Σ_j w_j p_j²` with `w_j > 0`, kept in factored
//! form. Nonnegativity is structural; expansion is the verifier's job.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheb::ChebPoly1;
use crate::chebn::{ChebPolyN, DenseChebN};
use crate::error::{PklError, Result};
use crate::json::PolyJson;

/// The polynomial being squared. `Tensor` holds `Π_i p_i(x_i)` without
/// expanding it.
#[derive(Debug, Clone, PartialEq)]
pub enum Root {
    Poly(ChebPolyN),
    Tensor(Vec<ChebPoly1>),
}

impl Root {
    pub fn nvars(&self) -> usize {
        match self {
            Root::Poly(p) => p.nvars(),
            Root::Tensor(f) => f.len(),
        }
    }

    pub fn total_degree(&self) -> u32 {
        match self {
            Root::Poly(p) => p.total_degree(),
            Root::Tensor(f) => f.iter().map(|p| p.degree() as u32).sum(),
        }
    }

    pub fn to_poly(&self) -> ChebPolyN {
        match self {
            Root::Poly(p) => p.clone(),
            Root::Tensor(f) => ChebPolyN::tensor(f),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Root::Poly(p) => p.eval(x),
            Root::Tensor(f) => {
                if x.len() != f.len() {
                    return Err(PklError::DimensionMismatch {
                        expected: f.len(),
                        got: x.len(),
                    });
                }
                Ok(f.iter().zip(x).map(|(p, &xi)| p.eval(xi)).product())
            }
        }
    }

    fn univariate(&self) -> Option<ChebPoly1> {
        match self {
            Root::Poly(p) if p.nvars() == 1 => p.to_univariate().ok(),
            Root::Tensor(f) if f.len() == 1 => Some(f[0].clone()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareTerm {
    pub weight: f64,
    pub root: Root,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SosJson", into = "SosJson")]
pub struct WeightedSquaresSOS {
    n: usize,
    /// Degree of the multiplier this block is paired with (0 for a plain
    /// SOS, 2 for a block multiplied by `1 - x_i²`).
    prefactor_degree: u32,
    terms: Vec<SquareTerm>,
}

impl WeightedSquaresSOS {
    pub fn new(n: usize, prefactor_degree: u32) -> Self {
        assert!(n >= 1);
        Self {
            n,
            prefactor_degree,
            terms: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn prefactor_degree(&self) -> u32 {
        self.prefactor_degree
    }

    pub fn terms(&self) -> &[SquareTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `weight · root²`. The weight must be finite and strictly positive.
    pub fn push(&mut self, weight: f64, root: Root) -> Result<()> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(PklError::Precondition(format!(
                "square weights must be finite and positive, got {weight}"
            )));
        }
        if root.nvars() != self.n {
            return Err(PklError::DimensionMismatch {
                expected: self.n,
                got: root.nvars(),
            });
        }
        self.terms.push(SquareTerm { weight, root });
        Ok(())
    }

    /// Appends every term of `other`, with weights multiplied by `scale`.
    pub fn extend_scaled(&mut self, other: &WeightedSquaresSOS, scale: f64) -> Result<()> {
        for t in &other.terms {
            self.push(t.weight * scale, t.root.clone())?;
        }
        Ok(())
    }

    /// Direct access for sensitivity tests and deserialization; the caller
    /// is responsible for keeping weights positive.
    pub fn terms_mut(&mut self) -> &mut Vec<SquareTerm> {
        &mut self.terms
    }

    /// `2 · max deg(root)`: the degree of the expansion.
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| 2 * t.root.total_degree())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.terms
            .iter()
            .map(|t| t.root.eval(x).map(|v| t.weight * v * v))
            .sum()
    }

    /// `Σ_j w_j p_j²` in the Chebyshev basis. Squares are formed in
    /// parallel and summed in term order.
    pub fn expand(&self) -> ChebPolyN {
        if self.n == 1 {
            let squares: Vec<ChebPoly1> = self
                .terms
                .par_iter()
                .map(|t| {
                    let r = t.root.univariate().expect("univariate root");
                    r.mul(&r).scale(t.weight)
                })
                .collect();
            let deg = squares.iter().map(ChebPoly1::degree).max().unwrap_or(0);
            let mut acc = vec![0.0; deg + 1];
            for s in &squares {
                for (a, c) in acc.iter_mut().zip(s.coeffs()) {
                    *a += c;
                }
            }
            return ChebPolyN::from_univariate(&ChebPoly1::new(acc), 1, 0);
        }
        let mut sparse = ChebPolyN::zero(self.n);
        let mut dims = vec![1usize; self.n];
        for t in &self.terms {
            if let Root::Tensor(f) = &t.root {
                for (d, p) in dims.iter_mut().zip(f) {
                    *d = (*d).max(2 * p.degree() + 1);
                }
            }
        }
        let mut dense = DenseChebN::zeros(dims);
        let squares: Vec<Option<Vec<ChebPoly1>>> = self
            .terms
            .par_iter()
            .map(|t| match &t.root {
                Root::Tensor(f) => Some(f.iter().map(|p| p.mul(p)).collect()),
                Root::Poly(_) => None,
            })
            .collect();
        for (t, sq) in self.terms.iter().zip(&squares) {
            match (&t.root, sq) {
                (_, Some(fs)) => {
                    let slices: Vec<&[f64]> = fs.iter().map(ChebPoly1::coeffs).collect();
                    dense.add_outer(t.weight, &slices);
                }
                (Root::Poly(p), None) => {
                    for (a, c) in p.mul(p).terms() {
                        sparse.add_term(a.clone(), c * t.weight);
                    }
                }
                (Root::Tensor(_), None) => unreachable!(),
            }
        }
        &sparse + &dense.to_poly()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RootJson {
    Tensor { factors: Vec<PolyJson> },
    Poly(PolyJson),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermJson {
    weight: f64,
    root: RootJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SosJson {
    n: usize,
    prefactor_degree: u32,
    terms: Vec<TermJson>,
}

impl From<WeightedSquaresSOS> for SosJson {
    fn from(s: WeightedSquaresSOS) -> Self {
        SosJson {
            n: s.n,
            prefactor_degree: s.prefactor_degree,
            terms: s
                .terms
                .iter()
                .map(|t| TermJson {
                    weight: t.weight,
                    root: match &t.root {
                        Root::Poly(p) => RootJson::Poly(PolyJson::from_poly(p)),
                        Root::Tensor(f) => RootJson::Tensor {
                            factors: f.iter().map(PolyJson::from_univariate).collect(),
                        },
                    },
                })
                .collect(),
        }
    }
}

impl TryFrom<SosJson> for WeightedSquaresSOS {
    type Error = PklError;

    fn try_from(j: SosJson) -> Result<Self> {
        if j.n == 0 {
            return Err(PklError::Json("n must be at least 1".into()));
        }
        let mut out = WeightedSquaresSOS::new(j.n, j.prefactor_degree);
        for t in j.terms {
            let root = match t.root {
                RootJson::Poly(p) => Root::Poly(p.to_poly()?),
                RootJson::Tensor { factors } => Root::Tensor(
                    factors
                        .iter()
                        .map(PolyJson::to_univariate)
                        .collect::<Result<_>>()?,
                ),
            };
            out.push(t.weight, root)?;
        }
        Ok(out)
    }
}
