//! Polynomial interchange format shared by every tool in the workspace:
//!
//! ```json
//! {"n": 2, "basis": "chebyshev", "terms": [{"alpha": [1, 0], "coef": 0.5}]}
//! ```

use serde::{Deserialize, Serialize};

use crate::cheb::ChebPoly1;
use crate::chebn::{ChebPolyN, MultiIndex};
use crate::error::{PklError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    #[default]
    Chebyshev,
    Monomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub alpha: Vec<u32>,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub n: usize,
    #[serde(default)]
    pub basis: Basis,
    pub terms: Vec<TermJson>,
}

impl PolyJson {
    /// Always emitted in the Chebyshev basis.
    pub fn from_poly(p: &ChebPolyN) -> Self {
        PolyJson {
            n: p.nvars(),
            basis: Basis::Chebyshev,
            terms: p
                .terms()
                .map(|(a, c)| TermJson {
                    alpha: a.0.clone(),
                    coef: c,
                })
                .collect(),
        }
    }

    pub fn from_univariate(p: &ChebPoly1) -> Self {
        Self::from_poly(&ChebPolyN::from_univariate(p, 1, 0))
    }

    pub fn to_poly(&self) -> Result<ChebPolyN> {
        if self.n == 0 {
            return Err(PklError::Json("n must be at least 1".into()));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| (MultiIndex(t.alpha.clone()), t.coef));
        match self.basis {
            Basis::Chebyshev => ChebPolyN::from_terms(self.n, terms),
            Basis::Monomial => ChebPolyN::from_monomial_terms(self.n, terms),
        }
    }

    pub fn to_univariate(&self) -> Result<ChebPoly1> {
        self.to_poly()?.to_univariate()
    }
}

impl From<ChebPolyN> for PolyJson {
    fn from(p: ChebPolyN) -> Self {
        PolyJson::from_poly(&p)
    }
}

impl TryFrom<PolyJson> for ChebPolyN {
    type Error = PklError;

    fn try_from(j: PolyJson) -> Result<Self> {
        j.to_poly()
    }
}

pub fn poly_from_json(s: &str) -> Result<ChebPolyN> {
    serde_json::from_str::<PolyJson>(s)?.to_poly()
}

pub fn poly_to_json(p: &ChebPolyN) -> String {
    serde_json::to_string(&PolyJson::from_poly(p)).expect("polynomial json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_bases() {
        let c = poly_from_json(r#"{"n":1,"basis":"chebyshev","terms":[{"alpha":[2],"coef":1.0}]}"#).unwrap();
        let m = poly_from_json(r#"{"n":1,"basis":"monomial","terms":[{"alpha":[2],"coef":2.0},{"alpha":[0],"coef":-1.0}]}"#)
            .unwrap();
        assert_eq!(c, m);
    }

    #[test]
    fn basis_defaults_to_chebyshev() {
        let p = poly_from_json(r#"{"n":2,"terms":[{"alpha":[1,1],"coef":3.0}]}"#).unwrap();
        assert_eq!(p.coeff(&MultiIndex(vec![1, 1])), 3.0);
    }

    #[test]
    fn rejects_bad_alpha_length() {
        let e = poly_from_json(r#"{"n":2,"terms":[{"alpha":[1],"coef":3.0}]}"#);
        assert!(matches!(e, Err(PklError::DimensionMismatch { .. })));
    }

    #[test]
    fn round_trips() {
        let p = ChebPolyN::from_terms(
            2,
            vec![(MultiIndex(vec![0, 0]), 2.0), (MultiIndex(vec![3, 1]), -0.125)],
        )
        .unwrap();
        assert_eq!(poly_from_json(&poly_to_json(&p)).unwrap(), p);
    }
}
