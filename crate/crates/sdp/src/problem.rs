//! Conic programs in standard form:
//!
//! ```text
//! minimise    ⟨C, X⟩ + cᵀx
//! subject to  ⟨A_i, X⟩ + a_iᵀx = b_i,   X = diag(X_1..X_k) ⪰ 0,
//!             x_j ≥ 0 or free according to its kind.
//! ```
//!
//! Matrix coefficients are sparse triplets `(block, i, j, v)` with `i ≤ j`,
//! each contributing `v · X_ij` to the linear form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Nonneg,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    #[serde(default)]
    pub entries: Vec<MatEntry>,
    /// `(scalar index, coefficient)`.
    #[serde(default)]
    pub scalars: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn add_entry(&mut self, block: usize, i: usize, j: usize, value: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push(MatEntry { block, i, j, value });
    }

    pub fn add_scalar(&mut self, var: usize, value: f64) {
        self.scalars.push((var, value));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub form: LinearForm,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    /// Side lengths of the PSD blocks.
    pub blocks: Vec<usize>,
    pub scalars: Vec<ScalarKind>,
    pub objective: LinearForm,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a PSD block of side `dim` and returns its index.
    pub fn add_block(&mut self, dim: usize) -> usize {
        self.blocks.push(dim);
        self.blocks.len() - 1
    }

    /// Adds a scalar variable and returns its index.
    pub fn add_scalar(&mut self, kind: ScalarKind) -> usize {
        self.scalars.push(kind);
        self.scalars.len() - 1
    }

    pub fn add_constraint(&mut self, form: LinearForm, rhs: f64) -> usize {
        self.constraints.push(Constraint { form, rhs });
        self.constraints.len() - 1
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn check_form(&self, form: &LinearForm, what: &str) -> Result<()> {
        for e in &form.entries {
            let dim = *self.blocks.get(e.block).ok_or_else(|| {
                SdpError::InvalidProblem(format!("{what}: block {} does not exist", e.block))
            })?;
            if e.i > e.j || e.j >= dim {
                return Err(SdpError::InvalidProblem(format!(
                    "{what}: entry ({}, {}) invalid for block {} of side {dim}",
                    e.i, e.j, e.block
                )));
            }
            if !e.value.is_finite() {
                return Err(SdpError::InvalidProblem(format!("{what}: non-finite coefficient")));
            }
        }
        for &(v, c) in &form.scalars {
            if v >= self.scalars.len() {
                return Err(SdpError::InvalidProblem(format!("{what}: scalar {v} does not exist")));
            }
            if !c.is_finite() {
                return Err(SdpError::InvalidProblem(format!("{what}: non-finite coefficient")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.contains(&0) {
            return Err(SdpError::InvalidProblem("PSD blocks must have positive side".into()));
        }
        self.check_form(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            self.check_form(&c.form, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::InvalidProblem(format!("constraint {i}: non-finite rhs")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem json")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: SdpProblem = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    /// Writes the self-describing JSON interchange file.
    pub fn export(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| SdpError::Io(e.to_string()))
    }

    pub fn import(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| SdpError::Io(e.to_string()))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_normalised_and_validated() {
        let mut p = SdpProblem::new();
        let b = p.add_block(2);
        let mut f = LinearForm::default();
        f.add_entry(b, 1, 0, 2.0);
        assert_eq!(f.entries[0].i, 0);
        p.add_constraint(f, 1.0);
        assert!(p.validate().is_ok());
        let mut bad = LinearForm::default();
        bad.add_entry(b, 0, 2, 1.0);
        p.add_constraint(bad, 0.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut p = SdpProblem::new();
        let b = p.add_block(3);
        let t = p.add_scalar(ScalarKind::Free);
        let mut f = LinearForm::default();
        f.add_entry(b, 0, 2, 0.5);
        f.add_scalar(t, -1.0);
        p.add_constraint(f, 0.25);
        p.objective.add_scalar(t, 1.0);
        let back = SdpProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }
}
