//! Table and figure series for the kernel program and the SOS distance probe.

use std::io::Write;

use pkl_sdp::vrd::MAX_VRD_R;
use pkl_sdp::{compute_vrd, loglog_slope, min_sos_cheb_distance, SdpError, SolverBackend};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const MAX_TABLE_D: u32 = 11;

/// Six significant digits, shortest form.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float");
    rounded.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrdCell {
    pub r: u32,
    pub d: u32,
    /// Optimal value, or the last objective when the solver did not converge.
    pub v: f64,
    pub status: String,
}

/// Cells `1 ≤ d ≤ min(r, d_max)`, `1 ≤ r ≤ r_max`, in row-major order.
pub fn vrd_cells(r_max: u32, d_max: u32) -> Result<Vec<(u32, u32)>> {
    if r_max == 0 || r_max > MAX_VRD_R || d_max == 0 || d_max > MAX_TABLE_D {
        return Err(BenchError::Precondition(format!(
            "table needs 1 <= rmax <= {MAX_VRD_R} and 1 <= dmax <= {MAX_TABLE_D}, got {r_max}, {d_max}"
        )));
    }
    Ok((1..=r_max).flat_map(|r| (1..=r.min(d_max)).map(move |d| (r, d))).collect())
}

pub fn solve_cell(r: u32, d: u32, backend: &dyn SolverBackend) -> VrdCell {
    match compute_vrd(r, d, backend) {
        Ok(res) => VrdCell { r, d, v: res.v, status: res.report.status.to_string() },
        Err(SdpError::Unsolved { status, objective, .. }) => VrdCell { r, d, v: objective, status: status.to_string() },
        Err(e) => {
            log::warn!("cell ({r}, {d}): {e}");
            VrdCell { r, d, v: f64::NAN, status: "error".into() }
        }
    }
}

/// Solves the listed cells in parallel; output order follows `cells`.
pub fn solve_cells(cells: &[(u32, u32)], backend: &dyn SolverBackend) -> Vec<VrdCell> {
    cells.par_iter().map(|&(r, d)| solve_cell(r, d, backend)).collect()
}

pub fn table_vrd(r_max: u32, d_max: u32, backend: &dyn SolverBackend) -> Result<Vec<VrdCell>> {
    Ok(solve_cells(&vrd_cells(r_max, d_max)?, backend))
}

pub fn write_vrd_csv<W: Write>(cells: &[VrdCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "d", "v", "status"])?;
    for c in cells {
        w.write_record([c.r.to_string(), c.d.to_string(), fmt6(c.v), c.status.clone()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub r: u32,
    pub d: u32,
    pub v: f64,
    pub inv_v: f64,
    pub v_r_over_d: f64,
    pub v_r_over_d_sq: f64,
}

/// `1/v`, `v r/d` and `v (r/d)²` for each cell.
pub fn figures_data(cells: &[VrdCell]) -> Vec<FigureRow> {
    cells
        .iter()
        .map(|c| {
            let q = c.r as f64 / c.d as f64;
            FigureRow { r: c.r, d: c.d, v: c.v, inv_v: 1.0 / c.v, v_r_over_d: c.v * q, v_r_over_d_sq: c.v * q * q }
        })
        .collect()
}

pub fn write_figures_csv<W: Write>(rows: &[FigureRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "d", "v", "inv_v", "v_r_over_d", "v_r_over_d_sq"])?;
    for f in rows {
        w.write_record([
            f.r.to_string(),
            f.d.to_string(),
            fmt6(f.v),
            fmt6(f.inv_v),
            fmt6(f.v_r_over_d),
            fmt6(f.v_r_over_d_sq),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosDistRow {
    pub r: u32,
    pub delta_min: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosDistTable {
    pub rows: Vec<SosDistRow>,
    /// Log–log slope of `δ_min` against `r` over the usable rows.
    pub slope: Option<f64>,
}

pub fn sosdist_table(r_min: u32, r_max: u32, step: u32, backend: &dyn SolverBackend) -> Result<SosDistTable> {
    if r_min < 2 || r_max < r_min || step == 0 {
        return Err(BenchError::Precondition(format!(
            "sosdist needs 2 <= rmin <= rmax and step >= 1, got {r_min}, {r_max}, {step}"
        )));
    }
    let rs: Vec<u32> = (r_min..=r_max).step_by(step as usize).collect();
    let rows: Vec<SosDistRow> = rs
        .par_iter()
        .map(|&r| match min_sos_cheb_distance(r, backend) {
            Ok(res) => SosDistRow { r, delta_min: res.delta_min, status: res.report.status.to_string() },
            Err(SdpError::Unsolved { status, .. }) => SosDistRow { r, delta_min: f64::NAN, status: status.to_string() },
            Err(e) => {
                log::warn!("sosdist r = {r}: {e}");
                SosDistRow { r, delta_min: f64::NAN, status: "error".into() }
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|row| row.delta_min.is_finite() && row.delta_min > 0.0)
        .map(|row| (row.r as f64, row.delta_min))
        .collect();
    let slope = loglog_slope(&pts).ok();
    Ok(SosDistTable { rows, slope })
}

pub fn write_sosdist_csv<W: Write>(t: &SosDistTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "delta_min", "status"])?;
    for row in &t.rows {
        w.write_record([row.r.to_string(), fmt6(row.delta_min), row.status.clone()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_digits() {
        assert_eq!(fmt6(0.99540012), "0.9954");
        assert_eq!(fmt6(44.596812), "44.5968");
        assert_eq!(fmt6(1.0), "1");
        assert_eq!(fmt6(1.23456789e-7), "0.000000123457");
    }

    #[test]
    fn cell_layout() {
        let cells = vrd_cells(8, 4).unwrap();
        assert_eq!(cells.len(), 26);
        assert_eq!(cells[0], (1, 1));
        assert!(cells.iter().all(|&(r, d)| d <= r && d <= 4));
        assert!(vrd_cells(13, 2).is_err());
        assert!(vrd_cells(4, 0).is_err());
    }

    #[test]
    fn figure_series() {
        let cells = vec![VrdCell { r: 12, d: 1, v: 0.5, status: "optimal".into() }];
        let f = figures_data(&cells);
        assert_eq!(f[0].v_r_over_d_sq, 72.0);
        assert_eq!(f[0].v_r_over_d, 6.0);
        assert_eq!(f[0].inv_v, 2.0);
    }
}
