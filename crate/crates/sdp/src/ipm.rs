//! Infeasible primal-dual interior-point method with the HKM search
//! direction and Mehrotra predictor-corrector steps.
//!
//! Nonnegative scalars are treated as a diagonal cone. Free scalars enter
//! through the augmented system `[M A_f; A_fᵀ 0]`.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::backend::{SdpSolution, SolverReport, SolverStatus};
use crate::error::Result;
use crate::problem::{LinearForm, ScalarKind, SdpProblem};

pub const DEFAULT_TOL: f64 = 1e-8;

/// A stopped run whose relative infeasibilities and gap stay below these is
/// reported as inaccurate rather than failed.
pub const INACCURATE_FEAS: f64 = 1e-5;
pub const INACCURATE_GAP: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: 120, step_fraction: 0.98 }
    }
}

/// A symmetric sparse matrix stored by its upper triangle.
type SymEntries = Vec<(usize, usize, f64)>;

struct Data {
    dims: Vec<usize>,
    /// `a[row][block]`: upper-triangle entries of the symmetric `A_row`.
    a: Vec<Vec<SymEntries>>,
    a_lp: Vec<Vec<(usize, f64)>>,
    a_free: Vec<Vec<(usize, f64)>>,
    c: Vec<DMatrix<f64>>,
    c_lp: DVector<f64>,
    c_free: DVector<f64>,
    b: DVector<f64>,
    lp_of: Vec<usize>,
    free_of: Vec<usize>,
    /// Original row index of every kept row.
    rows: Vec<usize>,
}

struct Sym {
    blocks: Vec<SymEntries>,
    lp: Vec<(usize, f64)>,
    free: Vec<(usize, f64)>,
}

fn collect_form(p: &SdpProblem, form: &LinearForm, pos: &[(bool, usize)]) -> Sym {
    let mut mats: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); p.blocks.len()];
    for e in &form.entries {
        // v·X_ij with i < j is the symmetric matrix with v/2 in both slots.
        let v = if e.i == e.j { e.value } else { 0.5 * e.value };
        *mats[e.block].entry((e.i, e.j)).or_insert(0.0) += v;
    }
    let mut lp = BTreeMap::new();
    let mut free = BTreeMap::new();
    for &(s, v) in &form.scalars {
        let (is_lp, k) = pos[s];
        *if is_lp { lp.entry(k) } else { free.entry(k) }.or_insert(0.0) += v;
    }
    let nz = |m: BTreeMap<usize, f64>| m.into_iter().filter(|&(_, v)| v != 0.0).collect();
    Sym {
        blocks: mats
            .into_iter()
            .map(|m| m.into_iter().filter(|&(_, v)| v != 0.0).map(|((i, j), v)| (i, j, v)).collect())
            .collect(),
        lp: nz(lp),
        free: nz(free),
    }
}

enum Prepared {
    Data(Box<Data>),
    /// A row with no variables but a nonzero right-hand side.
    TriviallyInfeasible(usize),
}

fn prepare(p: &SdpProblem) -> Prepared {
    let mut pos = Vec::with_capacity(p.scalars.len());
    let (mut lp_of, mut free_of) = (Vec::new(), Vec::new());
    for (s, k) in p.scalars.iter().enumerate() {
        match k {
            ScalarKind::Nonneg => {
                pos.push((true, lp_of.len()));
                lp_of.push(s);
            }
            ScalarKind::Free => {
                pos.push((false, free_of.len()));
                free_of.push(s);
            }
        }
    }
    let obj = collect_form(p, &p.objective, &pos);
    let c = p
        .blocks
        .iter()
        .zip(&obj.blocks)
        .map(|(&n, es)| {
            let mut m = DMatrix::zeros(n, n);
            for &(i, j, v) in es {
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            m
        })
        .collect();
    let mut c_lp = DVector::zeros(lp_of.len());
    for &(k, v) in &obj.lp {
        c_lp[k] = v;
    }
    let mut c_free = DVector::zeros(free_of.len());
    for &(k, v) in &obj.free {
        c_free[k] = v;
    }
    let (mut a, mut a_lp, mut a_free, mut b, mut rows) = (vec![], vec![], vec![], vec![], vec![]);
    for (r, con) in p.constraints.iter().enumerate() {
        let s = collect_form(p, &con.form, &pos);
        if s.blocks.iter().all(|e| e.is_empty()) && s.lp.is_empty() && s.free.is_empty() {
            if con.rhs != 0.0 {
                return Prepared::TriviallyInfeasible(r);
            }
            continue;
        }
        a.push(s.blocks);
        a_lp.push(s.lp);
        a_free.push(s.free);
        b.push(con.rhs);
        rows.push(r);
    }
    Prepared::Data(Box::new(Data {
        dims: p.blocks.clone(),
        a,
        a_lp,
        a_free,
        c,
        c_lp,
        c_free,
        b: DVector::from_vec(b),
        lp_of,
        free_of,
        rows,
    }))
}

#[derive(Clone)]
struct Point {
    x: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    xf: DVector<f64>,
    y: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    zl: DVector<f64>,
}

/// `⟨A, W⟩` for a symmetric sparse `A` and any square `W`.
fn inner(es: &SymEntries, w: &DMatrix<f64>) -> f64 {
    es.iter()
        .map(|&(i, j, v)| if i == j { v * w[(i, i)] } else { v * (w[(i, j)] + w[(j, i)]) })
        .sum()
}

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse())
}

impl Data {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn cone_dim(&self) -> usize {
        self.dims.iter().sum::<usize>() + self.lp_of.len()
    }

    /// `A(X) + A_l x_l + A_f x_f`.
    fn apply(&self, x: &[DMatrix<f64>], xl: &DVector<f64>, xf: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            (0..self.m()).map(|r| {
                let mut s: f64 = self.a[r].iter().zip(x).map(|(es, w)| inner(es, w)).sum();
                s += self.a_lp[r].iter().map(|&(k, v)| v * xl[k]).sum::<f64>();
                s += self.a_free[r].iter().map(|&(k, v)| v * xf[k]).sum::<f64>();
                s
            }),
        )
    }

    /// The SDP part only, for non-symmetric block arguments.
    fn apply_blocks(&self, w: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            (0..self.m()).map(|r| self.a[r].iter().zip(w).map(|(es, w)| inner(es, w)).sum()),
        )
    }

    /// `(A*(y), A_lᵀy, A_fᵀy)`.
    fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>, DVector<f64>) {
        let mut blocks: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut lp = DVector::zeros(self.lp_of.len());
        let mut free = DVector::zeros(self.free_of.len());
        for r in 0..self.m() {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            for (b, es) in self.a[r].iter().enumerate() {
                for &(i, j, v) in es {
                    blocks[b][(i, j)] += yr * v;
                    if i != j {
                        blocks[b][(j, i)] += yr * v;
                    }
                }
            }
            for &(k, v) in &self.a_lp[r] {
                lp[k] += yr * v;
            }
            for &(k, v) in &self.a_free[r] {
                free[k] += yr * v;
            }
        }
        (blocks, lp, free)
    }

    fn rows_norm(&self, r: usize) -> f64 {
        let mut s = 0.0;
        for es in &self.a[r] {
            for &(i, j, v) in es {
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s += self.a_lp[r].iter().map(|&(_, v)| v * v).sum::<f64>();
        s.sqrt()
    }

    /// Schur complement `M_ij = tr(A_i X A_j Z⁻¹) + Σ a_il a_jl x_l / z_l`.
    fn schur(&self, x: &[DMatrix<f64>], zinv: &[DMatrix<f64>], xl: &DVector<f64>, zl: &DVector<f64>) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for (b, &n) in self.dims.iter().enumerate() {
            let active: Vec<usize> = (0..m).filter(|&r| !self.a[r][b].is_empty()).collect();
            let cols: Vec<Vec<(usize, f64)>> = active
                .par_iter()
                .map(|&j| {
                    let es = &self.a[j][b];
                    // Columns touched by A_j.
                    let mut touched: BTreeMap<usize, usize> = BTreeMap::new();
                    for &(p, q, _) in es {
                        let len = touched.len();
                        touched.entry(p).or_insert(len);
                        let len = touched.len();
                        touched.entry(q).or_insert(len);
                    }
                    let k = touched.len();
                    // XA_j restricted to touched columns, and the matching rows of Z⁻¹.
                    let mut xa = DMatrix::<f64>::zeros(n, k);
                    for &(p, q, v) in es {
                        let cq = touched[&q];
                        let cp = touched[&p];
                        for s in 0..n {
                            xa[(s, cq)] += x[b][(s, p)] * v;
                        }
                        if p != q {
                            for s in 0..n {
                                xa[(s, cp)] += x[b][(s, q)] * v;
                            }
                        }
                    }
                    let mut zr = DMatrix::<f64>::zeros(k, n);
                    for (&col, &c) in &touched {
                        zr.set_row(c, &zinv[b].row(col));
                    }
                    let g = xa * zr;
                    active
                        .iter()
                        .map(|&i| (i, inner(&self.a[i][b], &g)))
                        .collect()
                })
                .collect();
            for (jj, &j) in active.iter().enumerate() {
                for &(i, v) in &cols[jj] {
                    out[(i, j)] += v;
                }
            }
        }
        if !self.lp_of.is_empty() {
            let d: Vec<f64> = xl.iter().zip(zl.iter()).map(|(x, z)| x / z).collect();
            let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.lp_of.len()];
            for r in 0..m {
                for &(k, v) in &self.a_lp[r] {
                    cols[k].push((r, v));
                }
            }
            for (k, col) in cols.iter().enumerate() {
                for &(i, vi) in col {
                    for &(j, vj) in col {
                        out[(i, j)] += vi * vj * d[k];
                    }
                }
            }
        }
        sym(&out)
    }
}

/// Largest `α` with `X + αΔX ⪰ 0`, or infinity.
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = ch.l();
    let Some(w) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&w.transpose()) else {
        return 0.0;
    };
    let ev = sym(&w).symmetric_eigenvalues();
    let lmin = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rdl: DVector<f64>,
    rf: DVector<f64>,
    pobj: f64,
    dobj: f64,
    rel_p: f64,
    rel_d: f64,
    gap: f64,
    mu: f64,
}

struct Scales {
    b: f64,
    c: f64,
}

fn residuals(d: &Data, pt: &Point, sc: &Scales) -> Residuals {
    let rp = &d.b - d.apply(&pt.x, &pt.xl, &pt.xf);
    let (aty, atyl, atyf) = d.adjoint(&pt.y);
    let rd: Vec<DMatrix<f64>> = (0..d.dims.len()).map(|b| &d.c[b] - &aty[b] - &pt.z[b]).collect();
    let rdl = &d.c_lp - atyl - &pt.zl;
    let rf = &d.c_free - atyf;
    let pobj = (0..d.dims.len()).map(|b| frob(&d.c[b], &pt.x[b])).sum::<f64>()
        + d.c_lp.dot(&pt.xl)
        + d.c_free.dot(&pt.xf);
    let dobj = d.b.dot(&pt.y);
    let xz: f64 = (0..d.dims.len()).map(|b| frob(&pt.x[b], &pt.z[b])).sum::<f64>() + pt.xl.dot(&pt.zl);
    let dn = (rd.iter().map(|m| m.norm_squared()).sum::<f64>() + rdl.norm_squared() + rf.norm_squared()).sqrt();
    Residuals {
        rel_p: rp.norm() / (1.0 + sc.b),
        rel_d: dn / (1.0 + sc.c),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        mu: xz / d.cone_dim().max(1) as f64,
        rp,
        rd,
        rdl,
        rf,
        pobj,
        dobj,
    }
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dxf: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dzl: DVector<f64>,
}

struct Ctx<'a> {
    d: &'a Data,
    pt: &'a Point,
    res: &'a Residuals,
    zinv: &'a [DMatrix<f64>],
    kkt: &'a DMatrix<f64>,
    lu: &'a nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// LU solve followed by a few steps of iterative refinement.
fn refined_solve(ctx: &Ctx, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let mut sol = ctx.lu.solve(rhs)?;
    let scale = rhs.amax().max(f64::MIN_POSITIVE);
    for _ in 0..3 {
        let r = rhs - ctx.kkt * &sol;
        if r.amax() <= 1e-15 * scale {
            break;
        }
        sol += ctx.lu.solve(&r)?;
    }
    Some(sol)
}

/// Solves for the direction targeting `mu_t`, with an optional
/// second-order correction from a previous affine direction.
fn direction(ctx: &Ctx, mu_t: f64, corr: Option<&Direction>) -> Option<Direction> {
    let (d, pt, res, zinv) = (ctx.d, ctx.pt, ctx.res, ctx.zinv);
    let nb = d.dims.len();
    let r_blocks: Vec<DMatrix<f64>> = (0..nb)
        .map(|b| {
            let mut r = &zinv[b] * mu_t - &pt.x[b] - &pt.x[b] * &res.rd[b] * &zinv[b];
            if let Some(c) = corr {
                r -= &c.dx[b] * &c.dz[b] * &zinv[b];
            }
            r
        })
        .collect();
    let mut r_lp = DVector::from_iterator(
        d.lp_of.len(),
        (0..d.lp_of.len()).map(|k| mu_t / pt.zl[k] - pt.xl[k] - pt.xl[k] * res.rdl[k] / pt.zl[k]),
    );
    if let Some(c) = corr {
        for k in 0..d.lp_of.len() {
            r_lp[k] -= c.dxl[k] * c.dzl[k] / pt.zl[k];
        }
    }
    let mut ar = d.apply_blocks(&r_blocks);
    for r in 0..d.m() {
        ar[r] += d.a_lp[r].iter().map(|&(k, v)| v * r_lp[k]).sum::<f64>();
    }
    let rhs1 = &res.rp - ar;
    let m = d.m();
    let nf = d.free_of.len();
    let mut rhs = DVector::zeros(m + nf);
    rhs.rows_mut(0, m).copy_from(&rhs1);
    rhs.rows_mut(m, nf).copy_from(&res.rf);
    let sol = refined_solve(ctx, &rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let dy = sol.rows(0, m).into_owned();
    let dxf = sol.rows(m, nf).into_owned();
    let (atdy, atdyl, _) = d.adjoint(&dy);
    let dz: Vec<DMatrix<f64>> = (0..nb).map(|b| &res.rd[b] - &atdy[b]).collect();
    let dzl = &res.rdl - atdyl;
    let dx: Vec<DMatrix<f64>> = (0..nb)
        .map(|b| sym(&(&r_blocks[b] + &pt.x[b] * &atdy[b] * &zinv[b])))
        .collect();
    let dxl = DVector::from_iterator(
        d.lp_of.len(),
        (0..d.lp_of.len()).map(|k| r_lp[k] + pt.xl[k] * (res.rdl[k] - dzl[k]) / pt.zl[k]),
    );
    Some(Direction { dx, dxl, dxf, dy, dz, dzl })
}

fn step_lengths(pt: &Point, dir: &Direction) -> (f64, f64) {
    let mut ap = max_step_lp(&pt.xl, &dir.dxl);
    let mut ad = max_step_lp(&pt.zl, &dir.dzl);
    for b in 0..pt.x.len() {
        ap = ap.min(max_step_psd(&pt.x[b], &dir.dx[b]));
        ad = ad.min(max_step_psd(&pt.z[b], &dir.dz[b]));
    }
    (ap, ad)
}

fn initial_point(d: &Data) -> Point {
    let n = d.cone_dim().max(1) as f64;
    let sq = n.sqrt();
    let mut xi: f64 = 10f64.max(sq);
    let mut eta: f64 = 10f64.max(sq);
    for r in 0..d.m() {
        let an = d.rows_norm(r);
        xi = xi.max(sq * (1.0 + d.b[r].abs()) / (1.0 + an));
        eta = eta.max(an);
    }
    for c in &d.c {
        eta = eta.max(c.norm());
    }
    eta = eta.max(d.c_lp.amax());
    Point {
        x: d.dims.iter().map(|&k| DMatrix::identity(k, k) * xi).collect(),
        xl: DVector::from_element(d.lp_of.len(), xi),
        xf: DVector::zeros(d.free_of.len()),
        y: DVector::zeros(d.m()),
        z: d.dims.iter().map(|&k| DMatrix::identity(k, k) * eta).collect(),
        zl: DVector::from_element(d.lp_of.len(), eta),
    }
}

fn unpack(p: &SdpProblem, d: &Data, pt: &Point) -> (Vec<DMatrix<f64>>, Vec<f64>, Vec<f64>) {
    let mut scalars = vec![0.0; p.scalars.len()];
    for (k, &s) in d.lp_of.iter().enumerate() {
        scalars[s] = pt.xl[k];
    }
    for (k, &s) in d.free_of.iter().enumerate() {
        scalars[s] = pt.xf[k];
    }
    let mut y = vec![0.0; p.constraints.len()];
    for (k, &r) in d.rows.iter().enumerate() {
        y[r] = pt.y[k];
    }
    (pt.x.iter().map(sym).collect(), scalars, y)
}

pub fn solve(p: &SdpProblem, opts: &IpmOptions) -> Result<SdpSolution> {
    p.validate()?;
    let start = Instant::now();
    let d = match prepare(p) {
        Prepared::Data(d) => d,
        Prepared::TriviallyInfeasible(r) => {
            return Ok(SdpSolution {
                report: SolverReport {
                    status: SolverStatus::Infeasible,
                    objective: f64::NAN,
                    dual_objective: f64::NAN,
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                    gap: f64::NAN,
                    iterations: 0,
                    wall_time_s: start.elapsed().as_secs_f64(),
                    message: format!("constraint {r} has no variables and a nonzero right-hand side"),
                },
                blocks: p.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
                scalars: vec![0.0; p.scalars.len()],
                y: vec![0.0; p.constraints.len()],
            });
        }
    };
    let sc = Scales {
        b: d.b.norm(),
        c: (d.c.iter().map(|m| m.norm_squared()).sum::<f64>()
            + d.c_lp.norm_squared()
            + d.c_free.norm_squared())
        .sqrt(),
    };
    let tol = opts.tol;
    let mut pt = initial_point(&d);
    let mut status = SolverStatus::Failed;
    let mut message = String::from("iteration limit reached");
    let mut iters = 0;
    let mut stalls = 0;
    let mut res = residuals(&d, &pt, &sc);
    for it in 0..opts.max_iter {
        iters = it;
        debug!(
            "ipm it {it}: pobj {:.10e} dobj {:.10e} relp {:.2e} reld {:.2e} gap {:.2e} mu {:.2e}",
            res.pobj, res.dobj, res.rel_p, res.rel_d, res.gap, res.mu
        );
        if res.rel_p <= tol && res.rel_d <= tol && res.gap <= tol {
            status = SolverStatus::Optimal;
            message = "converged".into();
            break;
        }
        // Farkas ray for the primal: bᵀy > 0 with -A*(y) ⪰ 0 up to a vanishing remainder.
        if res.dobj > 0.0 {
            let dn = (res.rd.iter().map(|m| m.norm_squared()).sum::<f64>()
                + res.rdl.norm_squared()
                + res.rf.norm_squared())
            .sqrt();
            if (sc.c + dn) / res.dobj < tol && res.rel_p > tol {
                status = SolverStatus::Infeasible;
                message = "primal infeasibility certificate found".into();
                break;
            }
        }
        // Recession direction of the primal with negative cost.
        if res.pobj < 0.0 && (&d.b - &res.rp).norm() / res.pobj.abs() < tol {
            status = SolverStatus::Failed;
            message = "dual infeasible (primal unbounded)".into();
            break;
        }
        // Complementarity is gone but the residuals are not: no further progress.
        if res.mu <= 1e-3 * tol * tol * (1.0 + res.pobj.abs()) {
            message = "stalled".into();
            break;
        }
        let Some(zinv) = pt.z.iter().map(spd_inverse).collect::<Option<Vec<_>>>() else {
            message = "dual iterate lost definiteness".into();
            break;
        };
        let mut m = d.schur(&pt.x, &zinv, &pt.xl, &pt.zl);
        let md = m.diagonal().amax().max(1.0);
        for i in 0..d.m() {
            m[(i, i)] += 1e-14 * md;
        }
        let nf = d.free_of.len();
        let nm = d.m();
        let mut k = DMatrix::zeros(nm + nf, nm + nf);
        k.view_mut((0, 0), (nm, nm)).copy_from(&m);
        for r in 0..nm {
            for &(j, v) in &d.a_free[r] {
                k[(r, nm + j)] = v;
                k[(nm + j, r)] = v;
            }
        }
        let lu = k.clone().lu();
        let ctx = Ctx { d: &d, pt: &pt, res: &res, zinv: &zinv, kkt: &k, lu: &lu };
        let Some(aff) = direction(&ctx, 0.0, None) else {
            message = "singular Schur system".into();
            break;
        };
        let (ap, ad) = step_lengths(&pt, &aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut xz_aff = 0.0;
        for b in 0..d.dims.len() {
            let xa = &pt.x[b] + &aff.dx[b] * ap;
            let za = &pt.z[b] + &aff.dz[b] * ad;
            xz_aff += frob(&xa, &za);
        }
        xz_aff += (&pt.xl + &aff.dxl * ap).dot(&(&pt.zl + &aff.dzl * ad));
        let mu_aff = xz_aff / d.cone_dim().max(1) as f64;
        let sigma = if res.mu > 0.0 { (mu_aff / res.mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };
        let Some(dir) = direction(&ctx, sigma * res.mu, Some(&aff)) else {
            message = "singular Schur system".into();
            break;
        };
        let (ap, ad) = step_lengths(&pt, &dir);
        let tau = opts.step_fraction;
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            stalls += 1;
            if stalls >= 3 {
                message = "step length collapsed".into();
                break;
            }
        } else {
            stalls = 0;
        }
        for b in 0..d.dims.len() {
            pt.x[b] += &dir.dx[b] * ap;
            pt.z[b] += &dir.dz[b] * ad;
            pt.x[b] = sym(&pt.x[b]);
            pt.z[b] = sym(&pt.z[b]);
        }
        pt.xl += &dir.dxl * ap;
        pt.xf += &dir.dxf * ap;
        pt.y += &dir.dy * ad;
        pt.zl += &dir.dzl * ad;
        iters = it + 1;
        res = residuals(&d, &pt, &sc);
    }
    if status == SolverStatus::Failed && !message.starts_with("dual infeasible") {
        let feas = res.rel_p.max(res.rel_d);
        if feas <= INACCURATE_FEAS.max(tol) && res.gap <= INACCURATE_GAP.max(tol) {
            status = SolverStatus::Inaccurate;
        }
        warn!("ipm stopped: {message} (relp {:.2e} reld {:.2e} gap {:.2e})", res.rel_p, res.rel_d, res.gap);
    }
    let (blocks, scalars, y) = unpack(p, &d, &pt);
    Ok(SdpSolution {
        report: SolverReport {
            status,
            objective: res.pobj,
            dual_objective: res.dobj,
            primal_residual: res.rel_p,
            dual_residual: res.rel_d,
            gap: res.gap,
            iterations: iters,
            wall_time_s: start.elapsed().as_secs_f64(),
            message,
        },
        blocks,
        scalars,
        y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_lp() -> SdpProblem {
        // min x0 + 2 x1  s.t. x0 + x1 = 1, x ≥ 0
        let mut p = SdpProblem::new();
        let a = p.add_scalar(ScalarKind::Nonneg);
        let b = p.add_scalar(ScalarKind::Nonneg);
        p.objective.add_scalar(a, 1.0);
        p.objective.add_scalar(b, 2.0);
        let mut f = LinearForm::default();
        f.add_scalar(a, 1.0);
        f.add_scalar(b, 1.0);
        p.add_constraint(f, 1.0);
        p
    }

    #[test]
    fn solves_tiny_lp() {
        let s = solve(&small_lp(), &IpmOptions::default()).unwrap();
        assert_eq!(s.report.status, SolverStatus::Optimal);
        assert!((s.report.objective - 1.0).abs() < 1e-7);
        assert!((s.scalars[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn min_eigenvalue_sdp() {
        // min ⟨C,X⟩ s.t. tr X = 1  gives λ_min(C)
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 1.0]);
        let mut p = SdpProblem::new();
        let b = p.add_block(3);
        for i in 0..3 {
            for j in i..3 {
                let v = if i == j { c[(i, j)] } else { 2.0 * c[(i, j)] };
                if v != 0.0 {
                    p.objective.add_entry(b, i, j, v);
                }
            }
        }
        let mut tr = LinearForm::default();
        for i in 0..3 {
            tr.add_entry(b, i, i, 1.0);
        }
        p.add_constraint(tr, 1.0);
        let s = solve(&p, &IpmOptions::default()).unwrap();
        let lmin = c.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(s.report.status, SolverStatus::Optimal);
        assert!((s.report.objective - lmin).abs() < 1e-7, "{} vs {lmin}", s.report.objective);
    }

    #[test]
    fn free_variable_maximisation() {
        // max t s.t. X - t I has trace... : X ⪰ 0 (2x2), X_00 + t = 3, X_11 + t = 5, X_01 = 0
        let mut p = SdpProblem::new();
        let b = p.add_block(2);
        let t = p.add_scalar(ScalarKind::Free);
        p.objective.add_scalar(t, -1.0);
        for (i, rhs) in [(0, 3.0), (1, 5.0)] {
            let mut f = LinearForm::default();
            f.add_entry(b, i, i, 1.0);
            f.add_scalar(t, 1.0);
            p.add_constraint(f, rhs);
        }
        let mut f = LinearForm::default();
        f.add_entry(b, 0, 1, 1.0);
        p.add_constraint(f, 0.0);
        let s = solve(&p, &IpmOptions::default()).unwrap();
        assert_eq!(s.report.status, SolverStatus::Optimal);
        assert!((s.scalars[t] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasible_psd() {
        // X ⪰ 0 with X_00 = -1
        let mut p = SdpProblem::new();
        let b = p.add_block(2);
        let mut f = LinearForm::default();
        f.add_entry(b, 0, 0, 1.0);
        p.add_constraint(f, -1.0);
        let s = solve(&p, &IpmOptions::default()).unwrap();
        assert_eq!(s.report.status, SolverStatus::Infeasible);
    }

    #[test]
    fn empty_row_with_rhs_is_infeasible() {
        let mut p = small_lp();
        p.add_constraint(LinearForm::default(), 1.0);
        let s = solve(&p, &IpmOptions::default()).unwrap();
        assert_eq!(s.report.status, SolverStatus::Infeasible);
    }
}
