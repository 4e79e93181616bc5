//! Convex quadratic programs over polyhedra.
//!
//! Minimizes `½ xᵀQx + cᵀx` over `{x : Cx ≤ d, Ex = g}`. Euclidean projection
//! is the case `Q = I, c = −z`.
//!
//! The engine is Hildreth's dual coordinate ascent: one exact coordinate
//! maximization of the dual per constraint row, sweeping all rows in order.
//! Whenever the support of the inequality multipliers is stable across a
//! sweep, the equality-constrained problem on that support is solved directly
//! and accepted if it satisfies the KKT conditions of the full problem. The
//! multipliers of the last solve are kept as a warm start, which makes
//! repeated projections onto the same set cheap.
//!
//! A merely semidefinite `Q` is handled by proximal-point iterations, each of
//! which is a strictly convex problem solved as above.

use std::cell::Cell;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, is_rectangular, norm, norm_inf};

pub const DEFAULT_TOL: f64 = 1e-8;

thread_local! {
    static SOLVE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of QP solves (projections included) started on the current thread.
pub fn solve_calls_on_current_thread() -> u64 {
    SOLVE_CALLS.with(|c| c.get())
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QpError {
    #[error("feasible set is empty (Farkas certificate residual {certificate_residual:.3e})")]
    Infeasible { certificate_residual: f64 },
    #[error("no convergence after {iterations} iterations (KKT residual {kkt_residual:.3e})")]
    NonConvergence {
        best: Vec<f64>,
        kkt_residual: f64,
        iterations: usize,
    },
    #[error("objective is unbounded below on the feasible set")]
    Unbounded { direction: Vec<f64> },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolyhedralSetFile {
    n: usize,
    #[serde(rename = "C", default)]
    c: Vec<Vec<f64>>,
    #[serde(default)]
    d: Vec<f64>,
    #[serde(rename = "E", default)]
    e: Vec<Vec<f64>>,
    #[serde(default)]
    g: Vec<f64>,
}

/// `{x ∈ ℝⁿ : Cx ≤ d, Ex = g}` with row-major `C` and `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyhedralSetFile", into = "PolyhedralSetFile")]
pub struct PolyhedralSet {
    n: usize,
    c: Vec<Vec<f64>>,
    d: Vec<f64>,
    e: Vec<Vec<f64>>,
    g: Vec<f64>,
}

impl TryFrom<PolyhedralSetFile> for PolyhedralSet {
    type Error = String;

    fn try_from(f: PolyhedralSetFile) -> std::result::Result<Self, String> {
        PolyhedralSet::new(f.n, f.c, f.d, f.e, f.g).map_err(|e| e.to_string())
    }
}

impl From<PolyhedralSet> for PolyhedralSetFile {
    fn from(s: PolyhedralSet) -> Self {
        PolyhedralSetFile {
            n: s.n,
            c: s.c,
            d: s.d,
            e: s.e,
            g: s.g,
        }
    }
}

impl PolyhedralSet {
    pub fn new(
        n: usize,
        c: Vec<Vec<f64>>,
        d: Vec<f64>,
        e: Vec<Vec<f64>>,
        g: Vec<f64>,
    ) -> Result<Self> {
        if c.len() != d.len() {
            return Err(Error::dim("inequality rows (C vs d)", c.len(), d.len()));
        }
        if e.len() != g.len() {
            return Err(Error::dim("equality rows (E vs g)", e.len(), g.len()));
        }
        if !is_rectangular(&c, n) || !is_rectangular(&e, n) {
            return Err(Error::InvalidParameter(format!(
                "polyhedron rows must have length {n}"
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !c.iter().chain(&e).all(|r| finite(r)) || !finite(&d) || !finite(&g) {
            return Err(Error::InvalidParameter("polyhedron data must be finite".into()));
        }
        Ok(PolyhedralSet { n, c, d, e, g })
    }

    /// Inequality-only set `{x : Cx ≤ d}`.
    pub fn inequalities(n: usize, c: Vec<Vec<f64>>, d: Vec<f64>) -> Result<Self> {
        Self::new(n, c, d, vec![], vec![])
    }

    /// The whole space.
    pub fn unconstrained(n: usize) -> Self {
        PolyhedralSet {
            n,
            c: vec![],
            d: vec![],
            e: vec![],
            g: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn inequality_rows(&self) -> usize {
        self.c.len()
    }

    pub fn equality_rows(&self) -> usize {
        self.e.len()
    }

    pub fn c(&self) -> &[Vec<f64>] {
        &self.c
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn e(&self) -> &[Vec<f64>] {
        &self.e
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// Scale used by the relative inequality tolerance, `1 + ‖d‖∞`.
    pub fn feasibility_scale(&self) -> f64 {
        1.0 + norm_inf(&self.d)
    }

    /// Largest inequality violation relative to `1 + ‖d‖∞` and largest
    /// absolute equality violation.
    pub fn violation(&self, x: &[f64]) -> (f64, f64) {
        let ineq = self
            .c
            .iter()
            .zip(&self.d)
            .map(|(r, d)| dot(r, x) - d)
            .fold(0.0_f64, f64::max)
            / self.feasibility_scale();
        let eq = self
            .e
            .iter()
            .zip(&self.g)
            .map(|(r, g)| (dot(r, x) - g).abs())
            .fold(0.0_f64, f64::max);
        (ineq, eq)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let (ineq, eq) = self.violation(x);
        x.len() == self.n && ineq <= tol && eq <= tol
    }

    fn rows(&self) -> impl Iterator<Item = (&Vec<f64>, f64, bool)> {
        self.c
            .iter()
            .zip(&self.d)
            .map(|(r, &d)| (r, d, true))
            .chain(self.e.iter().zip(&self.g).map(|(r, &g)| (r, g, false)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Inequality rows with a positive multiplier.
    pub active_set: Vec<usize>,
    /// Hildreth sweeps (summed over proximal steps).
    pub iterations: usize,
    pub kkt_residual: f64,
    pub ineq_multipliers: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
}

/// Quadratic term of the objective after preprocessing.
#[derive(Debug, Clone)]
enum Curvature {
    Identity,
    /// Positive definite `Q`.
    Definite { q: DMatrix<f64> },
    /// Semidefinite `Q`, solved through proximal steps with `Q + ρI`.
    Proximal { q: DMatrix<f64>, rho: f64 },
}

/// Precomputed dual geometry of a strictly convex problem with Hessian `H`:
/// `W_i = H⁻¹ a_i` and `a_iᵀ H⁻¹ a_i` for every row.
#[derive(Debug, Clone)]
struct DualGeometry {
    h_inv_rows: Option<Vec<Vec<f64>>>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    diag: Vec<f64>,
    /// Full dual Gram `A H⁻¹ Aᵀ`, kept when the set has at most
    /// [`MAX_CACHED_GRAM_ROWS`] rows.
    gram: Option<DMatrix<f64>>,
}

const MAX_CACHED_GRAM_ROWS: usize = 2048;

impl DualGeometry {
    fn identity(set: &PolyhedralSet) -> Self {
        let diag = set.rows().map(|(r, _, _)| dot(r, r)).collect();
        DualGeometry {
            h_inv_rows: None,
            chol: None,
            diag,
            gram: None,
        }
        .with_gram(set)
    }

    fn with_gram(mut self, set: &PolyhedralSet) -> Self {
        let rows = set.c.len() + set.e.len();
        if rows > 0 && rows <= MAX_CACHED_GRAM_ROWS {
            let a = DMatrix::from_fn(rows, set.n, |i, j| self.w_row(set, i, j, false));
            let w = DMatrix::from_fn(rows, set.n, |i, j| self.w_row(set, i, j, true));
            self.gram = Some(&a * w.transpose());
        }
        self
    }

    fn w_row(&self, set: &PolyhedralSet, i: usize, j: usize, weighted: bool) -> f64 {
        let q = set.c.len();
        if weighted {
            self.w(set, i)[j]
        } else if i < q {
            set.c[i][j]
        } else {
            set.e[i - q][j]
        }
    }

    /// `⟨row_a, H⁻¹ row_b⟩`
    fn entry(&self, set: &PolyhedralSet, a: usize, b: usize) -> f64 {
        match &self.gram {
            Some(g) => g[(a, b)],
            None => {
                let q = set.c.len();
                let ra = if a < q { &set.c[a] } else { &set.e[a - q] };
                dot(ra, self.w(set, b))
            }
        }
    }

    fn definite(set: &PolyhedralSet, h: &DMatrix<f64>) -> Result<Self> {
        let chol = h.clone().cholesky().ok_or_else(|| {
            Error::InvalidParameter("quadratic term is not positive definite".into())
        })?;
        let rows: Vec<Vec<f64>> = set
            .rows()
            .map(|(r, _, _)| chol.solve(&DVector::from_column_slice(r)).as_slice().to_vec())
            .collect();
        let diag = set.rows().zip(&rows).map(|((r, _, _), w)| dot(r, w)).collect();
        Ok(DualGeometry {
            h_inv_rows: Some(rows),
            chol: Some(chol),
            diag,
            gram: None,
        }
        .with_gram(set))
    }

    fn w<'a>(&'a self, set: &'a PolyhedralSet, i: usize) -> &'a [f64] {
        match &self.h_inv_rows {
            Some(rows) => &rows[i],
            None => {
                let q = set.c.len();
                if i < q {
                    &set.c[i]
                } else {
                    &set.e[i - q]
                }
            }
        }
    }

    /// Unconstrained minimizer `−H⁻¹c`.
    fn unconstrained(&self, c: &[f64]) -> Vec<f64> {
        match &self.chol {
            Some(ch) => {
                let v = ch.solve(&DVector::from_column_slice(c));
                v.iter().map(|x| -x).collect()
            }
            None => c.iter().map(|x| -x).collect(),
        }
    }
}

/// Stateful solver bound to one polyhedron and one quadratic term.
///
/// Keeps the multipliers of the previous solve as a warm start; use one
/// instance per run and [`QpSolver::reset`] between runs.
#[derive(Debug, Clone)]
pub struct QpSolver {
    set: PolyhedralSet,
    curvature: Curvature,
    geometry: DualGeometry,
    tol: f64,
    max_sweeps: usize,
    warm: Option<Vec<f64>>,
}

impl QpSolver {
    /// Projection solver (`Q = I`).
    pub fn projection(set: PolyhedralSet, tol: f64) -> Result<Self> {
        Self::check_tol(tol)?;
        let geometry = DualGeometry::identity(&set);
        let max_sweeps = default_sweep_cap(&set);
        Ok(QpSolver {
            set,
            curvature: Curvature::Identity,
            geometry,
            tol,
            max_sweeps,
            warm: None,
        })
    }

    /// Solver for `½ xᵀQx + cᵀx` with symmetric positive semidefinite `Q`
    /// (row-major).
    pub fn new(q: &[Vec<f64>], set: PolyhedralSet, tol: f64) -> Result<Self> {
        Self::check_tol(tol)?;
        let n = set.dim();
        if q.len() != n || !is_rectangular(q, n) {
            return Err(Error::InvalidParameter(format!("Q must be {n}x{n}")));
        }
        let is_identity = q
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 }));
        if is_identity {
            return Self::projection(set, tol);
        }
        let qm = DMatrix::from_fn(n, n, |i, j| q[i][j]);
        if (0..n).any(|i| (0..i).any(|j| (qm[(i, j)] - qm[(j, i)]).abs() > 1e-12 * (1.0 + qm[(i, j)].abs()))) {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        let max_sweeps = default_sweep_cap(&set);
        match qm.clone().cholesky() {
            Some(_) if min_pivot_ok(&qm) => {
                let geometry = DualGeometry::definite(&set, &qm)?;
                Ok(QpSolver {
                    set,
                    curvature: Curvature::Definite { q: qm },
                    geometry,
                    tol,
                    max_sweeps,
                    warm: None,
                })
            }
            _ => {
                let scale = (0..n).map(|i| qm[(i, i)]).fold(0.0_f64, f64::max);
                let rho = if scale > 0.0 { scale } else { 1.0 };
                let h = &qm + DMatrix::identity(n, n) * rho;
                let geometry = DualGeometry::definite(&set, &h)?;
                Ok(QpSolver {
                    set,
                    curvature: Curvature::Proximal { q: qm, rho },
                    geometry,
                    tol,
                    max_sweeps,
                    warm: None,
                })
            }
        }
    }

    fn check_tol(tol: f64) -> Result<()> {
        if tol > 0.0 && tol.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")))
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn set(&self) -> &PolyhedralSet {
        &self.set
    }

    pub fn with_sweep_cap(mut self, cap: usize) -> Self {
        self.max_sweeps = cap.max(1);
        self
    }

    /// Drops the warm-start multipliers.
    pub fn reset(&mut self) {
        self.warm = None;
    }

    /// Projects `z` onto the set. Only valid for projection solvers.
    pub fn project(&mut self, z: &[f64]) -> Result<QpSolution, QpError> {
        if !matches!(self.curvature, Curvature::Identity) {
            return Err(QpError::Invalid("project() needs a projection solver".into()));
        }
        let c: Vec<f64> = z.iter().map(|v| -v).collect();
        self.solve(&c)
    }

    /// Minimizes `½ xᵀQx + cᵀx` over the set.
    pub fn solve(&mut self, c: &[f64]) -> Result<QpSolution, QpError> {
        SOLVE_CALLS.with(|k| k.set(k.get() + 1));
        if c.len() != self.set.n {
            return Err(QpError::Invalid(format!(
                "linear term has length {}, expected {}",
                c.len(),
                self.set.n
            )));
        }
        self.check_trivial_rows()?;
        let result = match &self.curvature {
            Curvature::Identity | Curvature::Definite { .. } => {
                let warm = self.warm.take();
                self.solve_definite(c, warm, self.tol)
            }
            Curvature::Proximal { .. } => self.solve_proximal(c),
        };
        if let Ok(sol) = &result {
            let mut lam = sol.ineq_multipliers.clone();
            lam.extend_from_slice(&sol.eq_multipliers);
            self.warm = Some(lam);
        }
        result
    }

    fn check_trivial_rows(&self) -> Result<(), QpError> {
        for (r, rhs, ineq) in self.set.rows() {
            if r.iter().all(|&v| v == 0.0) {
                let bad = if ineq { rhs < 0.0 } else { rhs != 0.0 };
                if bad {
                    return Err(QpError::Infeasible {
                        certificate_residual: 0.0,
                    });
                }
            }
        }
        Ok(())
    }

    fn q_times(&self, x: &[f64]) -> Vec<f64> {
        match &self.curvature {
            Curvature::Identity => x.to_vec(),
            Curvature::Definite { q } | Curvature::Proximal { q, .. } => {
                (q * DVector::from_column_slice(x)).as_slice().to_vec()
            }
        }
    }

    /// KKT residual of `(x, λ)` for the original objective.
    /// Stationarity relative to the size of the terms summed into the
    /// gradient of the Lagrangian, primal violation (inequalities relative to
    /// `1 + ‖d‖∞`) and the natural complementarity residual `|min(λ, −s)|`,
    /// whichever is worst.
    fn kkt_residual(&self, c: &[f64], x: &[f64], lam: &[f64]) -> f64 {
        let mut grad = self.q_times(x);
        let mut magnitude = norm_inf(&grad).max(norm_inf(c));
        axpy(1.0, c, &mut grad);
        for (i, (r, _, _)) in self.set.rows().enumerate() {
            if lam[i] != 0.0 {
                axpy(lam[i], r, &mut grad);
                magnitude = magnitude.max(lam[i].abs() * norm_inf(r));
            }
        }
        let mut res = norm_inf(&grad) / (1.0 + magnitude);
        let scale = self.set.feasibility_scale();
        for (i, (r, rhs, ineq)) in self.set.rows().enumerate() {
            let s = dot(r, x) - rhs;
            if ineq {
                res = res
                    .max(s.max(0.0) / scale)
                    .max((-lam[i]).max(0.0))
                    .max(lam[i].min(-s / scale).abs());
            } else {
                res = res.max(s.abs());
            }
        }
        res
    }

    fn solution(&self, c: &[f64], x: Vec<f64>, lam: Vec<f64>, iterations: usize) -> QpSolution {
        let kkt_residual = self.kkt_residual(c, &x, &lam);
        let q = self.set.c.len();
        let active_set = (0..q).filter(|&i| lam[i] > 0.0).collect();
        let mut ineq = lam;
        let eq = ineq.split_off(q);
        QpSolution {
            x,
            active_set,
            iterations,
            kkt_residual,
            ineq_multipliers: ineq,
            eq_multipliers: eq,
        }
    }

    /// `x = −H⁻¹c − Σ λ_i W_i`
    fn primal_from_dual(&self, x_free: &[f64], lam: &[f64]) -> Vec<f64> {
        let mut x = x_free.to_vec();
        for (i, &l) in lam.iter().enumerate() {
            if l != 0.0 {
                axpy(-l, self.geometry.w(&self.set, i), &mut x);
            }
        }
        x
    }

    /// Strictly convex case (`H = Q` or `H = I`), with the original
    /// objective's KKT conditions as the acceptance test.
    fn solve_definite(
        &self,
        c: &[f64],
        warm: Option<Vec<f64>>,
        tol: f64,
    ) -> Result<QpSolution, QpError> {
        let accept = |x: &[f64], lam: &[f64]| self.kkt_residual(c, x, lam);
        let warmed = warm.is_some();
        let (x, lam, sweeps) = match self.hildreth(c, warm, tol, accept) {
            // multipliers far from the new optimum can stall the ascent
            Err(QpError::NonConvergence { .. }) if warmed => {
                debug!("warm-started QP solve stalled; retrying from zero multipliers");
                self.hildreth(c, None, tol, accept)?
            }
            other => other?,
        };
        Ok(self.solution(c, x, lam, sweeps))
    }

    /// Dual coordinate ascent for `min ½ xᵀHx + cᵀx` where `H` is the matrix
    /// behind `self.geometry`. `accept` measures the residual used to stop.
    fn hildreth(
        &self,
        c: &[f64],
        warm: Option<Vec<f64>>,
        tol: f64,
        accept: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<(Vec<f64>, Vec<f64>, usize), QpError> {
        let q = self.set.c.len();
        let rows = q + self.set.e.len();
        let x_free = self.geometry.unconstrained(c);
        if rows == 0 {
            return Ok((x_free, vec![], 0));
        }
        let mut lam = match warm {
            Some(w) if w.len() == rows => w,
            _ => vec![0.0; rows],
        };
        let mut x = self.primal_from_dual(&x_free, &lam);

        let support = |lam: &[f64]| -> Vec<usize> {
            (0..rows).filter(|&i| i >= q || lam[i] > 0.0).collect()
        };
        let mut prev_support = support(&lam);
        let mut polished: Option<Vec<usize>> = None;

        // warm start: the previous active set is often still optimal
        if lam.iter().any(|&l| l != 0.0) {
            if let Some((xp, lp)) = self.polish(&x_free, &prev_support, tol, &accept, QUICK_POLISH) {
                return Ok((xp, lp, 0));
            }
            polished = Some(prev_support.clone());
        }

        let mut best = (f64::INFINITY, x.clone());
        let mut lam_half_norm = 0.0;
        for sweep in 1..=self.max_sweeps {
            for (i, (r, rhs, ineq)) in self.set.rows().enumerate() {
                let dii = self.geometry.diag[i];
                if dii <= 0.0 {
                    continue;
                }
                let s = dot(r, &x) - rhs;
                let mut next = lam[i] + s / dii;
                if ineq && next < 0.0 {
                    next = 0.0;
                }
                let delta = next - lam[i];
                if delta != 0.0 {
                    axpy(-delta, self.geometry.w(&self.set, i), &mut x);
                    lam[i] = next;
                }
            }
            // remove accumulated drift
            x = self.primal_from_dual(&x_free, &lam);

            let sup = support(&lam);
            if sup == prev_support && polished.as_ref() != Some(&sup) {
                if let Some((xp, lp)) = self.polish(&x_free, &sup, tol, &accept, QUICK_POLISH) {
                    return Ok((xp, lp, sweep));
                }
                polished = Some(sup.clone());
            }
            prev_support = sup;

            let res = accept(&x, &lam);
            if res <= tol {
                return Ok((x, lam, sweep));
            }
            if res < best.0 {
                best = (res, x.clone());
            }
            if sweep == self.max_sweeps / 2 {
                lam_half_norm = norm(&lam);
            }
        }

        // last resort: let the active-set refinement run from the final
        // support and from the equalities alone
        let equalities: Vec<usize> = (q..rows).collect();
        for start in [support(&lam), equalities] {
            if let Some((xp, lp)) = self.polish(&x_free, &start, tol, &accept, 4 * rows) {
                return Ok((xp, lp, self.max_sweeps));
            }
        }

        if let Some(cert) = self.farkas(&lam, lam_half_norm) {
            return Err(QpError::Infeasible {
                certificate_residual: cert,
            });
        }
        Err(QpError::NonConvergence {
            best: best.1,
            kkt_residual: best.0,
            iterations: self.max_sweeps,
        })
    }

    /// Diverging multipliers point along a Farkas ray `y ≥ 0` (inequality
    /// part) with `Aᵀy ≈ 0` and `rhsᵀy < 0`. Returns `‖Aᵀy‖∞ / |rhsᵀy|`.
    fn farkas(&self, lam: &[f64], lam_half_norm: f64) -> Option<f64> {
        let total = norm(lam);
        if !(total > 1.5 * lam_half_norm && total > 0.0) {
            return None;
        }
        let y: Vec<f64> = lam.iter().map(|l| l / total).collect();
        let mut aty = vec![0.0; self.set.n];
        let mut rhs = 0.0;
        for (i, (r, b, _)) in self.set.rows().enumerate() {
            axpy(y[i], r, &mut aty);
            rhs += y[i] * b;
        }
        if rhs >= 0.0 {
            return None;
        }
        let cert = norm_inf(&aty) / -rhs;
        (cert < 0.1).then_some(cert)
    }

    /// Solves the strictly convex problem with the rows in `support` held at
    /// equality, then refines the support: the most negative inequality
    /// multiplier is dropped, or else the most violated inequality row is
    /// added, until the point is accepted.
    ///
    /// A rank-deficient support is first thinned to an independent subset
    /// (equalities first). A row added in the span of the support,
    /// `n₊ = Σ r_j n_j`, displaces the inequality row with the smallest
    /// `λ_j / r_j` over `r_j > 0`, which keeps the multipliers nonnegative
    /// along the exchange.
    fn polish(
        &self,
        x_free: &[f64],
        support: &[usize],
        tol: f64,
        accept: &impl Fn(&[f64], &[f64]) -> f64,
        max_changes: usize,
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let q = self.set.c.len();
        let all_rows: Vec<(&Vec<f64>, f64)> = self.set.rows().map(|(r, b, _)| (r, b)).collect();
        let scale = self.set.feasibility_scale();
        let mut support = support.to_vec();
        let mut seen: Vec<Vec<usize>> = Vec::new();
        let mut added: Option<(usize, Vec<f64>)> = None;
        for _ in 0..=max_changes {
            let mut key = support.clone();
            key.sort_unstable();
            if seen.contains(&key) {
                return None;
            }
            seen.push(key);
            let lam = match self.support_multipliers(x_free, &all_rows, &support) {
                Some(lam) => lam,
                None => {
                    match added.take() {
                        // the row just added depends on the previous support
                        Some((add, prev_lam)) => {
                            support.pop();
                            let r = self.dependence(&all_rows, &support, add)?;
                            let (out, _) = support
                                .iter()
                                .zip(&r)
                                .filter(|&(&j, &rj)| j < q && rj > 1e-12)
                                .map(|(&j, &rj)| (j, prev_lam[j] / rj))
                                .min_by(|a, b| a.1.total_cmp(&b.1))?;
                            support.retain(|&j| j != out);
                            support.push(add);
                        }
                        None => support = self.independent_subset(&all_rows, &support),
                    }
                    self.support_multipliers(x_free, &all_rows, &support)?
                }
            };
            added = None;
            let most_negative = support
                .iter()
                .copied()
                .filter(|&i| i < q && lam[i] < -tol * scale)
                .min_by(|&a, &b| lam[a].total_cmp(&lam[b]));
            if let Some(i) = most_negative {
                support.retain(|&j| j != i);
                continue;
            }
            let mut lam = lam;
            for l in lam.iter_mut().take(q) {
                *l = l.max(0.0);
            }
            let x = self.primal_from_dual(x_free, &lam);
            if accept(&x, &lam) <= tol {
                return Some((x, lam));
            }
            let (add, _) = (0..q)
                .filter(|i| !support.contains(i))
                .map(|i| (i, dot(all_rows[i].0, &x) - all_rows[i].1))
                .filter(|&(_, v)| v > tol * scale)
                .max_by(|a, b| a.1.total_cmp(&b.1))?;
            support.push(add);
            added = Some((add, lam));
        }
        None
    }

    /// Greedy linearly independent subset of `support`, equalities first.
    fn independent_subset(&self, all_rows: &[(&Vec<f64>, f64)], support: &[usize]) -> Vec<usize> {
        let q = self.set.c.len();
        let mut out: Vec<usize> = Vec::new();
        for i in support.iter().copied().filter(|&i| i >= q).chain(support.iter().copied().filter(|&i| i < q)) {
            if self.dependence(all_rows, &out, i).is_none() {
                out.push(i);
            }
        }
        out
    }

    /// Coefficients `r` with `row_i = Σ r_j row_{support[j]}` when row `i` lies
    /// in the span of the support rows (relative residual below 1e-9).
    fn dependence(&self, all_rows: &[(&Vec<f64>, f64)], support: &[usize], i: usize) -> Option<Vec<f64>> {
        let target = all_rows[i].0;
        let tnorm = norm(target);
        if tnorm == 0.0 {
            return Some(vec![0.0; support.len()]);
        }
        if support.is_empty() {
            return None;
        }
        let n = self.set.n;
        let a = DMatrix::from_fn(n, support.len(), |r, c| all_rows[support[c]].0[r]);
        let t = DVector::from_column_slice(target);
        let coef = a.clone().svd(true, true).solve(&t, 1e-12).ok()?;
        let resid = (&a * &coef - &t).norm();
        (resid <= 1e-9 * tnorm).then(|| coef.as_slice().to_vec())
    }

    /// Multipliers holding the support rows at equality; `None` when the
    /// support rows are (numerically) dependent.
    fn support_multipliers(
        &self,
        x_free: &[f64],
        all_rows: &[(&Vec<f64>, f64)],
        support: &[usize],
    ) -> Option<Vec<f64>> {
        let rows = all_rows.len();
        let k = support.len();
        let mut lam = vec![0.0; rows];
        if k == 0 {
            return Some(lam);
        }
        let gram = DMatrix::from_fn(k, k, |a, b| self.geometry.entry(&self.set, support[a], support[b]));
        let rhs = DVector::from_iterator(
            k,
            support.iter().map(|&i| dot(all_rows[i].0, x_free) - all_rows[i].1),
        );
        let sol = checked_cholesky(&gram)?.solve(&rhs);
        for (a, &i) in support.iter().enumerate() {
            lam[i] = sol[a];
        }
        Some(lam)
    }

    /// Proximal-point loop for semidefinite `Q`.
    fn solve_proximal(&mut self, c: &[f64]) -> Result<QpSolution, QpError> {
        let (q_mat, rho) = match &self.curvature {
            Curvature::Proximal { q, rho } => (q.clone(), *rho),
            _ => unreachable!(),
        };
        let n = self.set.n;
        let max_outer = self.max_sweeps;
        let mut x = vec![0.0; n];
        let mut lam = self.warm.take();
        let mut sweeps = 0;
        let mut best = (f64::INFINITY, x.clone());
        let mut last_support: Option<Vec<usize>> = None;
        let inner_tol = 0.1 * self.tol;
        for outer in 0..max_outer {
            // prox subproblem: ½xᵀ(Q+ρI)x + (c − ρ x_t)ᵀx
            let c_t: Vec<f64> = c.iter().zip(&x).map(|(ci, xi)| ci - rho * xi).collect();
            let x_t = x.clone();
            let (xn, ln, s) = self.hildreth(&c_t, lam.take(), inner_tol, |x, l| {
                self.prox_residual(&c_t, rho, x, l)
            })?;
            sweeps += s;

            let q_rows = self.set.c.len();
            let support: Vec<usize> = (0..ln.len()).filter(|&i| i >= q_rows || ln[i] > 0.0).collect();
            if last_support.as_ref() != Some(&support) {
                if let Some((xp, lp)) = self.kkt_polish(&q_mat, c, &support) {
                    return Ok(self.solution(c, xp, lp, sweeps));
                }
                last_support = Some(support);
            }

            let res = self.kkt_residual(c, &xn, &ln);
            if res <= self.tol {
                return Ok(self.solution(c, xn, ln, sweeps));
            }
            if res < best.0 {
                best = (res, xn.clone());
            }
            if outer >= 3 {
                if let Some(dir) = self.recession_descent(&q_mat, c, &x_t, &xn) {
                    return Err(QpError::Unbounded { direction: dir });
                }
            }
            x = xn;
            lam = Some(ln);
        }
        Err(QpError::NonConvergence {
            best: best.1,
            kkt_residual: best.0,
            iterations: sweeps,
        })
    }

    fn prox_residual(&self, c_t: &[f64], rho: f64, x: &[f64], lam: &[f64]) -> f64 {
        // the proximal Hessian is Q + ρI: shift the linear term accordingly
        let shifted: Vec<f64> = c_t.iter().zip(x).map(|(ci, xi)| ci + rho * xi).collect();
        self.kkt_residual(&shifted, x, lam)
    }

    /// Exact KKT solve of the original (semidefinite) problem with the rows in
    /// `support` at equality.
    fn kkt_polish(
        &self,
        q_mat: &DMatrix<f64>,
        c: &[f64],
        support: &[usize],
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.set.n;
        let k = support.len();
        let rows: Vec<(&Vec<f64>, f64)> = self.set.rows().map(|(r, b, _)| (r, b)).collect();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(q_mat);
        for (a, &i) in support.iter().enumerate() {
            for j in 0..n {
                kkt[(n + a, j)] = rows[i].0[j];
                kkt[(j, n + a)] = rows[i].0[j];
            }
        }
        let rhs = DVector::from_iterator(
            n + k,
            c.iter().map(|v| -v).chain(support.iter().map(|&i| rows[i].1)),
        );
        let sol = kkt.clone().svd(true, true).solve(&rhs, 1e-11).ok()?;
        if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            return None;
        }
        let x = sol.rows(0, n).iter().copied().collect::<Vec<_>>();
        let mut lam = vec![0.0; rows.len()];
        let q = self.set.c.len();
        for (a, &i) in support.iter().enumerate() {
            lam[i] = sol[n + a];
        }
        if (0..q).any(|i| lam[i] < -self.tol) {
            return None;
        }
        for l in lam.iter_mut().take(q) {
            *l = l.max(0.0);
        }
        (self.kkt_residual(c, &x, &lam) <= self.tol).then_some((x, lam))
    }

    /// A step direction that lies in the recession cone of the set, in the
    /// null space of `Q`, and strictly decreases the linear term certifies
    /// an unbounded problem.
    fn recession_descent(
        &self,
        q_mat: &DMatrix<f64>,
        c: &[f64],
        from: &[f64],
        to: &[f64],
    ) -> Option<Vec<f64>> {
        let d: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
        let len = norm(&d);
        if len <= 1e-6 * (1.0 + norm(to)) {
            return None;
        }
        let u: Vec<f64> = d.iter().map(|v| v / len).collect();
        let eps = 1e-9;
        let qu = q_mat * DVector::from_column_slice(&u);
        let ok = qu.amax() <= eps
            && dot(c, &u) < -eps
            && self.set.c.iter().all(|r| dot(r, &u) <= eps)
            && self.set.e.iter().all(|r| dot(r, &u).abs() <= eps);
        ok.then_some(u)
    }
}

/// Hildreth can crawl on nearly dependent rows; small sets get a generous
/// floor since each sweep is cheap.
fn default_sweep_cap(set: &PolyhedralSet) -> usize {
    (200 * (set.inequality_rows() + set.equality_rows() + set.dim())).max(5000)
}

/// Support changes a polish attempt may make while Hildreth is still making
/// progress; the final attempt before giving up gets one per row.
const QUICK_POLISH: usize = 2;

/// Cholesky can succeed on matrices that are singular up to roundoff; demand
/// a pivot that is not negligible relative to the diagonal.
fn min_pivot_ok(q: &DMatrix<f64>) -> bool {
    checked_cholesky(q).is_some()
}

fn checked_cholesky(q: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let ch = q.clone().cholesky()?;
    let l = ch.l_dirty();
    let max_diag = (0..q.nrows()).map(|i| q[(i, i)]).fold(0.0_f64, f64::max);
    (0..q.nrows())
        .all(|i| l[(i, i)] * l[(i, i)] > 1e-10 * max_diag.max(1e-300))
        .then_some(ch)
}

/// Euclidean projection of `z` onto `set`, without warm start.
pub fn project_polyhedron(set: &PolyhedralSet, z: &[f64], tol: f64) -> Result<QpSolution> {
    let mut solver = QpSolver::projection(set.clone(), tol)?;
    Ok(solver.project(z)?)
}

/// Minimizer of `½ xᵀQx + cᵀx` over `set`, without warm start.
pub fn solve_qp(q: &[Vec<f64>], c: &[f64], set: &PolyhedralSet, tol: f64) -> Result<QpSolution> {
    let mut solver = QpSolver::new(q, set.clone(), tol)?;
    Ok(solver.solve(c)?)
}
