//! Constrained finite-sum problems
//!
//! ```text
//! minimize   Σ_i f_i(x)
//! subject to h_i(x) ≤ 0,  A_i x = b_i   for every agent i,
//!            x[j] ≥ 0                   for j ∈ J,
//!            x ∈ X  (a box)
//! ```
//!
//! together with the infeasibility metric `φ = Σ_i φ_i` and the subgradients
//! consumed by the incremental solvers.

mod bounds;
mod file;
mod oracle;

pub use bounds::{estimate_bounds, BoundEstimates};
pub use file::{BlockFile, BoxFile, ProblemFile};
pub use oracle::{CustomOracle, Oracle, OracleError};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, is_rectangular};
use crate::qp::PolyhedralSet;

/// Penalty applied to the functional constraint `h_i` inside `φ_i`.
///
/// `Hinge` uses `max(0, h)` with subgradient `∇h·1{h > 0}`; `Product` uses
/// `½ max(0, h)²` with subgradient `max(0, h)·∇h`. Both are convex penalty and
/// subgradient pairs; at `h = 0` both return the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiMode {
    #[default]
    Hinge,
    Product,
}

impl PhiMode {
    fn penalty(self, h: f64) -> f64 {
        let hp = h.max(0.0);
        match self {
            PhiMode::Hinge => hp,
            PhiMode::Product => 0.5 * hp * hp,
        }
    }

    fn subgradient_scale(self, h: f64) -> f64 {
        match self {
            PhiMode::Hinge if h > 0.0 => 1.0,
            PhiMode::Product if h > 0.0 => h,
            _ => 0.0,
        }
    }
}

/// Compact box `{x : lower ≤ x ≤ upper}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "box bound {j} is not finite"
                )));
            }
            if l > u {
                return Err(Error::InvalidParameter(format!(
                    "box lower[{j}] = {l} exceeds upper[{j}] = {u}"
                )));
            }
        }
        Ok(BoxSet { lower, upper })
    }

    /// `[-radius, radius]^n`
    pub fn cube(n: usize, radius: f64) -> Result<Self> {
        Self::new(vec![-radius; n], vec![radius; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.max(*l).min(*u);
        }
    }

    /// Uniform sample from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..=u) })
            .collect()
    }

    /// Corner indexed by the bits of `mask` (bit j set selects `upper[j]`).
    pub fn corner(&self, mask: u64) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                if mask >> j & 1 == 1 {
                    self.upper[j]
                } else {
                    self.lower[j]
                }
            })
            .collect()
    }

    /// The corner with the largest Euclidean norm.
    pub fn farthest_corner(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if l.abs() > u.abs() { l } else { u })
            .collect()
    }
}

/// Componentwise clamp onto the box.
pub fn project_box(box_set: &BoxSet, z: &[f64]) -> Result<Vec<f64>> {
    check_dim("project_box", box_set.dim(), z.len())?;
    let mut x = z.to_vec();
    box_set.project_in_place(&mut x);
    Ok(x)
}

/// Data held by one agent: `f_i`, `h_i` and the equality pair `(A_i, b_i)`.
#[derive(Debug, Clone)]
pub struct AgentBlock {
    pub f: Oracle,
    pub h: Oracle,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl AgentBlock {
    pub fn new(f: Oracle, h: Oracle, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        check_dim("equality rows (A vs b)", a.len(), b.len())?;
        Ok(AgentBlock { f, h, a, b })
    }

    /// Block without equality constraints.
    pub fn unconstrained_eq(f: Oracle, h: Oracle) -> Self {
        AgentBlock {
            f,
            h,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    fn validate(&self, n: usize) -> std::result::Result<(), String> {
        if !is_rectangular(&self.a, n) {
            return Err(format!("A rows must have length {n}"));
        }
        self.f.validate(n).map_err(|e| format!("f: {e}"))?;
        self.h.validate(n).map_err(|e| format!("h: {e}"))
    }
}

fn oracle_err(agent: usize) -> impl FnOnce(OracleError) -> Error {
    move |source| Error::Oracle { agent, source }
}

fn phi_agent_at(
    block: &AgentBlock,
    x: &[f64],
    nonneg: &[usize],
    m: usize,
    mode: PhiMode,
    agent: usize,
) -> Result<f64> {
    let eq: f64 = block
        .a
        .iter()
        .zip(&block.b)
        .map(|(row, bi)| {
            let r = dot(row, x) - bi;
            r * r
        })
        .sum();
    let h = block.h.value(x).map_err(oracle_err(agent))?;
    let neg: f64 = nonneg.iter().map(|&j| (-x[j]).max(0.0)).sum();
    Ok(0.5 * eq + mode.penalty(h) + neg / m as f64)
}

/// Adds `scale · ∇̃φ_i(x)` into `out`.
fn add_phi_subgradient(
    block: &AgentBlock,
    x: &[f64],
    nonneg: &[usize],
    m: usize,
    mode: PhiMode,
    agent: usize,
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    for (row, bi) in block.a.iter().zip(&block.b) {
        let r = dot(row, x) - bi;
        if r != 0.0 {
            axpy(scale * r, row, out);
        }
    }
    block
        .h
        .add_scaled_subgradient(x, out, |h| scale * mode.subgradient_scale(h))
        .map_err(oracle_err(agent))?;
    let inv_m = scale / m as f64;
    for &j in nonneg {
        if x[j] < 0.0 {
            out[j] -= inv_m;
        }
    }
    Ok(())
}

fn check_nonneg(n: usize, nonneg: &[usize]) -> Result<()> {
    match nonneg.iter().find(|&&j| j >= n) {
        Some(j) => Err(Error::InvalidParameter(format!(
            "nonnegativity index {j} out of range for dimension {n}"
        ))),
        None => Ok(()),
    }
}

/// Agent infeasibility `φ_i(x) = ½‖A_i x − b_i‖² + pen(h_i(x)) + Σ_{j∈J} max(−x[j], 0)/m`.
///
/// Oracle failures are attributed to agent 0; use [`ProblemSpec::phi_agent`]
/// for the agent index.
pub fn eval_phi_agent(
    block: &AgentBlock,
    x: &[f64],
    nonneg: &[usize],
    m: usize,
    mode: PhiMode,
) -> Result<f64> {
    check_block_args(block, x, nonneg, m)?;
    phi_agent_at(block, x, nonneg, m, mode, 0)
}

/// Subgradient of [`eval_phi_agent`] with the same `mode`.
pub fn subgrad_phi_agent(
    block: &AgentBlock,
    x: &[f64],
    nonneg: &[usize],
    m: usize,
    mode: PhiMode,
) -> Result<Vec<f64>> {
    check_block_args(block, x, nonneg, m)?;
    let mut g = vec![0.0; x.len()];
    add_phi_subgradient(block, x, nonneg, m, mode, 0, 1.0, &mut g)?;
    Ok(g)
}

fn check_block_args(block: &AgentBlock, x: &[f64], nonneg: &[usize], m: usize) -> Result<()> {
    if let Some(row) = block.a.iter().find(|r| r.len() != x.len()) {
        return Err(Error::dim("A row vs x", row.len(), x.len()));
    }
    check_nonneg(x.len(), nonneg)?;
    if m == 0 {
        return Err(Error::InvalidParameter("agent count must be positive".into()));
    }
    Ok(())
}

/// Total infeasibility `φ(x) = Σ_i φ_i(x)`.
pub fn eval_phi_total(problem: &ProblemSpec, x: &[f64]) -> Result<f64> {
    problem.eval_phi(x)
}

/// Problem data: `m` agent blocks, the box `X`, the nonnegativity set `J`
/// (0-based) and the penalty mode of `φ`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    n: usize,
    blocks: Vec<AgentBlock>,
    box_set: BoxSet,
    nonneg: Vec<usize>,
    phi_mode: PhiMode,
}

impl ProblemSpec {
    pub fn new(
        blocks: Vec<AgentBlock>,
        box_set: BoxSet,
        mut nonneg: Vec<usize>,
        phi_mode: PhiMode,
    ) -> Result<Self> {
        let n = box_set.dim();
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("problem needs at least one agent".into()));
        }
        for (i, block) in blocks.iter().enumerate() {
            block
                .validate(n)
                .map_err(|e| Error::InvalidParameter(format!("agent {i}: {e}")))?;
        }
        nonneg.sort_unstable();
        nonneg.dedup();
        check_nonneg(n, &nonneg)?;
        Ok(ProblemSpec {
            n,
            blocks,
            box_set,
            nonneg,
            phi_mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of agents `m`.
    pub fn agents(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[AgentBlock] {
        &self.blocks
    }

    pub fn box_set(&self) -> &BoxSet {
        &self.box_set
    }

    pub fn nonneg(&self) -> &[usize] {
        &self.nonneg
    }

    pub fn phi_mode(&self) -> PhiMode {
        self.phi_mode
    }

    pub fn with_phi_mode(mut self, mode: PhiMode) -> Self {
        self.phi_mode = mode;
        self
    }

    /// Total number of equality rows `p = Σ d_i`.
    pub fn equality_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.a.len()).sum()
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        check_dim("x", self.n, x.len())
    }

    pub fn phi_agent(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        phi_agent_at(&self.blocks[i], x, &self.nonneg, self.agents(), self.phi_mode, i)
    }

    pub fn eval_phi(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        let m = self.agents();
        self.blocks.iter().enumerate().try_fold(0.0, |acc, (i, b)| {
            Ok(acc + phi_agent_at(b, x, &self.nonneg, m, self.phi_mode, i)?)
        })
    }

    pub fn f_agent(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        self.blocks[i].f.value(x).map_err(oracle_err(i))
    }

    /// Objective `f(x) = Σ_i f_i(x)`.
    pub fn eval_f(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        self.blocks.iter().enumerate().try_fold(0.0, |acc, (i, b)| {
            Ok(acc + b.f.value(x).map_err(oracle_err(i))?)
        })
    }

    pub fn subgrad_phi_agent(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut g = vec![0.0; self.n];
        self.add_phi_subgradient(i, x, 1.0, &mut g)?;
        Ok(g)
    }

    pub fn subgrad_f_agent(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        Ok(self.blocks[i].f.eval(x).map_err(oracle_err(i))?.1)
    }

    /// `out += scale · ∇̃φ_i(x)`
    pub fn add_phi_subgradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        add_phi_subgradient(
            &self.blocks[i],
            x,
            &self.nonneg,
            self.agents(),
            self.phi_mode,
            i,
            scale,
            out,
        )
    }

    /// `out += scale · ∇̃f_i(x)`; returns `f_i(x)`.
    pub fn add_f_subgradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) -> Result<f64> {
        self.blocks[i]
            .f
            .add_scaled_subgradient(x, out, |_| scale)
            .map_err(oracle_err(i))
    }

    /// Full-problem feasibility test with absolute tolerance `tol` on each
    /// constraint (box, `h_i`, equalities, nonnegativity).
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.check_x(x)?;
        let in_box = x
            .iter()
            .zip(self.box_set.lower.iter().zip(&self.box_set.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol);
        if !in_box || self.nonneg.iter().any(|&j| x[j] < -tol) {
            return Ok(false);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.h.value(x).map_err(oracle_err(i))? > tol {
                return Ok(false);
            }
            if b.a.iter().zip(&b.b).any(|(row, bi)| (dot(row, x) - bi).abs() > tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Polyhedral description of the full feasible set (box, equalities,
    /// nonnegativity and every `h_i`), available when every `h_i` is
    /// constant, affine or max-affine.
    pub fn polyhedral_feasible_set(&self) -> Result<PolyhedralSet> {
        let n = self.n;
        let mut c_rows = Vec::new();
        let mut d = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if let Oracle::Constant { value } = b.h {
                if value > 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "agent {i}: constant h = {value} > 0 makes the problem infeasible"
                    )));
                }
            }
            let (rows, offsets) = b.h.polyhedral_sublevel().ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "agent {i}: h has no polyhedral sublevel description"
                ))
            })?;
            for (r, g) in rows.into_iter().zip(offsets) {
                c_rows.push(r);
                d.push(-g);
            }
        }
        for &j in &self.nonneg {
            let mut r = vec![0.0; n];
            r[j] = -1.0;
            c_rows.push(r);
            d.push(0.0);
        }
        for j in 0..n {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            c_rows.push(r.clone());
            d.push(self.box_set.upper[j]);
            r[j] = -1.0;
            c_rows.push(r);
            d.push(-self.box_set.lower[j]);
        }
        let (e_rows, g): (Vec<_>, Vec<_>) = self
            .blocks
            .iter()
            .flat_map(|b| b.a.iter().cloned().zip(b.b.iter().copied()))
            .unzip();
        PolyhedralSet::new(n, c_rows, d, e_rows, g)
    }
}
