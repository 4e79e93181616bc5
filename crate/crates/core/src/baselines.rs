//! Projection-based incremental methods used as comparison schemes.
//!
//! All three project onto the full polyhedral feasible set through
//! [`QpSolver`], so their iterates are feasible (to the projection tolerance)
//! at every step:
//!
//! * projected IG: one projected subgradient step per agent, `γ_k = γ0/√(1+k)`;
//! * proximal IAG: a table of the last gradient seen per agent, stepping along
//!   the aggregate `(γ/m) Σ_i g_i` after refreshing one entry, agents in order;
//! * SAGA: uniformly sampled agent `j`, direction
//!   `∇f_j(x) − g_j + (1/m) Σ_i g_i`, unbiased for `(1/m) Σ_i ∇f_i(x)`.
//!
//! An outer iteration is one pass of `m` inner steps.

use std::time::{Duration, Instant};

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::airig::{AveragingState, RunOptions};
use crate::error::{check_dim, Error, Result};
use crate::history::{IterRecord, RunHistory, SolverKind};
use crate::linalg::{axpy, dist, norm_inf};
use crate::problem::ProblemSpec;
use crate::qp::{PolyhedralSet, QpError, QpSolver, DEFAULT_TOL};
use crate::schedules::ScheduleParams;

/// Full re-summation cadence (in table updates) bounding floating-point drift.
const RESUM_EVERY: usize = 64;

/// Last gradient seen per agent and their running sum.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTable {
    grads: Vec<Vec<f64>>,
    filled: Vec<bool>,
    sum: Vec<f64>,
    updates: usize,
}

impl GradientTable {
    /// Empty table; entries count as zero until first written.
    pub fn empty(m: usize, n: usize) -> Self {
        GradientTable {
            grads: vec![vec![0.0; n]; m],
            filled: vec![false; m],
            sum: vec![0.0; n],
            updates: 0,
        }
    }

    /// Table filled with every agent's gradient at `x`.
    pub fn at(problem: &ProblemSpec, x: &[f64]) -> Result<Self> {
        let mut t = Self::empty(problem.agents(), problem.dim());
        for i in 0..problem.agents() {
            t.replace(i, problem.subgrad_f_agent(i, x)?);
        }
        Ok(t)
    }

    pub fn agents(&self) -> usize {
        self.grads.len()
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    pub fn grad(&self, i: usize) -> &[f64] {
        &self.grads[i]
    }

    pub fn is_filled(&self, i: usize) -> bool {
        self.filled[i]
    }

    pub fn replace(&mut self, i: usize, g: Vec<f64>) {
        for ((s, new), old) in self.sum.iter_mut().zip(&g).zip(&self.grads[i]) {
            *s += new - old;
        }
        self.grads[i] = g;
        self.filled[i] = true;
        self.updates += 1;
        if self.updates.is_multiple_of(RESUM_EVERY) {
            self.resum();
        }
    }

    pub fn resum(&mut self) {
        self.sum.fill(0.0);
        for g in &self.grads {
            axpy(1.0, g, &mut self.sum);
        }
    }

    /// `‖sum − Σ_i grads_i‖∞`
    pub fn drift(&self) -> f64 {
        let mut exact = vec![0.0; self.sum.len()];
        for g in &self.grads {
            axpy(1.0, g, &mut exact);
        }
        exact
            .iter()
            .zip(&self.sum)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Projects `z`, accepting a stalled solve whose KKT residual is within the
/// tolerance scaled by `1 + ‖z‖∞` (far-away points lose absolute accuracy).
fn project(solver: &mut QpSolver, z: &[f64]) -> Result<Vec<f64>> {
    match solver.project(z) {
        Ok(sol) => Ok(sol.x),
        Err(QpError::NonConvergence { best, kkt_residual, .. })
            if kkt_residual <= solver.tol() * (1.0 + norm_inf(z)) =>
        {
            debug!("accepting projection with KKT residual {kkt_residual:.3e}");
            Ok(best)
        }
        Err(e) => Err(e.into()),
    }
}

/// One projected IG cycle: `x ← P(x − γ_k ∇f_i(x))` for `i = 1..m`.
pub fn step_projected_ig(
    problem: &ProblemSpec,
    x_k: &[f64],
    gamma_k: f64,
    solver: &mut QpSolver,
) -> Result<Vec<f64>> {
    check_dim("step_projected_ig", problem.dim(), x_k.len())?;
    let mut x = x_k.to_vec();
    let mut z = vec![0.0; x.len()];
    for i in 0..problem.agents() {
        z.copy_from_slice(&x);
        problem.add_f_subgradient(i, &x, -gamma_k, &mut z)?;
        x = project(solver, &z)?;
    }
    Ok(x)
}

/// Proximal IAG step: refresh agent `agent`'s gradient at `x_k`, then
/// `x ← P(x_k − (γ_k/m) Σ_i g_i)`.
pub fn step_prox_iag(
    problem: &ProblemSpec,
    table: &mut GradientTable,
    x_k: &[f64],
    gamma_k: f64,
    solver: &mut QpSolver,
    agent: usize,
) -> Result<Vec<f64>> {
    check_dim("step_prox_iag", problem.dim(), x_k.len())?;
    table.replace(agent, problem.subgrad_f_agent(agent, x_k)?);
    let mut z = x_k.to_vec();
    axpy(-gamma_k / problem.agents() as f64, table.sum(), &mut z);
    project(solver, &z)
}

/// SAGA direction for agent `j` at `x`: `∇f_j(x) − g_j + (1/m) Σ_i g_i`.
pub fn saga_direction(problem: &ProblemSpec, table: &GradientTable, x: &[f64], j: usize) -> Result<Vec<f64>> {
    let fresh = problem.subgrad_f_agent(j, x)?;
    Ok(saga_combine(&fresh, table, j))
}

fn saga_combine(fresh: &[f64], table: &GradientTable, j: usize) -> Vec<f64> {
    let inv_m = 1.0 / table.agents() as f64;
    fresh
        .iter()
        .zip(table.grad(j))
        .zip(table.sum())
        .map(|((f, old), s)| f - old + inv_m * s)
        .collect()
}

/// SAGA step with a uniformly drawn agent. Returns the new iterate and the
/// agent index used.
pub fn step_saga<R: Rng + ?Sized>(
    problem: &ProblemSpec,
    table: &mut GradientTable,
    x_k: &[f64],
    gamma_k: f64,
    solver: &mut QpSolver,
    rng: &mut R,
) -> Result<(Vec<f64>, usize)> {
    check_dim("step_saga", problem.dim(), x_k.len())?;
    let j = rng.random_range(0..problem.agents());
    let fresh = problem.subgrad_f_agent(j, x_k)?;
    let dir = saga_combine(&fresh, table, j);
    table.replace(j, fresh);
    let mut z = x_k.to_vec();
    axpy(-gamma_k, &dir, &mut z);
    Ok((project(solver, &z)?, j))
}

/// Stepsize rule for a baseline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineStep {
    /// `γ_k = γ0 / √(1+k)`
    Diminishing { gamma0: f64 },
    Constant(f64),
}

impl BaselineStep {
    fn at(self, k: u64) -> f64 {
        match self {
            BaselineStep::Diminishing { gamma0 } => gamma0 / ((1 + k) as f64).sqrt(),
            BaselineStep::Constant(g) => g,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOptions {
    pub run: RunOptions,
    pub step: BaselineStep,
    pub seed: u64,
    pub projection_tol: f64,
}

impl BaselineOptions {
    pub fn new(run: RunOptions, step: BaselineStep) -> Self {
        BaselineOptions {
            run,
            step,
            seed: 0,
            projection_tol: DEFAULT_TOL,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Runs a baseline for `N` passes (or until the budget is spent).
///
/// Projected IG and SAGA report the running uniform average of the pass-end
/// iterates, proximal IAG its last iterate. Elapsed time includes
/// projections and excludes trace evaluation.
pub fn run_baseline(
    kind: SolverKind,
    problem: &ProblemSpec,
    feasible: &PolyhedralSet,
    x0: &[f64],
    opts: &BaselineOptions,
) -> Result<RunHistory> {
    if kind == SolverKind::Airig {
        return Err(Error::InvalidParameter("airig is not a baseline".into()));
    }
    check_dim("x0", problem.dim(), x0.len())?;
    check_dim("feasible set", problem.dim(), feasible.dim())?;
    if opts.run.iterations == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let m = problem.agents();
    let mut solver = QpSolver::projection(feasible.clone(), opts.projection_tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut solver_time = Duration::ZERO;

    let t0 = Instant::now();
    let mut x = project(&mut solver, x0)?;
    let mut table = match kind {
        SolverKind::Saga => GradientTable::at(problem, &x)?,
        _ => GradientTable::empty(m, problem.dim()),
    };
    solver_time += t0.elapsed();

    let averaged = matches!(kind, SolverKind::ProjIg | SolverKind::Saga);
    let mut avg = AveragingState::new(x.clone(), 1.0, 0.0);
    let mut records = Vec::new();
    let mut truncated = false;
    let mut done = 0;

    for k in 0..opts.run.iterations {
        let gamma = opts.step.at(k);
        let t0 = Instant::now();
        match kind {
            SolverKind::ProjIg => x = step_projected_ig(problem, &x, gamma, &mut solver)?,
            SolverKind::ProxIag => {
                for i in 0..m {
                    x = step_prox_iag(problem, &mut table, &x, gamma, &mut solver, i)?;
                }
            }
            SolverKind::Saga => {
                for _ in 0..m {
                    x = step_saga(problem, &mut table, &x, gamma, &mut solver, &mut rng)?.0;
                }
            }
            SolverKind::Airig => unreachable!(),
        }
        if averaged {
            avg.update(&x, 1.0, 0.0);
        }
        solver_time += t0.elapsed();
        done = k + 1;

        let out_of_time = opts.run.budget.is_some_and(|b| solver_time >= b) && done < opts.run.iterations;
        if opts.run.should_record(k) || out_of_time {
            let reported = if averaged { &avg.xbar } else { &x };
            records.push(IterRecord {
                k,
                f_bar: problem.eval_f(reported)?,
                phi_bar: problem.eval_phi(reported)?,
                f_last: problem.eval_f(&x)?,
                phi_last: problem.eval_phi(&x)?,
                gamma_k: gamma,
                eta_k: 0.0,
                elapsed: solver_time.as_secs_f64(),
            });
        }
        if out_of_time {
            truncated = true;
            break;
        }
    }

    let final_xbar = if averaged { avg.xbar } else { x.clone() };
    Ok(RunHistory {
        solver: kind,
        records,
        final_xbar,
        final_last: x,
        params: ScheduleParams {
            gamma0: opts.step.at(0),
            ..ScheduleParams::default()
        },
        iterations: done,
        truncated,
        log: None,
    })
}

/// Estimated gradient Lipschitz constant of the averaged objective
/// `F = (1/m) Σ f_i`: a few power-iteration steps on finite gradient
/// differences from each of `samples` random points in the box, keeping the
/// largest ratio `‖∇F(x + hd) − ∇F(x)‖ / h`.
pub fn estimate_smoothness(problem: &ProblemSpec, samples: usize, seed: u64) -> Result<f64> {
    const POWER_STEPS: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.dim();
    let m = problem.agents() as f64;
    let grad = |x: &[f64]| -> Result<Vec<f64>> {
        let mut g = vec![0.0; n];
        for i in 0..problem.agents() {
            problem.add_f_subgradient(i, x, 1.0 / m, &mut g)?;
        }
        Ok(g)
    };
    let mut best = 0.0_f64;
    for _ in 0..samples.max(1) {
        let x = problem.box_set().sample(&mut rng);
        let gx = grad(&x)?;
        let h = 1e-3 * (1.0 + norm_inf(&x));
        let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..POWER_STEPS {
            let len = crate::linalg::norm(&d);
            if len == 0.0 {
                break;
            }
            let mut y = x.clone();
            axpy(h / len, &d, &mut y);
            let gy = grad(&y)?;
            let ratio = dist(&gy, &gx) / h;
            best = best.max(ratio);
            d = gy.iter().zip(&gx).map(|(a, b)| a - b).collect();
        }
    }
    Ok(best)
}

/// Candidate constant stepsizes `{1, 0.1, 0.01} / L`.
pub fn stepsize_grid(smoothness: f64) -> [f64; 3] {
    let l = smoothness.max(1e-6);
    [1.0 / l, 0.1 / l, 0.01 / l]
}

/// Default pilot length for [`tune_constant_step`].
pub const PILOT_PASSES: u64 = 5;

/// Picks the grid stepsize whose pilot run of `pilot_passes` passes ends at
/// the lowest objective (at the reported iterate). A candidate is rejected
/// when its pilot fails or its final objective is above the best value it
/// reached earlier, which catches slowly diverging stepsizes.
pub fn tune_constant_step(
    kind: SolverKind,
    problem: &ProblemSpec,
    feasible: &PolyhedralSet,
    x0: &[f64],
    pilot_passes: u64,
    seed: u64,
) -> Result<f64> {
    let l = estimate_smoothness(problem, 64, seed)?;
    let mut best: Option<(f64, f64)> = None;
    for gamma in stepsize_grid(l) {
        let opts = BaselineOptions::new(
            RunOptions::iterations(pilot_passes.max(1)),
            BaselineStep::Constant(gamma),
        )
        .with_seed(seed);
        let Ok(h) = run_baseline(kind, problem, feasible, x0, &opts) else {
            debug!("{kind}: pilot with γ = {gamma:.3e} failed");
            continue;
        };
        let lowest = h.records.iter().map(|r| r.f_bar).fold(f64::INFINITY, f64::min);
        let f = h.last().map_or(f64::NAN, |r| r.f_bar);
        debug!("{kind}: pilot γ = {gamma:.3e} ends at f = {f:.6e} (lowest {lowest:.6e})");
        let stable = f.is_finite() && f <= lowest + 1e-12 * (1.0 + lowest.abs());
        if stable && best.is_none_or(|(bf, _)| f < bf) {
            best = Some((f, gamma));
        }
    }
    best.map(|(_, g)| g)
        .ok_or_else(|| Error::InvalidParameter(format!("no stable stepsize found for {kind}")))
}

/// Largest of the (relative) inequality and equality violations of `x`.
pub fn feasibility_gap(feasible: &PolyhedralSet, x: &[f64]) -> f64 {
    let (ineq, eq) = feasible.violation(x);
    norm_inf(&[ineq, eq])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{AgentBlock, BoxSet, Oracle, PhiMode};

    fn quad(a: f64, center: f64) -> Oracle {
        // a/2 (x − center)² = ½ a x² − a·center x + const
        Oracle::Quadratic {
            q: vec![vec![a]],
            c: vec![-a * center],
            d: 0.5 * a * center * center,
        }
    }

    fn problem_1d(fs: Vec<Oracle>) -> ProblemSpec {
        let blocks = fs
            .into_iter()
            .map(|f| AgentBlock::unconstrained_eq(f, Oracle::Constant { value: -1.0 }))
            .collect();
        ProblemSpec::new(blocks, BoxSet::cube(1, 10.0).unwrap(), vec![], PhiMode::Hinge).unwrap()
    }

    #[test]
    fn projected_ig_hand_step() {
        // min (x − 2)² s.t. x ≤ 1, x0 = 0, γ = 0.25: P(0 + 0.25·4) = 1
        let p = problem_1d(vec![quad(2.0, 2.0)]);
        let set = PolyhedralSet::inequalities(1, vec![vec![1.0]], vec![1.0]).unwrap();
        let mut solver = QpSolver::projection(set, 1e-10).unwrap();
        let x = step_projected_ig(&p, &[0.0], 0.25, &mut solver).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_objective_leaves_point() {
        let p = problem_1d(vec![Oracle::zero(), Oracle::zero()]);
        let set = PolyhedralSet::unconstrained(1);
        let mut solver = QpSolver::projection(set.clone(), 1e-10).unwrap();
        assert_eq!(step_projected_ig(&p, &[0.3], 0.5, &mut solver).unwrap(), vec![0.3]);
        for kind in [SolverKind::ProjIg, SolverKind::ProxIag, SolverKind::Saga] {
            let opts = BaselineOptions::new(RunOptions::iterations(3), BaselineStep::Constant(0.5));
            let h = run_baseline(kind, &p, &set, &[0.3], &opts).unwrap();
            assert_eq!(h.final_xbar, vec![0.3], "{kind}");
        }
    }

    #[test]
    fn prox_iag_warm_table_at_optimum() {
        let p = problem_1d(vec![quad(2.0, 1.0), quad(2.0, -1.0)]);
        let mut table = GradientTable::at(&p, &[0.0]).unwrap();
        assert_eq!(table.sum(), &[0.0]);
        let mut solver = QpSolver::projection(PolyhedralSet::unconstrained(1), 1e-10).unwrap();
        let x = step_prox_iag(&p, &mut table, &[0.0], 0.3, &mut solver, 0).unwrap();
        assert_eq!(x, vec![0.0]);
    }

    #[test]
    fn prox_iag_single_agent_is_projected_gradient() {
        let p = problem_1d(vec![quad(1.0, 3.0)]);
        let mut table = GradientTable::empty(1, 1);
        let set = PolyhedralSet::inequalities(1, vec![vec![1.0]], vec![2.0]).unwrap();
        let mut solver = QpSolver::projection(set, 1e-10).unwrap();
        let x = step_prox_iag(&p, &mut table, &[0.0], 0.5, &mut solver, 0).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-12);
        let x = step_prox_iag(&p, &mut table, &x, 0.5, &mut solver, 0).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn saga_single_agent_uses_fresh_gradient() {
        let p = problem_1d(vec![quad(1.0, 3.0)]);
        let table = GradientTable::at(&p, &[5.0]).unwrap();
        let d = saga_direction(&p, &table, &[1.0], 0).unwrap();
        assert_eq!(d, vec![-2.0]);
    }

    #[test]
    fn table_sum_tracks_entries() {
        let mut t = GradientTable::empty(3, 2);
        for k in 0..500 {
            let g = vec![(k as f64 * 0.37).sin() * 1e3, (k as f64).cos() * 1e-3];
            t.replace(k % 3, g);
            assert!(t.drift() <= 1e-9);
        }
    }

    #[test]
    fn saga_runs_are_reproducible() {
        let p = problem_1d(vec![quad(1.0, 1.0), quad(3.0, -2.0), quad(0.5, 4.0)]);
        let set = PolyhedralSet::inequalities(1, vec![vec![1.0]], vec![0.5]).unwrap();
        let opts = BaselineOptions::new(RunOptions::iterations(30), BaselineStep::Constant(0.1)).with_seed(9);
        let a = run_baseline(SolverKind::Saga, &p, &set, &[0.0], &opts).unwrap();
        let b = run_baseline(SolverKind::Saga, &p, &set, &[0.0], &opts).unwrap();
        let strip = |h: &RunHistory| h.records.iter().map(|r| (r.f_bar, r.f_last)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn airig_is_not_a_baseline() {
        let p = problem_1d(vec![Oracle::zero()]);
        let opts = BaselineOptions::new(RunOptions::iterations(1), BaselineStep::Constant(1.0));
        assert!(run_baseline(SolverKind::Airig, &p, &PolyhedralSet::unconstrained(1), &[0.0], &opts).is_err());
    }

    #[test]
    fn smoothness_of_quadratic() {
        let p = problem_1d(vec![quad(2.0, 0.0), quad(4.0, 1.0)]);
        let l = estimate_smoothness(&p, 20, 1).unwrap();
        assert!((l - 3.0).abs() < 1e-9, "{l}");
        assert_eq!(stepsize_grid(2.0), [0.5, 0.05, 0.005]);
    }
}
