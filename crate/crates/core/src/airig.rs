//! Averaged iteratively regularized incremental gradient (aIR-IG).
//!
//! Each outer iteration `k` runs one cycle over the agents:
//!
//! ```text
//! x_{k,1}   = x_k
//! x_{k,i+1} = P_X( x_{k,i} − γ_k (∇̃φ_i(x_{k,i}) + η_k ∇̃f_i(x_{k,i})) )
//! x_{k+1}   = x_{k,m+1}
//! ```
//!
//! followed by the weighted average
//! `x̄_{k+1} = (S_k x̄_k + γ_{k+1}^r x_{k+1}) / S_{k+1}`, `S_{k+1} = S_k + γ_{k+1}^r`.
//! The only projection is onto the box `X`; the functional, equality and
//! sign constraints enter through `φ_i` and are met asymptotically.

use std::time::{Duration, Instant};

use log::warn;

use crate::error::{check_dim, Error, Result};
use crate::history::{IterRecord, IterateLog, RunHistory, SolverKind};
use crate::linalg::{axpy, dist};
use crate::problem::ProblemSpec;
use crate::schedules::ScheduleParams;

/// Weight accumulator `S_k = Σ_{t≤k} γ_t^r` and weighted average `x̄_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingState {
    pub weight_sum: f64,
    pub xbar: Vec<f64>,
}

impl AveragingState {
    /// `x̄_0 = x_0`, `S_0 = γ_0^r`.
    pub fn new(x0: Vec<f64>, gamma0: f64, r: f64) -> Self {
        AveragingState {
            weight_sum: gamma0.powf(r),
            xbar: x0,
        }
    }

    pub fn update(&mut self, x_next: &[f64], gamma_next: f64, r: f64) {
        let w = gamma_next.powf(r);
        let s_next = self.weight_sum + w;
        for (xb, xn) in self.xbar.iter_mut().zip(x_next) {
            *xb = (self.weight_sum * *xb + w * xn) / s_next;
        }
        self.weight_sum = s_next;
    }
}

/// `S' = S + γ^r`, `x̄' = (S x̄ + γ^r x_next) / S'`.
pub fn update_average(state: &AveragingState, x_next: &[f64], gamma_next: f64, r: f64) -> Result<AveragingState> {
    check_dim("update_average", state.xbar.len(), x_next.len())?;
    if !(state.weight_sum > 0.0) || !(gamma_next > 0.0) {
        return Err(Error::InvalidParameter(
            "averaging needs a positive weight sum and stepsize".into(),
        ));
    }
    let mut next = state.clone();
    next.update(x_next, gamma_next, r);
    Ok(next)
}

/// One pass over all agents in order, returning `x_{k,m+1}`.
pub fn cycle(problem: &ProblemSpec, x_k: &[f64], gamma_k: f64, eta_k: f64) -> Result<Vec<f64>> {
    check_dim("cycle", problem.dim(), x_k.len())?;
    if !(gamma_k > 0.0 && eta_k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cycle needs positive stepsize and regularization, got {gamma_k}, {eta_k}"
        )));
    }
    let mut x = x_k.to_vec();
    let mut dir = vec![0.0; x.len()];
    cycle_in_place(problem, &mut x, gamma_k, eta_k, &mut dir, None)?;
    Ok(x)
}

/// In-place cycle. When `drifts` is given it receives
/// `‖x_k − x_{k,i}‖` for `i = 1..=m+1`.
fn cycle_in_place(
    problem: &ProblemSpec,
    x: &mut [f64],
    gamma: f64,
    eta: f64,
    dir: &mut [f64],
    mut drifts: Option<&mut Vec<f64>>,
) -> Result<()> {
    let start = drifts.as_ref().map(|_| x.to_vec());
    if let Some(d) = drifts.as_deref_mut() {
        d.clear();
        d.push(0.0);
    }
    for i in 0..problem.agents() {
        dir.fill(0.0);
        problem.add_phi_subgradient(i, x, 1.0, dir)?;
        problem.add_f_subgradient(i, x, eta, dir)?;
        axpy(-gamma, dir, x);
        problem.box_set().project_in_place(x);
        if let (Some(d), Some(x0)) = (drifts.as_deref_mut(), start.as_ref()) {
            d.push(dist(x0, x));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Outer iterations `N`.
    pub iterations: u64,
    /// Wall-clock budget on solver time.
    pub budget: Option<Duration>,
    /// Record every `eval_every`-th iteration (the last one is always recorded).
    pub eval_every: u64,
    /// Keep all iterates, averages and per-cycle drifts.
    pub log_iterates: bool,
}

impl RunOptions {
    pub fn iterations(n: u64) -> Self {
        RunOptions {
            iterations: n,
            budget: None,
            eval_every: 1,
            log_iterates: false,
        }
    }

    pub fn with_budget(mut self, budget: Duration) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn with_eval_every(mut self, every: u64) -> Self {
        self.eval_every = every.max(1);
        self
    }

    pub fn with_logging(mut self) -> Self {
        self.log_iterates = true;
        self
    }

    pub(crate) fn should_record(&self, k: u64) -> bool {
        (k + 1).is_multiple_of(self.eval_every.max(1)) || k + 1 == self.iterations
    }
}

/// Runs `N` outer iterations from `x0`.
///
/// An `x0` outside the box is clamped onto it first. With a budget, the run
/// stops after the first iteration that exhausts it and the history is
/// flagged as truncated.
pub fn run_airig(
    problem: &ProblemSpec,
    params: &ScheduleParams,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<RunHistory> {
    params.validate()?;
    check_dim("x0", problem.dim(), x0.len())?;
    if opts.iterations == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let mut x = x0.to_vec();
    if !problem.box_set().contains(&x) {
        warn!("initial point lies outside X; projecting it onto the box");
        problem.box_set().project_in_place(&mut x);
    }

    let mut avg = AveragingState::new(x.clone(), params.gamma(0), params.r);
    let mut dir = vec![0.0; x.len()];
    let mut drift = Vec::new();
    let mut log = opts.log_iterates.then(|| IterateLog {
        iterates: vec![x.clone()],
        averages: vec![avg.xbar.clone()],
        drifts: Vec::new(),
    });
    let mut records = Vec::new();
    let mut solver_time = Duration::ZERO;
    let mut truncated = false;
    let mut done = 0;

    for k in 0..opts.iterations {
        let gamma = params.gamma(k);
        let eta = params.eta(k);
        let t0 = Instant::now();
        cycle_in_place(
            problem,
            &mut x,
            gamma,
            eta,
            &mut dir,
            log.as_ref().map(|_| &mut drift),
        )?;
        avg.update(&x, params.gamma(k + 1), params.r);
        solver_time += t0.elapsed();
        done = k + 1;

        if let Some(l) = log.as_mut() {
            l.iterates.push(x.clone());
            l.averages.push(avg.xbar.clone());
            l.drifts.push((gamma, eta, drift.clone()));
        }
        let out_of_time = opts.budget.is_some_and(|b| solver_time >= b) && done < opts.iterations;
        if opts.should_record(k) || out_of_time {
            records.push(IterRecord {
                k,
                f_bar: problem.eval_f(&avg.xbar)?,
                phi_bar: problem.eval_phi(&avg.xbar)?,
                f_last: problem.eval_f(&x)?,
                phi_last: problem.eval_phi(&x)?,
                gamma_k: gamma,
                eta_k: eta,
                elapsed: solver_time.as_secs_f64(),
            });
        }
        if out_of_time {
            truncated = true;
            break;
        }
    }

    Ok(RunHistory {
        solver: SolverKind::Airig,
        records,
        final_xbar: avg.xbar,
        final_last: x,
        params: *params,
        iterations: done,
        truncated,
        log,
    })
}
