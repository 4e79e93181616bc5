//! Benchmark suite: one problem, several solvers, traces plus a summary.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::fit::{fit_rates, RateReport};
use super::theory::BoundsContext;
use super::write_atomic;
use crate::airig::{run_airig, RunOptions};
use crate::baselines::{feasibility_gap, run_baseline, PILOT_PASSES, tune_constant_step, BaselineOptions, BaselineStep};
use crate::error::{Error, Result};
use crate::history::{IterRecord, RunHistory, SolverKind};
use crate::problem::ProblemFile;
use crate::problem::{estimate_bounds, BoundEstimates, Oracle, ProblemSpec};
use crate::qp::{solve_qp, PolyhedralSet, DEFAULT_TOL};
use crate::schedules::ScheduleParams;
use crate::svm::{reference_optimum, SvmPreset};

/// Environment variable overriding the suite's output directory.
pub const OUT_DIR_ENV: &str = "AIRIG_OUT_DIR";

/// Suite configuration. Every key has a default, so `{}` is a valid config
/// (the `paper-fig1` preset, all four solvers, 1000 iterations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Named SVM preset; ignored when `problem_file` is set.
    pub preset: String,
    pub samples: Option<usize>,
    pub features: Option<usize>,
    pub agents: Option<usize>,
    pub lambda: Option<f64>,
    pub data_seed: Option<u64>,
    /// Problem file to load instead of a preset.
    pub problem_file: Option<PathBuf>,
    /// Known optimal value; computed when absent.
    pub f_star: Option<f64>,
    pub solvers: Vec<SolverKind>,
    pub iterations: u64,
    /// Wall-clock budget per run, in seconds.
    pub budget_s: Option<f64>,
    pub eval_every: u64,
    /// aIR-IG schedule; defaults to the preset's.
    pub params: Option<ScheduleParams>,
    /// `γ0` of the diminishing projected-IG stepsize; defaults to `params.gamma0`.
    pub baseline_gamma0: Option<f64>,
    /// Constant stepsize for proximal IAG and SAGA; tuned when absent.
    pub baseline_gamma: Option<f64>,
    pub pilot_passes: u64,
    pub seed: u64,
    pub window_fraction: f64,
    pub bound_samples: usize,
    pub reference_tol: f64,
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            preset: "paper-fig1".into(),
            samples: None,
            features: None,
            agents: None,
            lambda: None,
            data_seed: None,
            problem_file: None,
            f_star: None,
            solvers: SolverKind::ALL.to_vec(),
            iterations: 1000,
            budget_s: None,
            eval_every: 1,
            params: None,
            baseline_gamma0: None,
            baseline_gamma: None,
            pilot_passes: PILOT_PASSES,
            seed: 0,
            window_fraction: 0.5,
            bound_samples: 256,
            reference_tol: DEFAULT_TOL,
            out_dir: PathBuf::from("out"),
            workers: 1,
        }
    }
}

impl SuiteConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Applies [`OUT_DIR_ENV`] if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.out_dir = PathBuf::from(dir);
        }
    }

    /// The preset with this config's overrides applied.
    pub fn resolved_preset(&self) -> Result<SvmPreset> {
        let mut p = SvmPreset::by_name(&self.preset)?;
        if let Some(v) = self.samples {
            p.samples = v;
        }
        if let Some(v) = self.features {
            p.features = v;
        }
        if let Some(v) = self.agents {
            p.agents = v;
        }
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        if let Some(v) = self.data_seed {
            p.seed = v;
        }
        if let Some(v) = self.params {
            p.params = v;
        }
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(Error::InvalidParameter("no solvers configured".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be positive".into()));
        }
        if let Some(b) = self.budget_s {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("budget_s must be positive, got {b}")));
            }
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "window_fraction must lie in (0, 1], got {}",
                self.window_fraction
            )));
        }
        Ok(())
    }
}

/// The problem a suite ran on, echoed for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum ProblemSource {
    Preset(SvmPreset),
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: SolverKind,
    /// Trace file name inside the output directory.
    pub trace: String,
    pub iterations: u64,
    pub truncated: bool,
    /// Last trace record; equals the trace's final row.
    pub last: IterRecord,
    pub suboptimality: f64,
    pub infeasibility: f64,
    /// Constraint violation of the reported iterate w.r.t. the polyhedron.
    pub polyhedron_violation: f64,
    /// Baseline stepsize actually used (`γ0` for the diminishing rule).
    pub stepsize: Option<f64>,
    pub rates: Option<RateReport>,
    pub rate_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub config: SuiteConfig,
    pub problem: ProblemSource,
    pub dim: usize,
    pub agents: usize,
    pub params: ScheduleParams,
    pub f_star: f64,
    pub bounds: BoundEstimates,
    pub runs: Vec<RunSummary>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub summary: SuiteSummary,
    pub summary_path: PathBuf,
}

impl SuiteOutcome {
    pub fn success(&self) -> bool {
        self.summary.errors.is_empty()
    }
}

struct Prepared {
    source: ProblemSource,
    problem: ProblemSpec,
    feasible: PolyhedralSet,
    params: ScheduleParams,
    f_star: f64,
}

/// `Σ_i f_i` as `½ xᵀQx + cᵀx` (up to a constant) when every `f_i` is
/// quadratic or simpler.
fn quadratic_objective(problem: &ProblemSpec) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = problem.dim();
    let mut q = vec![vec![0.0; n]; n];
    let mut c = vec![0.0; n];
    for b in problem.blocks() {
        match &b.f {
            Oracle::Constant { .. } => {}
            Oracle::Affine { c: ci, .. } => c.iter_mut().zip(ci).for_each(|(a, v)| *a += v),
            Oracle::Quadratic { q: qi, c: ci, .. } => {
                for (row, ri) in q.iter_mut().zip(qi) {
                    row.iter_mut().zip(ri).for_each(|(a, v)| *a += v);
                }
                c.iter_mut().zip(ci).for_each(|(a, v)| *a += v);
            }
            Oracle::SvmLocal {
                w_dim,
                w_weight,
                slack,
                slack_weight,
            } => {
                for (j, row) in q.iter_mut().enumerate().take(*w_dim) {
                    row[j] += w_weight;
                }
                for &j in slack {
                    c[j] += slack_weight;
                }
            }
            _ => return None,
        }
    }
    Some((q, c))
}

fn prepare(config: &SuiteConfig) -> Result<Prepared> {
    if let Some(path) = &config.problem_file {
        let file = ProblemFile::load(path)?;
        let problem = file.to_problem()?;
        let feasible = file.feasible_set(&problem)?;
        let f_star = match config.f_star {
            Some(v) => v,
            None => {
                let (q, c) = quadratic_objective(&problem).ok_or_else(|| {
                    Error::InvalidParameter("f_star must be given for non-quadratic objectives".into())
                })?;
                let sol = solve_qp(&q, &c, &feasible, config.reference_tol)?;
                problem.eval_f(&sol.x)?
            }
        };
        return Ok(Prepared {
            source: ProblemSource::File { path: path.clone() },
            problem,
            feasible,
            params: config.params.unwrap_or_default(),
            f_star,
        });
    }
    let preset = config.resolved_preset()?;
    let inst = preset.build()?;
    let f_star = match config.f_star {
        Some(v) => v,
        None => {
            let (x_star, f_star) = reference_optimum(&inst, config.reference_tol)?;
            let extent = x_star.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if extent >= preset.box_radius {
                warn!(
                    "reference optimum reaches ‖x*‖∞ = {extent:.3} against box radius {}; bounds may not apply",
                    preset.box_radius
                );
            }
            f_star
        }
    };
    Ok(Prepared {
        params: preset.params,
        source: ProblemSource::Preset(preset),
        problem: inst.problem,
        feasible: inst.polyhedron,
        f_star,
    })
}

fn run_one(
    kind: SolverKind,
    prep: &Prepared,
    config: &SuiteConfig,
) -> Result<(RunHistory, Option<f64>)> {
    let mut opts = RunOptions::iterations(config.iterations).with_eval_every(config.eval_every);
    if let Some(b) = config.budget_s {
        opts = opts.with_budget(Duration::from_secs_f64(b));
    }
    let x0 = vec![0.0; prep.problem.dim()];
    if kind == SolverKind::Airig {
        return Ok((run_airig(&prep.problem, &prep.params, &x0, &opts)?, None));
    }
    let step = match kind {
        SolverKind::ProjIg => BaselineStep::Diminishing {
            gamma0: config.baseline_gamma0.unwrap_or(prep.params.gamma0),
        },
        _ => BaselineStep::Constant(match config.baseline_gamma {
            Some(g) => g,
            None => tune_constant_step(kind, &prep.problem, &prep.feasible, &x0, config.pilot_passes, config.seed)?,
        }),
    };
    let gamma = match step {
        BaselineStep::Diminishing { gamma0 } => gamma0,
        BaselineStep::Constant(g) => g,
    };
    let h = run_baseline(
        kind,
        &prep.problem,
        &prep.feasible,
        &x0,
        &BaselineOptions::new(opts, step).with_seed(config.seed),
    )?;
    Ok((h, Some(gamma)))
}

fn summarize(
    kind: SolverKind,
    history: &RunHistory,
    stepsize: Option<f64>,
    prep: &Prepared,
    config: &SuiteConfig,
    bounds: &BoundsContext,
) -> Result<RunSummary> {
    let last = *history
        .last()
        .ok_or_else(|| Error::InvalidParameter(format!("{kind} produced no records")))?;
    let ctx = (kind == SolverKind::Airig).then_some(bounds);
    let (rates, rate_error) = match fit_rates(&history.records, prep.f_star, config.window_fraction, ctx) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(RunSummary {
        solver: kind,
        trace: format!("{}.csv", kind.name()),
        iterations: history.iterations,
        truncated: history.truncated,
        last,
        suboptimality: last.f_bar - prep.f_star,
        infeasibility: last.phi_bar,
        polyhedron_violation: feasibility_gap(&prep.feasible, &history.final_xbar),
        stepsize,
        rates,
        rate_error,
    })
}

/// Runs every configured solver, writing `<solver>.csv` traces and
/// `summary.json` into `config.out_dir`. A failing run is recorded in the
/// summary's error list and the remaining runs continue.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteOutcome> {
    config.validate()?;
    let prep = prepare(config)?;
    let estimates = estimate_bounds(&prep.problem, config.bound_samples, config.seed)?;
    let bounds = BoundsContext::new(estimates, prep.params, prep.problem.agents())?;
    info!(
        "suite: dim {}, {} agents, f* = {:.10e}",
        prep.problem.dim(),
        prep.problem.agents(),
        prep.f_star
    );

    let slots: Vec<Mutex<Option<Result<RunSummary>>>> = config.solvers.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    let work = || loop {
        let idx = {
            let mut n = next.lock().unwrap();
            let i = *n;
            *n += 1;
            i
        };
        let Some(&kind) = config.solvers.get(idx) else { break };
        info!("running {kind}");
        let result = run_one(kind, &prep, config).and_then(|(h, step)| {
            h.write_csv(config.out_dir.join(format!("{}.csv", kind.name())))?;
            summarize(kind, &h, step, &prep, config, &bounds)
        });
        *slots[idx].lock().unwrap() = Some(result);
    };
    let workers = config.workers.clamp(1, config.solvers.len());
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for (slot, kind) in slots.into_iter().zip(&config.solvers) {
        match slot.into_inner().unwrap() {
            Some(Ok(r)) => runs.push(r),
            Some(Err(e)) => errors.push(format!("{kind}: {e}")),
            None => errors.push(format!("{kind}: run did not complete")),
        }
    }
    let summary = SuiteSummary {
        config: config.clone(),
        problem: prep.source,
        dim: prep.problem.dim(),
        agents: prep.problem.agents(),
        params: prep.params,
        f_star: prep.f_star,
        bounds: estimates,
        runs,
        errors,
    };
    let summary_path = config.out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&summary_path, text.as_bytes())?;
    Ok(SuiteOutcome { summary, summary_path })
}

/// Loads a config file, applies [`OUT_DIR_ENV`] and runs it.
pub fn run_suite_file(path: impl AsRef<Path>) -> Result<SuiteOutcome> {
    let mut config = SuiteConfig::load(path)?;
    config.apply_env();
    run_suite(&config)
}
