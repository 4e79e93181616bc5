//! Command-line front end: `build`, `run`, `fit`, `bounds`.
//!
//! Precedence for every setting: built-in default < config file <
//! `AIRIG_OUT_DIR` (output directory only) < flag.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use airig::history::{read_csv_file, SolverKind};
use airig::problem::estimate_bounds;
use airig::report::{fit_rates, run_suite, BoundsContext, SuiteConfig, SuiteSummary};
use airig::svm::{build_instance_with, SvmDataset, SvmPreset};
use airig::{Error, Result, ScheduleParams};

#[derive(Parser)]
#[command(name = "airig", version, about = "Projection-free incremental gradient solver and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an SVM dataset and write the instance as a problem file.
    Build(BuildArgs),
    /// Run a solver suite and write traces plus summary.json.
    Run(SuiteArgs),
    /// Fit empirical decay exponents to a trace.
    Fit(FitArgs),
    /// Print the closed-form rate bounds for a configuration.
    Bounds(BoundsArgs),
}

/// Flags mirroring the suite config keys.
#[derive(Args)]
struct SuiteArgs {
    /// JSON suite config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    problem_file: Option<PathBuf>,
    #[arg(long)]
    f_star: Option<f64>,
    /// Comma-separated: airig,proj_ig,prox_iag,saga.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<String>>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    budget_s: Option<f64>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    baseline_gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window_fraction: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl SuiteArgs {
    fn resolve(&self) -> Result<SuiteConfig> {
        let mut c = match &self.config {
            Some(path) => SuiteConfig::load(path)?,
            None => SuiteConfig::default(),
        };
        c.apply_env();
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(samples, features, agents, lambda, data_seed, problem_file, f_star, budget_s, baseline_gamma);
        if let Some(v) = &self.preset {
            c.preset = v.clone();
        }
        if let Some(v) = self.iterations {
            c.iterations = v;
        }
        if let Some(v) = self.eval_every {
            c.eval_every = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.window_fraction {
            c.window_fraction = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        if let Some(list) = &self.solvers {
            c.solvers = list
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<SolverKind>())
                .collect::<Result<_>>()?;
        }
        if self.gamma0.is_some() || self.eta0.is_some() || self.b.is_some() || self.r.is_some() {
            let base = match c.params {
                Some(p) => p,
                None if c.problem_file.is_none() => c.resolved_preset()?.params,
                None => ScheduleParams::default(),
            };
            let p = ScheduleParams {
                gamma0: self.gamma0.unwrap_or(base.gamma0),
                eta0: self.eta0.unwrap_or(base.eta0),
                b: self.b.unwrap_or(base.b),
                r: self.r.unwrap_or(base.r),
            };
            p.validate()?;
            c.params = Some(p);
        }
        Ok(c)
    }
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, default_value = "paper-fig1")]
    preset: String,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
    /// Read samples from this CSV instead of generating them.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Also write the dataset as CSV.
    #[arg(long)]
    data_out: Option<PathBuf>,
    /// Problem file to write.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Trace CSV.
    trace: PathBuf,
    /// Optimal value; read from --summary when omitted.
    #[arg(long)]
    f_star: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    window_fraction: f64,
    /// Suite summary supplying f*, bound constants and the schedule.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Iteration counts `N` to evaluate at (defaults to the threshold and
    /// the configured iteration count).
    #[arg(long = "at", value_delimiter = ',')]
    at: Vec<u64>,
    #[arg(long, default_value_t = 256)]
    bound_samples: usize,
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn build(args: &BuildArgs) -> Result<()> {
    let mut preset = SvmPreset::by_name(&args.preset)?;
    preset.samples = args.samples.unwrap_or(preset.samples);
    preset.features = args.features.unwrap_or(preset.features);
    preset.agents = args.agents.unwrap_or(preset.agents);
    preset.lambda = args.lambda.unwrap_or(preset.lambda);
    preset.seed = args.data_seed.unwrap_or(preset.seed);
    let data = match &args.data {
        Some(path) => SvmDataset::load_csv(path)?,
        None => preset.dataset()?,
    };
    if let Some(path) = &args.data_out {
        data.save_csv(path)?;
    }
    let inst = build_instance_with(&data, preset.lambda, preset.agents, preset.box_radius, preset.fold)?;
    inst.to_file()?.save(&args.out)?;
    print_json(&json!({
        "out": args.out,
        "samples": data.samples(),
        "features": data.features(),
        "agents": inst.agents,
        "dim": inst.dim(),
    }))
}

fn run(args: &SuiteArgs) -> Result<bool> {
    let config = args.resolve()?;
    let outcome = run_suite(&config)?;
    for r in &outcome.summary.runs {
        eprintln!(
            "{:>8}: {} iterations, f − f* = {:.3e}, φ = {:.3e}",
            r.solver.name(),
            r.iterations,
            r.suboptimality,
            r.infeasibility
        );
    }
    for e in &outcome.summary.errors {
        eprintln!("error: {e}");
    }
    println!("{}", outcome.summary_path.display());
    Ok(outcome.success())
}

fn fit(args: &FitArgs) -> Result<()> {
    let records = read_csv_file(&args.trace)?;
    let summary: Option<SuiteSummary> = match &args.summary {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let f_star = args
        .f_star
        .or(summary.as_ref().map(|s| s.f_star))
        .ok_or_else(|| Error::InvalidParameter("need --f-star or --summary".into()))?;
    let ctx = summary
        .as_ref()
        .map(|s| BoundsContext::new(s.bounds, s.params, s.agents))
        .transpose()?;
    let report = fit_rates(&records, f_star, args.window_fraction, ctx.as_ref())?;
    print_json(&report)
}

fn bounds(args: &BoundsArgs) -> Result<()> {
    let config = args.suite.resolve()?;
    let (problem, params) = match &config.problem_file {
        Some(path) => (
            airig::problem::ProblemFile::load(path)?.to_problem()?,
            config.params.unwrap_or_default(),
        ),
        None => {
            let preset = config.resolved_preset()?;
            (preset.build()?.problem, preset.params)
        }
    };
    let estimates = estimate_bounds(&problem, args.bound_samples, config.seed)?;
    let ctx = BoundsContext::new(estimates, params, problem.agents())?;
    let points = if args.at.is_empty() {
        vec![ctx.threshold(), config.iterations.max(ctx.threshold())]
    } else {
        args.at.clone()
    };
    let rows = points
        .iter()
        .map(|&n| {
            Ok(json!({
                "N": n,
                "suboptimality": ctx.suboptimality(n)?,
                "infeasibility": ctx.infeasibility(n)?,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    print_json(&json!({
        "params": params,
        "agents": problem.agents(),
        "bounds": estimates,
        "threshold": ctx.threshold(),
        "rhs": rows,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Build(a) => build(a).map(|_| true),
        Command::Run(a) => run(a),
        Command::Fit(a) => fit(a).map(|_| true),
        Command::Bounds(a) => bounds(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
