//! aIR-IG against the projection-based baselines on the SVM benchmark, with
//! an equal wall-clock budget per method.
//!
//! ```text
//! cargo run --release --example svm_benchmark -- [budget_s] [samples] [features]
//! ```

use std::time::{Duration, Instant};

use airig::airig::{run_airig, RunOptions};
use airig::baselines::{run_baseline, tune_constant_step, BaselineOptions, BaselineStep, PILOT_PASSES};
use airig::history::SolverKind;
use airig::svm::{reference_optimum, SvmPreset};

fn main() -> airig::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let budget: f64 = args.first().map_or(5.0, |s| s.parse().expect("budget_s"));
    let samples: usize = args.get(1).map_or(100, |s| s.parse().expect("samples"));
    let features: usize = args.get(2).map_or(50, |s| s.parse().expect("features"));

    let preset = SvmPreset::paper_fig1().scaled(samples, features);
    let inst = preset.build()?;
    let t = Instant::now();
    let (_, f_star) = reference_optimum(&inst, 1e-8)?;
    println!(
        "N = {samples}, n = {features}, dim = {}, f* = {f_star:.8} (reference solve {:.2}s)",
        inst.dim(),
        t.elapsed().as_secs_f64()
    );

    let x0 = vec![0.0; inst.dim()];
    let opts = RunOptions::iterations(u64::MAX)
        .with_budget(Duration::from_secs_f64(budget))
        .with_eval_every(100);
    println!("{:>9} {:>10} {:>12} {:>12}", "solver", "passes", "f - f*", "phi");
    for kind in SolverKind::ALL {
        let h = match kind {
            SolverKind::Airig => run_airig(&inst.problem, &preset.params, &x0, &opts)?,
            _ => {
                let step = if kind == SolverKind::ProjIg {
                    BaselineStep::Diminishing { gamma0: preset.params.gamma0 }
                } else {
                    BaselineStep::Constant(tune_constant_step(kind, &inst.problem, &inst.polyhedron, &x0, PILOT_PASSES, 0)?)
                };
                let opts = BaselineOptions::new(opts.clone().with_eval_every(1), step);
                run_baseline(kind, &inst.problem, &inst.polyhedron, &x0, &opts)?
            }
        };
        let last = h.last().expect("at least one record");
        println!(
            "{:>9} {:>10} {:>12.4e} {:>12.4e}",
            kind.name(),
            h.iterations,
            last.f_bar - f_star,
            last.phi_bar
        );
    }
    Ok(())
}
