//! A benchmark suite driven by a config value, the same thing `airig run`
//! does from a JSON file: all four solvers on a reduced SVM preset, traces
//! written as CSV plus a `summary.json`.
//!
//! ```text
//! cargo run --release --example suite -- [out_dir]
//! ```

use airig::report::{run_suite, SuiteConfig};

fn main() -> airig::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "out/suite-example".into());
    let config = SuiteConfig {
        samples: Some(40),
        features: Some(5),
        iterations: 2_000,
        eval_every: 10,
        window_fraction: 1.0,
        workers: 4,
        out_dir: out_dir.into(),
        ..SuiteConfig::default()
    };
    let outcome = run_suite(&config)?;
    let s = &outcome.summary;
    println!("f* = {:.6}, dim = {}, summary at {}", s.f_star, s.dim, outcome.summary_path.display());
    for run in &s.runs {
        let rates = run
            .rates
            .map(|r| format!("slope f {:.2}, slope φ {:.2}", r.slope_f, r.slope_phi))
            .unwrap_or_else(|| run.rate_error.clone().unwrap_or_default());
        println!(
            "{:>9}  f - f* = {:.3e}  φ = {:.1e}  {}",
            run.solver.name(),
            run.suboptimality,
            run.infeasibility,
            rates
        );
    }
    for e in &s.errors {
        eprintln!("error: {e}");
    }
    Ok(())
}
