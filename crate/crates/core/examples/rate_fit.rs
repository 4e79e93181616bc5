//! Runs aIR-IG, fits empirical decay exponents of suboptimality and
//! infeasibility, and checks the trace against the closed-form bounds built
//! from sampled bound constants.
//!
//! ```text
//! cargo run --release --example rate_fit -- [iterations]
//! ```

use airig::airig::{run_airig, RunOptions};
use airig::problem::estimate_bounds;
use airig::report::{fit_rates, BoundsContext};
use airig::svm::{reference_optimum, SvmPreset};

fn main() -> airig::Result<()> {
    let iterations: u64 = std::env::args().nth(1).map_or(20_000, |s| s.parse().expect("iterations"));
    let preset = SvmPreset::paper_fig1().scaled(100, 10);
    let inst = preset.build()?;
    let (_, f_star) = reference_optimum(&inst, 1e-9)?;

    let h = run_airig(
        &inst.problem,
        &preset.params,
        &vec![0.0; inst.dim()],
        &RunOptions::iterations(iterations).with_eval_every(10),
    )?;

    let estimates = estimate_bounds(&inst.problem, 256, 0)?;
    let ctx = BoundsContext::new(estimates, preset.params, preset.agents)?;
    println!("bound constants {estimates:?}, valid from N = {}", ctx.threshold());

    // φ(x̄) reaches exactly zero early on SVM instances, so fit the whole trace.
    let rates = fit_rates(&h.records, f_star, 1.0, Some(&ctx))?;
    println!(
        "slope f: {:.3} (r² {:.2}, {} zeros)   slope φ: {:.3} (r² {:.2}, {} zeros)",
        rates.slope_f, rates.r2_f, rates.excluded_f, rates.slope_phi, rates.r2_phi, rates.excluded_phi
    );
    println!(
        "theory: f ~ N^{:.2}, φ ~ N^{:.2}; bounds respected: f {:?}, φ {:?}",
        -0.5 + preset.params.b,
        -preset.params.b,
        rates.bound_check_f,
        rates.bound_check_phi
    );
    let n = iterations.max(ctx.threshold());
    println!(
        "at N = {n}: suboptimality bound {:.3e}, infeasibility bound {:.3e}",
        ctx.suboptimality(n)?,
        ctx.infeasibility(n)?
    );
    Ok(())
}
