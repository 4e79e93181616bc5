//! Projected IG, proximal IAG and SAGA on a small SVM instance.
//!
//! Every baseline projects onto the full polyhedral feasible set each step,
//! so the example also reports how many QP solves that took. The constant
//! stepsizes of IAG and SAGA are picked from `{1, 0.1, 0.01}/L` by short
//! pilot runs.
//!
//! ```text
//! cargo run --release --example baselines -- [passes]
//! ```

use airig::airig::RunOptions;
use airig::baselines::{run_baseline, tune_constant_step, BaselineOptions, BaselineStep, PILOT_PASSES};
use airig::history::SolverKind;
use airig::qp::solve_calls_on_current_thread;
use airig::svm::{reference_optimum, SvmPreset};

fn main() -> airig::Result<()> {
    let passes: u64 = std::env::args().nth(1).map_or(200, |s| s.parse().expect("passes"));
    let preset = SvmPreset::paper_fig1().scaled(40, 5);
    let inst = preset.build()?;
    let (_, f_star) = reference_optimum(&inst, 1e-9)?;
    let x0 = vec![0.0; inst.dim()];
    println!("dim = {}, agents = {}, f* = {f_star:.6}", inst.dim(), preset.agents);

    for kind in [SolverKind::ProjIg, SolverKind::ProxIag, SolverKind::Saga] {
        let step = match kind {
            SolverKind::ProjIg => BaselineStep::Diminishing { gamma0: preset.params.gamma0 },
            _ => BaselineStep::Constant(tune_constant_step(
                kind,
                &inst.problem,
                &inst.polyhedron,
                &x0,
                PILOT_PASSES,
                0,
            )?),
        };
        let opts = BaselineOptions::new(RunOptions::iterations(passes).with_eval_every(passes / 4), step);
        let calls = solve_calls_on_current_thread();
        let h = run_baseline(kind, &inst.problem, &inst.polyhedron, &x0, &opts)?;
        let last = h.last().expect("records");
        println!(
            "{:>9}  step {:?}  f - f* = {:.3e}  phi = {:.1e}  QP solves {}",
            kind.name(),
            step,
            last.f_bar - f_star,
            last.phi_bar,
            solve_calls_on_current_thread() - calls
        );
    }
    Ok(())
}
