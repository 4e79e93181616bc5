//! aIR-IG with user-supplied oracles and nonlinear constraints: three agents
//! minimise `Σ ‖x − aᵢ‖₁` over the intersection of three unit disks, one disk
//! per agent. No projection onto the disks is ever computed; only the box is.
//!
//! Both infeasibility penalties are shown: `Hinge` (`max(0, h)`) and
//! `Product` (`½ max(0, h)²`).
//!
//! ```text
//! cargo run --release --example custom_oracles
//! ```

use airig::airig::{run_airig, RunOptions};
use airig::{AgentBlock, BoxSet, Oracle, PhiMode, ProblemSpec, ScheduleParams};

fn l1_distance(a: [f64; 2]) -> Oracle {
    Oracle::custom(move |x| {
        let value = (x[0] - a[0]).abs() + (x[1] - a[1]).abs();
        let sign = |t: f64| if t > 0.0 { 1.0 } else if t < 0.0 { -1.0 } else { 0.0 };
        Ok((value, vec![sign(x[0] - a[0]), sign(x[1] - a[1])]))
    })
}

fn outside_disk(c: [f64; 2]) -> Oracle {
    Oracle::custom(move |x| {
        let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
        Ok((dx * dx + dy * dy - 1.0, vec![2.0 * dx, 2.0 * dy]))
    })
}

fn main() -> airig::Result<()> {
    let targets = [[3.0, 0.0], [0.0, 3.0], [3.0, 3.0]];
    let centers = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]];
    for mode in [PhiMode::Hinge, PhiMode::Product] {
        let blocks = targets
            .iter()
            .zip(&centers)
            .map(|(&a, &c)| AgentBlock::unconstrained_eq(l1_distance(a), outside_disk(c)))
            .collect();
        let problem = ProblemSpec::new(blocks, BoxSet::cube(2, 3.0)?, vec![], mode)?;
        let h = run_airig(
            &problem,
            &ScheduleParams::default(),
            &[0.0, 0.0],
            &RunOptions::iterations(50_000).with_eval_every(50_000),
        )?;
        let last = h.last().expect("records");
        let x = &h.final_xbar;
        let worst = centers
            .iter()
            .map(|c| (x[0] - c[0]).hypot(x[1] - c[1]) - 1.0)
            .fold(f64::MIN, f64::max);
        println!(
            "{mode:?}: x̄ = [{:.4}, {:.4}]  f(x̄) = {:.4}  φ(x̄) = {:.2e}  max disk overshoot {:.2e}",
            x[0], x[1], last.f_bar, last.phi_bar, worst
        );
    }
    Ok(())
}
