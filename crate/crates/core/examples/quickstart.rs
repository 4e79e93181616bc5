//! Smallest end-to-end use of aIR-IG: two agents jointly minimise
//! `½‖x‖² − 2(x₁ + x₂)` over `x₁ + x₂ ≤ 1`, `x₁ − x₂ ≤ ½`, each agent owning
//! one constraint, with only the box `[-5, 5]²` ever projected onto.
//!
//! The optimum is `(½, ½)` with value `−1.75`.
//!
//! ```text
//! cargo run --release --example quickstart
//! ```

use airig::airig::{run_airig, RunOptions};
use airig::{AgentBlock, BoxSet, Oracle, PhiMode, ProblemSpec, ScheduleParams};

fn main() -> airig::Result<()> {
    let half_norm = || Oracle::Quadratic {
        q: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        c: vec![-1.0, -1.0],
        d: 0.0,
    };
    let hinge = |row: Vec<f64>, offset: f64| Oracle::HingeMax {
        rows: vec![row],
        offsets: vec![offset],
    };
    let blocks = vec![
        AgentBlock::unconstrained_eq(half_norm(), hinge(vec![1.0, 1.0], -1.0)),
        AgentBlock::unconstrained_eq(half_norm(), hinge(vec![1.0, -1.0], -0.5)),
    ];
    let problem = ProblemSpec::new(blocks, BoxSet::cube(2, 5.0)?, vec![], PhiMode::Hinge)?;

    let params = ScheduleParams::default();
    let opts = RunOptions::iterations(20_000).with_eval_every(2_000);
    let history = run_airig(&problem, &params, &[0.0, 0.0], &opts)?;

    println!("{:>7} {:>12} {:>12}", "k", "f(x̄) + 1.75", "φ(x̄)");
    for r in &history.records {
        println!("{:>7} {:>12.3e} {:>12.3e}", r.k, r.f_bar + 1.75, r.phi_bar);
    }
    Ok(())
}
