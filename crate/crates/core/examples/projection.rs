//! Euclidean projection onto a polyhedron `{Cx ≤ d, Ex = g}` and a general
//! strictly convex QP over the same set, with warm starts between nearby
//! points.
//!
//! ```text
//! cargo run --release --example projection
//! ```

use airig::qp::solve_qp;
use airig::{PolyhedralSet, QpSolver};

fn main() -> airig::Result<()> {
    // The simplex {x ≥ 0, Σx = 1} in R³.
    let set = PolyhedralSet::new(
        3,
        vec![vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]],
        vec![0.0, 0.0, 0.0],
        vec![vec![1.0, 1.0, 1.0]],
        vec![1.0],
    )?;

    let mut solver = QpSolver::projection(set.clone(), 1e-10)?;
    for z in [[0.9, 0.4, -0.3], [0.92, 0.41, -0.3], [2.0, -1.0, 0.5]] {
        let p = solver.project(&z).map_err(airig::Error::from)?;
        println!(
            "P({z:?}) = [{:.4}, {:.4}, {:.4}]  active {:?}  sweeps {}  kkt {:.1e}",
            p.x[0], p.x[1], p.x[2], p.active_set, p.iterations, p.kkt_residual
        );
    }

    // min ½xᵀQx + cᵀx over the simplex with an anisotropic Q.
    let q = vec![vec![4.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]];
    let sol = solve_qp(&q, &[-1.0, -1.0, 0.0], &set, 1e-10)?;
    println!(
        "QP minimiser [{:.4}, {:.4}, {:.4}]  equality multiplier {:.4}",
        sol.x[0], sol.x[1], sol.x[2], sol.eq_multipliers[0]
    );
    Ok(())
}
