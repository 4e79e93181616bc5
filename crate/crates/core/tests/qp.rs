//! Projection and QP solver properties against the enumeration oracle and
//! the characterisation of Euclidean projections.

mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use airig::qp::{project_polyhedron, solve_qp, QpError};
use airig::{PolyhedralSet, QpSolver};
use common::{brute_force_projection, max_abs_diff, normal_vec, random_polyhedron};

const TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_matches_enumeration(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_polyhedron(&mut rng);
        let z: Vec<f64> = normal_vec(&mut rng, set.dim()).iter().map(|v| v * scale).collect();
        let p = project_polyhedron(&set, &z, TOL).unwrap();
        let oracle = brute_force_projection(&set, &z).unwrap();
        prop_assert!(max_abs_diff(&p.x, &oracle) <= 1e-6 * (1.0 + scale), "{:?} vs {:?}", p.x, oracle);
    }

    #[test]
    fn projection_is_firmly_characterised(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_polyhedron(&mut rng);
        let n = set.dim();
        let mut solver = QpSolver::projection(set.clone(), TOL).unwrap();
        let z1: Vec<f64> = normal_vec(&mut rng, n).iter().map(|v| 3.0 * v).collect();
        let z2: Vec<f64> = normal_vec(&mut rng, n).iter().map(|v| 3.0 * v).collect();
        let p1 = solver.project(&z1).unwrap().x;
        let p2 = solver.project(&z2).unwrap().x;

        // Feasible, idempotent, nonexpansive.
        prop_assert!(set.contains(&p1, 1e-7));
        let again = solver.project(&p1).unwrap().x;
        prop_assert!(max_abs_diff(&again, &p1) <= 1e-7);
        prop_assert!(norm(&sub(&p1, &p2)) <= norm(&sub(&z1, &z2)) + 1e-7);

        // Variational inequality ⟨z − P(z), y − P(z)⟩ ≤ 0 for feasible y.
        let lhs = dot(&sub(&z1, &p1), &sub(&p2, &p1));
        prop_assert!(lhs <= 1e-6 * (1.0 + norm(&z1)).powi(2), "{lhs}");
    }
}

#[test]
fn warm_start_repeats_without_sweeps() {
    let set = PolyhedralSet::inequalities(2, vec![vec![1.0, 1.0], vec![-1.0, 0.0]], vec![1.0, 0.0]).unwrap();
    let mut solver = QpSolver::projection(set, TOL).unwrap();
    let first = solver.project(&[2.0, 3.0]).unwrap();
    let second = solver.project(&[2.0, 3.0]).unwrap();
    assert_eq!(second.iterations, 0);
    assert_abs_diff_eq!(first.x[0], second.x[0], epsilon = 1e-12);
    assert_abs_diff_eq!(first.x[0] + first.x[1], 1.0, epsilon = 1e-9);
}

#[test]
fn empty_set_reports_infeasible() {
    // x ≤ 0 and x ≥ 1.
    let set = PolyhedralSet::inequalities(1, vec![vec![1.0], vec![-1.0]], vec![0.0, -1.0]).unwrap();
    let err = QpSolver::projection(set, TOL).unwrap().project(&[0.5]).unwrap_err();
    assert!(matches!(err, QpError::Infeasible { .. }), "{err:?}");
}

#[test]
fn semidefinite_objective_is_solved() {
    // min ½x₁² − x₂ over x₂ ≤ 2, x₁ ≥ 1: minimiser (1, 2).
    let set = PolyhedralSet::inequalities(2, vec![vec![0.0, 1.0], vec![-1.0, 0.0]], vec![2.0, -1.0]).unwrap();
    let q = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
    let sol = solve_qp(&q, &[0.0, -1.0], &set, TOL).unwrap();
    assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(sol.x[1], 2.0, epsilon = 1e-6);
}

#[test]
fn unbounded_semidefinite_objective_is_reported() {
    // min −x₂ over x₁ ≤ 0: unbounded in x₂.
    let set = PolyhedralSet::inequalities(2, vec![vec![1.0, 0.0]], vec![0.0]).unwrap();
    let q = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
    assert!(solve_qp(&q, &[0.0, -1.0], &set, TOL).is_err());
}
