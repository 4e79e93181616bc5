//! Shared test support: an exhaustive active-set projection oracle and random
//! problem generators.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use airig::{AgentBlock, BoxSet, Oracle, PhiMode, PolyhedralSet, ProblemSpec};

/// Projection of `z` onto `{Cx ≤ d, Ex = g}` by enumerating every subset of
/// inequality rows treated as equalities.
///
/// Each subset gives the projection onto an affine subspace; the true
/// projection is the closest of those candidates that lie in the polyhedron,
/// since the optimal active set produces it and no feasible point is closer.
pub fn brute_force_projection(set: &PolyhedralSet, z: &[f64]) -> Option<Vec<f64>> {
    let n = set.dim();
    let q = set.inequality_rows();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << q) {
        let mut rows: Vec<&Vec<f64>> = set.e().iter().collect();
        let mut rhs: Vec<f64> = set.g().to_vec();
        for i in 0..q {
            if mask & (1 << i) != 0 {
                rows.push(&set.c()[i]);
                rhs.push(set.d()[i]);
            }
        }
        let Some(x) = affine_projection(n, &rows, &rhs, z) else {
            continue;
        };
        if !set.contains(&x, 1e-9) {
            continue;
        }
        let d: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.map(|(_, x)| x)
}

/// Projection onto `{Mx = r}`: `z − δ` with `δ` the minimum-norm solution of
/// `Mδ = Mz − r`, via the SVD of `M` itself so that nearly parallel rows do
/// not lose precision. `None` when the system is inconsistent.
fn affine_projection(n: usize, rows: &[&Vec<f64>], rhs: &[f64], z: &[f64]) -> Option<Vec<f64>> {
    let zv = DVector::from_column_slice(z);
    if rows.is_empty() {
        return Some(z.to_vec());
    }
    let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let r = DVector::from_column_slice(rhs);
    let delta = m.clone().svd(true, true).solve(&(&m * &zv - &r), 1e-12).ok()?;
    let x = &zv - delta;
    let resid = (&m * &x - &r).amax();
    (resid <= 1e-9 * (1.0 + r.amax())).then(|| x.as_slice().to_vec())
}

pub fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Nonempty polyhedron in `R^n` (`n ≤ 4`) with at most 6 rows, some of them
/// possibly equalities, built around a random interior point.
pub fn random_polyhedron<R: Rng>(rng: &mut R) -> PolyhedralSet {
    let n = rng.random_range(1..=4);
    let rows = rng.random_range(1..=6);
    let eqs = rng.random_range(0..=rows.min(n - 1).min(2));
    let center = normal_vec(rng, n);
    let mut c = Vec::new();
    let mut d = Vec::new();
    let mut e = Vec::new();
    let mut g = Vec::new();
    for i in 0..rows {
        let row = normal_vec(rng, n);
        let at = row.iter().zip(&center).map(|(a, b)| a * b).sum::<f64>();
        if i < eqs {
            e.push(row);
            g.push(at);
        } else {
            c.push(row);
            d.push(at + rng.random_range(0.0..1.0));
        }
    }
    PolyhedralSet::new(n, c, d, e, g).unwrap()
}

pub fn affine(c: Vec<f64>, d: f64) -> Oracle {
    Oracle::Affine { c, d }
}

pub fn quadratic(q: Vec<Vec<f64>>, c: Vec<f64>) -> Oracle {
    Oracle::Quadratic { q, c, d: 0.0 }
}

/// Random small problem: `m` agents with convex quadratic `f_i`, max-affine
/// `h_i`, an occasional equality row, random `J` and a random box.
pub fn random_problem<R: Rng>(rng: &mut R) -> ProblemSpec {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=5);
    let blocks = (0..m)
        .map(|_| {
            let b: Vec<f64> = normal_vec(rng, n);
            // Q = bbᵀ/n + 0.1 I
            let q = (0..n)
                .map(|i| (0..n).map(|j| b[i] * b[j] / n as f64 + if i == j { 0.1 } else { 0.0 }).collect())
                .collect();
            let f = quadratic(q, normal_vec(rng, n));
            let rows: Vec<Vec<f64>> = (0..rng.random_range(1..=3)).map(|_| normal_vec(rng, n)).collect();
            let offsets = normal_vec(rng, rows.len());
            let h = Oracle::HingeMax { rows, offsets };
            if rng.random_bool(0.3) {
                AgentBlock::new(f, h, vec![normal_vec(rng, n)], vec![rng.random_range(-0.5..0.5)]).unwrap()
            } else {
                AgentBlock::unconstrained_eq(f, h)
            }
        })
        .collect();
    let lower: Vec<f64> = (0..n).map(|_| -rng.random_range(0.5..2.0)).collect();
    let upper: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let nonneg = (0..n).filter(|_| rng.random_bool(0.3)).collect();
    let mode = if rng.random_bool(0.5) { PhiMode::Hinge } else { PhiMode::Product };
    ProblemSpec::new(blocks, BoxSet::new(lower, upper).unwrap(), nonneg, mode).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
