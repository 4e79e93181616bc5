use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ProblemSpec;
use crate::error::Result;
use crate::linalg::norm;

/// Safety factor applied to every sampled maximum.
pub const SAFETY_FACTOR: f64 = 1.25;
/// Floor keeping the rate-bound formulas well defined for degenerate problems.
pub const BOUND_FLOOR: f64 = 1e-12;
/// Box corners are enumerated up to this dimension.
pub const MAX_CORNER_DIM: usize = 12;

/// Constants bounding subgradients, iterates and the objective over `X`.
///
/// `c` bounds `Σ_i ‖∇̃φ_i‖` and `m · max_i ‖∇̃φ_i‖`, `c_f` does the same for
/// the `f_i`, `radius` bounds `‖x‖` and `f_abs` bounds `|f(x)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimates {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_f")]
    pub c_f: f64,
    #[serde(rename = "M")]
    pub radius: f64,
    #[serde(rename = "M_f")]
    pub f_abs: f64,
}

/// Sampled estimates of the bound constants.
///
/// Points are drawn uniformly from the box (plus every corner when
/// `n ≤ 12`, and always the corner farthest from the origin). Each constant
/// is the sampled maximum times [`SAFETY_FACTOR`], floored at
/// [`BOUND_FLOOR`]. The result is deterministic in `seed`.
pub fn estimate_bounds(problem: &ProblemSpec, samples: usize, seed: u64) -> Result<BoundEstimates> {
    let n = problem.dim();
    let m = problem.agents() as f64;
    let bx = problem.box_set();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points: Vec<Vec<f64>> = (0..samples.max(1)).map(|_| bx.sample(&mut rng)).collect();
    points.push(bx.farthest_corner());
    if n <= MAX_CORNER_DIM {
        points.extend((0..1u64 << n).map(|mask| bx.corner(mask)));
    }

    let mut c = 0.0_f64;
    let mut c_f = 0.0_f64;
    let mut radius = 0.0_f64;
    let mut f_abs = 0.0_f64;
    let mut grad = vec![0.0; n];
    for x in &points {
        let (mut phi_sum, mut phi_max, mut f_sum, mut f_max) = (0.0, 0.0_f64, 0.0, 0.0_f64);
        let mut fx = 0.0;
        for i in 0..problem.agents() {
            grad.fill(0.0);
            problem.add_phi_subgradient(i, x, 1.0, &mut grad)?;
            let g = norm(&grad);
            phi_sum += g;
            phi_max = phi_max.max(g);

            grad.fill(0.0);
            fx += problem.add_f_subgradient(i, x, 1.0, &mut grad)?;
            let g = norm(&grad);
            f_sum += g;
            f_max = f_max.max(g);
        }
        c = c.max(phi_sum).max(m * phi_max);
        c_f = c_f.max(f_sum).max(m * f_max);
        radius = radius.max(norm(x));
        f_abs = f_abs.max(fx.abs());
    }

    let finish = |v: f64| (SAFETY_FACTOR * v).max(BOUND_FLOOR);
    Ok(BoundEstimates {
        c: finish(c),
        c_f: finish(c_f),
        radius: finish(radius),
        f_abs: finish(f_abs),
    })
}
