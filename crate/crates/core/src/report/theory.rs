//! Closed-form suboptimality and infeasibility bounds for the averaged
//! iterate under `γ_k = γ0/√(1+k)`, `η_k = η0/(1+k)^b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::IterRecord;
use crate::problem::BoundEstimates;
use crate::schedules::{harmonic_threshold, ScheduleParams};

/// Everything the bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsContext {
    pub bounds: BoundEstimates,
    pub params: ScheduleParams,
    pub agents: usize,
}

impl BoundsContext {
    pub fn new(bounds: BoundEstimates, params: ScheduleParams, agents: usize) -> Result<Self> {
        params.validate()?;
        if agents == 0 {
            return Err(Error::InvalidParameter("need at least one agent".into()));
        }
        Ok(BoundsContext { bounds, params, agents })
    }

    /// Smallest `N` the bounds hold for: `N ≥ 2^{2/(1−r)} − 1`.
    pub fn threshold(&self) -> u64 {
        // 2/(1−r) = 1/(1−α) with α = (1+r)/2
        harmonic_threshold(0.5 * (1.0 + self.params.r))
    }

    fn check_n(&self, n: u64) -> Result<()> {
        let min = self.threshold();
        if n < min {
            return Err(Error::InvalidParameter(format!(
                "rate bounds need N >= {min} for r = {}, got {n}",
                self.params.r
            )));
        }
        Ok(())
    }

    fn spread(&self) -> f64 {
        let m = self.agents as f64;
        (m + 1.0) / m * (self.bounds.c + self.params.eta0 * self.bounds.c_f).powi(2)
    }

    /// Upper bound on `f(x̄_N) − f*`, decaying like `N^{−(0.5−b)}`.
    pub fn suboptimality(&self, n: u64) -> Result<f64> {
        self.check_n(n)?;
        let ScheduleParams { gamma0, eta0, b, r } = self.params;
        let big_m = self.bounds.radius;
        let lead = (2.0 - r) / (gamma0.powf(r) * ((n + 1) as f64).powf(0.5 - b));
        let first = 2.0 * big_m * big_m / (eta0 * gamma0.powf(1.0 - r));
        let second = gamma0.powf(1.0 + r) * self.spread() / (2.0 * eta0 * (0.5 - 0.5 * r + b));
        Ok(lead * (first + second))
    }

    /// Upper bound on `φ(x̄_N)`, decaying like `N^{−b}`.
    pub fn infeasibility(&self, n: u64) -> Result<f64> {
        self.check_n(n)?;
        let ScheduleParams { gamma0, eta0, b, r } = self.params;
        let big_m = self.bounds.radius;
        let lead = (2.0 - r) / ((n + 1) as f64).powf(b);
        let first = 2.0 * big_m * big_m / gamma0;
        let second = 2.0 * self.bounds.f_abs * eta0 / (1.0 - 0.5 * r - b);
        let third = self.spread() * gamma0 / (2.0 * (0.5 - 0.5 * r));
        Ok(lead * (first + second + third))
    }
}

/// A trace record exceeding one of the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundViolation {
    pub k: u64,
    pub metric: &'static str,
    pub value: f64,
    pub bound: f64,
}

/// Checks every record at or past the threshold against both bounds. Record
/// `k` holds `x̄_{k+1}`, so it is compared at `N = k + 1`.
pub fn check_bounds(records: &[IterRecord], f_star: f64, ctx: &BoundsContext) -> Result<Vec<BoundViolation>> {
    let mut out = Vec::new();
    for rec in records {
        let n = rec.k + 1;
        if n < ctx.threshold() {
            continue;
        }
        let sub = rec.f_bar - f_star;
        let bound = ctx.suboptimality(n)?;
        if !(sub <= bound) {
            out.push(BoundViolation {
                k: rec.k,
                metric: "suboptimality",
                value: sub,
                bound,
            });
        }
        let bound = ctx.infeasibility(n)?;
        if !(rec.phi_bar <= bound) {
            out.push(BoundViolation {
                k: rec.k,
                metric: "infeasibility",
                value: rec.phi_bar,
                bound,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(r: f64) -> BoundsContext {
        BoundsContext::new(
            BoundEstimates {
                c: 1.0,
                c_f: 1.0,
                radius: 1.0,
                f_abs: 1.0,
            },
            ScheduleParams::new(1.0, 1.0, 0.25, r).unwrap(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluated_bounds() {
        // r = 0, N = 3: (a) = 2/4^{0.25}·(2 + 2·4/(2·0.75)), (b) = 2/4^{0.25}·(2 + 2/0.75 + 2·4/(2·0.5))
        let c = ctx(0.0);
        let lead = 2.0 / 4f64.powf(0.25);
        assert!((c.suboptimality(3).unwrap() - lead * (2.0 + 8.0 / 1.5)).abs() < 1e-12);
        assert!((c.infeasibility(3).unwrap() - lead * (2.0 + 2.0 / 0.75 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn threshold_depends_on_r() {
        assert_eq!(ctx(0.0).threshold(), 3);
        assert_eq!(ctx(0.5).threshold(), 15);
        let err = ctx(0.5).suboptimality(14).unwrap_err().to_string();
        assert!(err.contains("N >= 15"), "{err}");
    }

    #[test]
    fn bounds_decay_at_their_rates() {
        let c = ctx(0.0);
        let ratio_a = c.suboptimality(1599).unwrap() / c.suboptimality(99).unwrap();
        let ratio_b = c.infeasibility(1599).unwrap() / c.infeasibility(99).unwrap();
        assert!((ratio_a - 16f64.powf(-0.25)).abs() < 1e-12);
        assert!((ratio_b - 16f64.powf(-0.25)).abs() < 1e-12);
    }
}
