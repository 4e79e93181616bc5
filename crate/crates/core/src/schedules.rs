//! Stepsize, regularization and averaging-weight sequences.
//!
//! `γ_k = γ0 / √(1+k)` and `η_k = η0 / (1+k)^b` with `0 < b < ½`; iterates are
//! averaged with weights `γ_k^r`, `0 ≤ r < 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub gamma0: f64,
    pub eta0: f64,
    pub b: f64,
    #[serde(default)]
    pub r: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            gamma0: 1.0,
            eta0: 1.0,
            b: 0.25,
            r: 0.0,
        }
    }
}

impl ScheduleParams {
    pub fn new(gamma0: f64, eta0: f64, b: f64, r: f64) -> Result<Self> {
        let p = ScheduleParams { gamma0, eta0, b, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(self.b > 0.0 && self.b < 0.5) {
            return Err(Error::InvalidParameter(format!("b must lie in (0, 0.5), got {}", self.b)));
        }
        if !(0.0..1.0).contains(&self.r) {
            return Err(Error::InvalidParameter(format!("r must lie in [0, 1), got {}", self.r)));
        }
        Ok(())
    }

    pub fn gamma(&self, k: u64) -> f64 {
        gamma(self, k)
    }

    pub fn eta(&self, k: u64) -> f64 {
        eta(self, k)
    }

    /// Averaging weight `γ_k^r`.
    pub fn weight(&self, k: u64) -> f64 {
        self.gamma(k).powf(self.r)
    }
}

/// `γ0 / √(1+k)`
pub fn gamma(params: &ScheduleParams, k: u64) -> f64 {
    params.gamma0 / ((1 + k) as f64).sqrt()
}

/// `η0 / (1+k)^b`
pub fn eta(params: &ScheduleParams, k: u64) -> f64 {
    params.eta0 / ((1 + k) as f64).powf(params.b)
}

/// Lower bound, upper bound and value of `Σ_{k=0}^{N} (k+1)^{-α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicBounds {
    pub lower: f64,
    pub upper: f64,
    pub sum: f64,
}

/// Smallest `N` with `N ≥ 2^{1/(1−α)} − 1`.
pub fn harmonic_threshold(alpha: f64) -> u64 {
    let t = 2f64.powf(1.0 / (1.0 - alpha)) - 1.0;
    // guard against 2^(1/(1-α)) landing a hair above an integer
    let c = t.ceil();
    if c - t > 1.0 - 1e-9 {
        t.floor() as u64
    } else {
        c as u64
    }
}

/// `(N+1)^{1−α} / (2(1−α)) ≤ Σ_{k=0}^{N} (k+1)^{−α} ≤ (N+1)^{1−α} / (1−α)`
/// for `α ∈ [0, 1)` and `N ≥ 2^{1/(1−α)} − 1`.
pub fn harmonic_sum_bounds(alpha: f64, n: u64) -> Result<HarmonicBounds> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let min_n = harmonic_threshold(alpha);
    if n < min_n {
        return Err(Error::InvalidParameter(format!(
            "harmonic bounds need N >= {min_n} for alpha = {alpha}, got {n}"
        )));
    }
    let e = 1.0 - alpha;
    let top = ((n + 1) as f64).powf(e);
    let sum = (0..=n).map(|k| ((k + 1) as f64).powf(-alpha)).sum();
    Ok(HarmonicBounds {
        lower: top / (2.0 * e),
        upper: top / e,
        sum,
    })
}

/// [`harmonic_sum_bounds`] for every `N` from the threshold up to `n_max`,
/// accumulating the sum incrementally. Entry `i` is for `N = threshold + i`.
pub fn harmonic_sum_table(alpha: f64, n_max: u64) -> Result<Vec<HarmonicBounds>> {
    let start = harmonic_threshold(alpha);
    harmonic_sum_bounds(alpha, start.max(n_max))?;
    let e = 1.0 - alpha;
    let mut sum: f64 = (0..start).map(|k| ((k + 1) as f64).powf(-alpha)).sum();
    let mut out = Vec::with_capacity((n_max.saturating_sub(start) + 1) as usize);
    for n in start..=n_max {
        sum += ((n + 1) as f64).powf(-alpha);
        let top = ((n + 1) as f64).powf(e);
        out.push(HarmonicBounds {
            lower: top / (2.0 * e),
            upper: top / e,
            sum,
        });
    }
    Ok(out)
}
