//! Empirical decay exponents from traces.

use serde::{Deserialize, Serialize};

use super::theory::{check_bounds, BoundsContext};
use crate::error::{Error, Result};
use crate::history::IterRecord;

/// Usable points needed per metric.
pub const MIN_FIT_POINTS: usize = 50;
/// Metric values at or below this are treated as exact zeros and left out.
pub const ZERO_METRIC: f64 = 1e-14;

/// Least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`; 1 for a flat,
    /// exactly fitted line.
    pub r2: f64,
}

/// Fits `log y = a + slope·log x`. Needs at least two distinct abscissae.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<LineFit> {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if logs.len() < 2 || sxx <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "a rate fit needs two distinct iteration counts, got {} points",
            logs.len()
        )));
    }
    let slope = sxy / sxx;
    let resid: f64 = logs.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let r2 = if syy <= n * (1e-12 * my.abs().max(1.0)).powi(2) {
        1.0
    } else {
        (1.0 - resid / syy).clamp(0.0, 1.0)
    };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Fitted exponent of `f(x̄) − f*` against `k + 1`.
    pub slope_f: f64,
    /// Fitted exponent of `φ(x̄)` against `k + 1`.
    pub slope_phi: f64,
    /// First and last record index `k` of the fit window.
    pub fit_window: (u64, u64),
    pub r2_f: f64,
    pub r2_phi: f64,
    /// Records in the window dropped because the metric was ≤ [`ZERO_METRIC`].
    pub excluded_f: usize,
    pub excluded_phi: usize,
    /// Whether every window record past the threshold respects the
    /// closed-form bounds; `None` when no bounds context was supplied.
    pub bound_check_f: Option<bool>,
    pub bound_check_phi: Option<bool>,
}

/// Fits decay exponents over the last `window_fraction` of the records.
pub fn fit_rates(
    records: &[IterRecord],
    f_star: f64,
    window_fraction: f64,
    bounds: Option<&BoundsContext>,
) -> Result<RateReport> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "window_fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    let take = ((records.len() as f64 * window_fraction).ceil() as usize).min(records.len());
    let window = &records[records.len() - take..];
    let (Some(first), Some(last)) = (window.first(), window.last()) else {
        return Err(Error::InvalidParameter("rate fit needs a non-empty trace".into()));
    };

    let series = |metric: &dyn Fn(&IterRecord) -> f64, name: &str| -> Result<(LineFit, usize)> {
        let pts: Vec<(f64, f64)> = window
            .iter()
            .map(|r| ((r.k + 1) as f64, metric(r)))
            .filter(|&(_, y)| y > ZERO_METRIC)
            .collect();
        if pts.len() < MIN_FIT_POINTS {
            return Err(Error::InvalidParameter(format!(
                "rate fit for {name} needs {MIN_FIT_POINTS} records with positive values in the window, found {} of {}",
                pts.len(),
                window.len()
            )));
        }
        Ok((fit_power_law(&pts)?, window.len() - pts.len()))
    };
    let (fit_f, excluded_f) = series(&|r| r.f_bar - f_star, "suboptimality")?;
    let (fit_phi, excluded_phi) = series(&|r| r.phi_bar, "infeasibility")?;

    let (bound_check_f, bound_check_phi) = match bounds {
        Some(ctx) => {
            let v = check_bounds(window, f_star, ctx)?;
            (
                Some(!v.iter().any(|v| v.metric == "suboptimality")),
                Some(!v.iter().any(|v| v.metric == "infeasibility")),
            )
        }
        None => (None, None),
    };

    Ok(RateReport {
        slope_f: fit_f.slope,
        slope_phi: fit_phi.slope,
        fit_window: (first.k, last.k),
        r2_f: fit_f.r2,
        r2_phi: fit_phi.r2,
        excluded_f,
        excluded_phi,
        bound_check_f,
        bound_check_phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(f: impl Fn(u64) -> f64, len: u64) -> Vec<IterRecord> {
        (0..len)
            .map(|k| IterRecord {
                k,
                f_bar: f(k),
                phi_bar: f(k),
                f_last: 0.0,
                phi_last: 0.0,
                gamma_k: 1.0,
                eta_k: 1.0,
                elapsed: 0.0,
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let t = trace(|k| 3.0 * ((k + 1) as f64).powf(-0.5), 200);
        let r = fit_rates(&t, 0.0, 0.5, None).unwrap();
        assert!((r.slope_f + 0.5).abs() < 1e-9);
        assert!((r.r2_f - 1.0).abs() < 1e-12);
        assert_eq!(r.fit_window, (100, 199));
        assert_eq!(r.bound_check_f, None);
    }

    #[test]
    fn constant_trace_is_flat() {
        let r = fit_rates(&trace(|_| 0.7, 120), 0.0, 0.5, None).unwrap();
        assert!(r.slope_phi.abs() < 1e-12);
        assert_eq!(r.r2_phi, 1.0);
    }

    #[test]
    fn zeros_are_excluded_and_counted() {
        let t = trace(|k| if k % 10 == 0 { 0.0 } else { ((k + 1) as f64).powf(-0.3) }, 400);
        let r = fit_rates(&t, 0.0, 0.5, None).unwrap();
        assert_eq!(r.excluded_phi, 20);
        assert!((r.slope_phi + 0.3).abs() < 1e-9);
    }

    #[test]
    fn too_few_points_names_count() {
        let err = fit_rates(&trace(|_| 1.0, 60), 0.0, 0.5, None).unwrap_err().to_string();
        assert!(err.contains("found 30"), "{err}");
        assert!(fit_rates(&trace(|_| 1.0, 60), 0.0, 0.0, None).is_err());
    }
}
