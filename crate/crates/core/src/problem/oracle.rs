//! Convex component functions with first-order oracles.
//!
//! Every oracle returns a function value together with one subgradient. The
//! builtin families are serializable and make up the problem file format;
//! [`Oracle::Custom`] wraps an arbitrary closure for in-process use.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{axpy, dot, is_rectangular};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle expects dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("oracle produced a non-finite value")]
    NonFinite,
    #[error("{0}")]
    Custom(String),
}

type CustomFn = dyn Fn(&[f64]) -> Result<(f64, Vec<f64>), OracleError> + Send + Sync;

/// A user-supplied oracle `x -> (value, subgradient)`.
#[derive(Clone)]
pub struct CustomOracle(Arc<CustomFn>);

impl CustomOracle {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<(f64, Vec<f64>), OracleError> + Send + Sync + 'static,
    {
        CustomOracle(Arc::new(f))
    }
}

impl fmt::Debug for CustomOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomOracle(..)")
    }
}

/// Builtin oracle families.
///
/// Matrices are row-major. `Quadratic` evaluates `½ xᵀQx + cᵀx + d` and
/// assumes `Q` symmetric positive semidefinite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Oracle {
    /// `x -> value`
    Constant { value: f64 },
    /// `x -> cᵀx + d`
    Affine {
        c: Vec<f64>,
        #[serde(default)]
        d: f64,
    },
    /// `x -> ½ xᵀQx + cᵀx + d`
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
        #[serde(default)]
        d: f64,
    },
    /// `x -> max_j (G_j x + g_j)`
    HingeMax {
        #[serde(rename = "G")]
        rows: Vec<Vec<f64>>,
        #[serde(rename = "g")]
        offsets: Vec<f64>,
    },
    /// `x -> Σ_j max(0, G_j x + g_j)`
    HingeSum {
        #[serde(rename = "G")]
        rows: Vec<Vec<f64>>,
        #[serde(rename = "g")]
        offsets: Vec<f64>,
    },
    /// Local soft-margin SVM objective
    /// `½·w_weight·‖x[..w_dim]‖² + slack_weight·Σ_{j ∈ slack} x[j]`.
    SvmLocal {
        w_dim: usize,
        w_weight: f64,
        slack: Vec<usize>,
        slack_weight: f64,
    },
    #[serde(skip)]
    Custom(CustomOracle),
}

impl Oracle {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<(f64, Vec<f64>), OracleError> + Send + Sync + 'static,
    {
        Oracle::Custom(CustomOracle::new(f))
    }

    pub fn zero() -> Self {
        Oracle::Constant { value: 0.0 }
    }

    /// Checks the stored shapes against the problem dimension `n`.
    pub fn validate(&self, n: usize) -> Result<(), String> {
        let shape = |rows: &[Vec<f64>], offsets: &[f64]| {
            if rows.is_empty() {
                Err("max/sum over an empty set of pieces".to_string())
            } else if rows.len() != offsets.len() {
                Err(format!("{} rows but {} offsets", rows.len(), offsets.len()))
            } else if !is_rectangular(rows, n) {
                Err(format!("rows must have length {n}"))
            } else {
                Ok(())
            }
        };
        match self {
            Oracle::Constant { .. } | Oracle::Custom(_) => Ok(()),
            Oracle::Affine { c, .. } if c.len() != n => {
                Err(format!("affine c has length {}, expected {n}", c.len()))
            }
            Oracle::Affine { .. } => Ok(()),
            Oracle::Quadratic { q, c, .. } => {
                if q.len() != n || !is_rectangular(q, n) {
                    Err(format!("quadratic Q must be {n}x{n}"))
                } else if c.len() != n {
                    Err(format!("quadratic c has length {}, expected {n}", c.len()))
                } else {
                    Ok(())
                }
            }
            Oracle::HingeMax { rows, offsets } | Oracle::HingeSum { rows, offsets } => {
                shape(rows, offsets)
            }
            Oracle::SvmLocal { w_dim, slack, .. } => {
                if *w_dim > n || slack.iter().any(|&j| j >= n) {
                    Err(format!("svm-local indices exceed dimension {n}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Function value only.
    pub fn value(&self, x: &[f64]) -> Result<f64, OracleError> {
        let v = match self {
            Oracle::Constant { value } => *value,
            Oracle::Affine { c, d } => dot(c, x) + d,
            Oracle::Quadratic { q, c, d } => {
                let quad: f64 = q.iter().zip(x).map(|(row, xi)| xi * dot(row, x)).sum();
                0.5 * quad + dot(c, x) + d
            }
            Oracle::HingeMax { rows, offsets } => rows
                .iter()
                .zip(offsets)
                .map(|(r, g)| dot(r, x) + g)
                .fold(f64::NEG_INFINITY, f64::max),
            Oracle::HingeSum { rows, offsets } => rows
                .iter()
                .zip(offsets)
                .map(|(r, g)| (dot(r, x) + g).max(0.0))
                .sum(),
            Oracle::SvmLocal {
                w_dim,
                w_weight,
                slack,
                slack_weight,
            } => {
                let w = &x[..*w_dim];
                0.5 * w_weight * dot(w, w) + slack_weight * slack.iter().map(|&j| x[j]).sum::<f64>()
            }
            Oracle::Custom(f) => (f.0)(x)?.0,
        };
        finite(v)
    }

    /// Evaluates the oracle and adds `scale(value) · subgradient` into `out`.
    /// Returns the function value.
    ///
    /// The scale is computed from the value before the subgradient is formed,
    /// which lets callers gate or weight the subgradient (hinge penalties)
    /// without a second evaluation.
    pub fn add_scaled_subgradient(
        &self,
        x: &[f64],
        out: &mut [f64],
        scale: impl FnOnce(f64) -> f64,
    ) -> Result<f64, OracleError> {
        if x.len() != out.len() {
            return Err(OracleError::Dimension {
                expected: out.len(),
                got: x.len(),
            });
        }
        match self {
            Oracle::Constant { value } => finite(*value),
            Oracle::Affine { c, d } => {
                let v = finite(dot(c, x) + d)?;
                let s = scale(v);
                if s != 0.0 {
                    axpy(s, c, out);
                }
                Ok(v)
            }
            Oracle::Quadratic { q, c, d } => {
                let qx: Vec<f64> = q.iter().map(|row| dot(row, x)).collect();
                let v = finite(0.5 * dot(&qx, x) + dot(c, x) + d)?;
                let s = scale(v);
                if s != 0.0 {
                    axpy(s, &qx, out);
                    axpy(s, c, out);
                }
                Ok(v)
            }
            Oracle::HingeMax { rows, offsets } => {
                // first maximizing piece supplies the subgradient
                let mut best = 0;
                let mut v = f64::NEG_INFINITY;
                for (j, (r, g)) in rows.iter().zip(offsets).enumerate() {
                    let piece = dot(r, x) + g;
                    if piece > v {
                        v = piece;
                        best = j;
                    }
                }
                let v = finite(v)?;
                let s = scale(v);
                if s != 0.0 {
                    axpy(s, &rows[best], out);
                }
                Ok(v)
            }
            Oracle::HingeSum { rows, offsets } => {
                let pieces: Vec<f64> = rows
                    .iter()
                    .zip(offsets)
                    .map(|(r, g)| dot(r, x) + g)
                    .collect();
                let v = finite(pieces.iter().map(|p| p.max(0.0)).sum())?;
                let s = scale(v);
                if s != 0.0 {
                    for (r, p) in rows.iter().zip(&pieces) {
                        if *p > 0.0 {
                            axpy(s, r, out);
                        }
                    }
                }
                Ok(v)
            }
            Oracle::SvmLocal {
                w_dim,
                w_weight,
                slack,
                slack_weight,
            } => {
                let w = &x[..*w_dim];
                let v = finite(
                    0.5 * w_weight * dot(w, w)
                        + slack_weight * slack.iter().map(|&j| x[j]).sum::<f64>(),
                )?;
                let s = scale(v);
                if s != 0.0 {
                    axpy(s * w_weight, w, &mut out[..*w_dim]);
                    for &j in slack {
                        out[j] += s * slack_weight;
                    }
                }
                Ok(v)
            }
            Oracle::Custom(f) => {
                let (v, g) = (f.0)(x)?;
                let v = finite(v)?;
                if g.len() != out.len() {
                    return Err(OracleError::Dimension {
                        expected: out.len(),
                        got: g.len(),
                    });
                }
                if g.iter().any(|gi| !gi.is_finite()) {
                    return Err(OracleError::NonFinite);
                }
                let s = scale(v);
                if s != 0.0 {
                    axpy(s, &g, out);
                }
                Ok(v)
            }
        }
    }

    /// Value and a freshly allocated subgradient.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
        let mut g = vec![0.0; x.len()];
        let v = self.add_scaled_subgradient(x, &mut g, |_| 1.0)?;
        Ok((v, g))
    }

    /// Pieces `(G, g)` of a polyhedral description `{x : G x + g ≤ 0}` of the
    /// sublevel set `{x : self(x) ≤ 0}`, when one exists.
    pub fn polyhedral_sublevel(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            Oracle::Constant { value } if *value <= 0.0 => Some((vec![], vec![])),
            Oracle::Affine { c, d } => Some((vec![c.clone()], vec![*d])),
            Oracle::HingeMax { rows, offsets } => Some((rows.clone(), offsets.clone())),
            _ => None,
        }
    }
}

fn finite(v: f64) -> Result<f64, OracleError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(OracleError::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_max_picks_first_active_piece() {
        let h = Oracle::HingeMax {
            rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            offsets: vec![0.0, 0.0],
        };
        let (v, g) = h.eval(&[2.0, 2.0]).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g, vec![1.0, 0.0]);
        let (v, g) = h.eval(&[1.0, 3.0]).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(g, vec![0.0, 1.0]);
    }

    #[test]
    fn quadratic_value_and_gradient() {
        let f = Oracle::Quadratic {
            q: vec![vec![2.0, 0.0], vec![0.0, 4.0]],
            c: vec![1.0, -1.0],
            d: 0.5,
        };
        let (v, g) = f.eval(&[1.0, 1.0]).unwrap();
        assert_eq!(v, 0.5 * (2.0 + 4.0) + 0.0 + 0.5);
        assert_eq!(g, vec![3.0, 3.0]);
        assert_eq!(f.value(&[1.0, 1.0]).unwrap(), v);
    }

    #[test]
    fn svm_local_gradient() {
        let f = Oracle::SvmLocal {
            w_dim: 2,
            w_weight: 0.5,
            slack: vec![3],
            slack_weight: 0.1,
        };
        let (v, g) = f.eval(&[2.0, 0.0, 7.0, 3.0]).unwrap();
        assert!((v - (0.25 * 4.0 + 0.3)).abs() < 1e-15);
        assert_eq!(g, vec![1.0, 0.0, 0.0, 0.1]);
    }

    #[test]
    fn scale_gates_subgradient() {
        let h = Oracle::Affine {
            c: vec![1.0, 2.0],
            d: -10.0,
        };
        let mut out = vec![0.0; 2];
        let v = h
            .add_scaled_subgradient(&[1.0, 1.0], &mut out, |v| if v > 0.0 { 1.0 } else { 0.0 })
            .unwrap();
        assert_eq!(v, -7.0);
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn custom_errors_propagate() {
        let f = Oracle::custom(|_| Err(OracleError::Custom("boom".into())));
        assert_eq!(
            f.eval(&[0.0]).unwrap_err(),
            OracleError::Custom("boom".into())
        );
        let nan = Oracle::custom(|_| Ok((f64::NAN, vec![0.0])));
        assert_eq!(nan.eval(&[0.0]).unwrap_err(), OracleError::NonFinite);
    }

    #[test]
    fn validate_catches_shape_errors() {
        assert!(Oracle::Affine { c: vec![1.0], d: 0.0 }.validate(2).is_err());
        assert!(Oracle::HingeMax {
            rows: vec![vec![1.0, 0.0]],
            offsets: vec![],
        }
        .validate(2)
        .is_err());
        assert!(Oracle::zero().validate(5).is_ok());
    }

    #[test]
    fn json_round_trip_uses_kind_tag() {
        let h = Oracle::HingeMax {
            rows: vec![vec![1.0, -1.0]],
            offsets: vec![0.5],
        };
        let s = serde_json::to_string(&h).unwrap();
        assert!(s.contains("\"kind\":\"hinge-max\""));
        let back: Oracle = serde_json::from_str(&s).unwrap();
        assert_eq!(back.value(&[1.0, 0.0]).unwrap(), 1.5);
    }
}
