//! Run traces and their CSV form.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::ScheduleParams;

pub const CSV_HEADER: &str = "k,f_bar,phi_bar,f_last,phi_last,gamma_k,eta_k,elapsed_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Airig,
    ProjIg,
    ProxIag,
    Saga,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Airig,
        SolverKind::ProjIg,
        SolverKind::ProxIag,
        SolverKind::Saga,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Airig => "airig",
            SolverKind::ProjIg => "proj_ig",
            SolverKind::ProxIag => "prox_iag",
            SolverKind::Saga => "saga",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown solver {s:?}")))
    }
}

/// One trace row. Record `k` describes the state after outer iteration `k`
/// (0-based): `f_bar`/`phi_bar` at the reported average `x̄_{k+1}`,
/// `f_last`/`phi_last` at the last iterate `x_{k+1}`, and the stepsize and
/// regularization used during iteration `k`. `elapsed_s` counts solver time
/// only; metric evaluation for the trace is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: u64,
    pub f_bar: f64,
    pub phi_bar: f64,
    pub f_last: f64,
    pub phi_last: f64,
    pub gamma_k: f64,
    pub eta_k: f64,
    #[serde(rename = "elapsed_s")]
    pub elapsed: f64,
}

/// Optional per-iteration state kept for verification.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateLog {
    /// `x_0, x_1, …`
    pub iterates: Vec<Vec<f64>>,
    /// `x̄_0, x̄_1, …`
    pub averages: Vec<Vec<f64>>,
    /// Per outer iteration `k`: `(γ_k, η_k, [‖x_k − x_{k,i}‖ for i = 1..=m+1])`.
    pub drifts: Vec<(f64, f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub solver: SolverKind,
    pub records: Vec<IterRecord>,
    /// The reported iterate after the last completed iteration.
    pub final_xbar: Vec<f64>,
    pub final_last: Vec<f64>,
    pub params: ScheduleParams,
    /// Outer iterations completed.
    pub iterations: u64,
    /// Set when the wall-clock budget stopped the run before `N` iterations.
    pub truncated: bool,
    pub log: Option<IterateLog>,
}

impl RunHistory {
    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::report::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

fn fmt_real(out: &mut String, v: f64) {
    // 17 significant digits round-trip every f64
    let _ = write!(out, "{v:.16e}");
}

pub fn records_to_csv(records: &[IterRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{}", r.k);
        for v in [r.f_bar, r.phi_bar, r.f_last, r.phi_last, r.gamma_k, r.eta_k, r.elapsed] {
            out.push(',');
            fmt_real(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Parses a trace written by [`records_to_csv`].
pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<IterRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::Format(format!(
            "unexpected trace header {header:?}, expected {CSV_HEADER:?}"
        )));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Format(format!("trace row {}: {e}", i + 2))))
        .collect()
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Vec<IterRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
