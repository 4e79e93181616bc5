//! JSON problem files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "J": [0],
//!   "box": {"lower": [-1, -1], "upper": [1, 1]},
//!   "blocks": [
//!     {"A": [[1, 1]], "b": [1],
//!      "f": {"kind": "affine", "c": [1, 0]},
//!      "h": {"kind": "hinge-max", "G": [[1, 0]], "g": [-0.5]}}
//!   ]
//! }
//! ```
//!
//! Optional keys: `phi_mode` (`"hinge"` or `"product"`) and `polyhedron`, an
//! explicit feasible set for the projection-based solvers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentBlock, BoxSet, Oracle, PhiMode, ProblemSpec};
use crate::error::{Error, Result};
use crate::qp::PolyhedralSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxFile {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockFile {
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "b", default)]
    pub b: Vec<f64>,
    pub f: Oracle,
    pub h: Oracle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(rename = "J", default)]
    pub nonneg: Vec<usize>,
    #[serde(rename = "box")]
    pub box_set: BoxFile,
    pub blocks: Vec<BlockFile>,
    #[serde(default)]
    pub phi_mode: PhiMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polyhedron: Option<PolyhedralSet>,
}

impl ProblemFile {
    pub fn from_problem(problem: &ProblemSpec, polyhedron: Option<PolyhedralSet>) -> Result<Self> {
        let blocks = problem
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| {
                if matches!(b.f, Oracle::Custom(_)) || matches!(b.h, Oracle::Custom(_)) {
                    return Err(Error::Format(format!(
                        "agent {i} uses a custom oracle, which has no file representation"
                    )));
                }
                Ok(BlockFile {
                    a: b.a().to_vec(),
                    b: b.b().to_vec(),
                    f: b.f.clone(),
                    h: b.h.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ProblemFile {
            n: problem.dim(),
            nonneg: problem.nonneg().to_vec(),
            box_set: BoxFile {
                lower: problem.box_set().lower().to_vec(),
                upper: problem.box_set().upper().to_vec(),
            },
            blocks,
            phi_mode: problem.phi_mode(),
            polyhedron,
        })
    }

    pub fn to_problem(&self) -> Result<ProblemSpec> {
        let box_set = BoxSet::new(self.box_set.lower.clone(), self.box_set.upper.clone())?;
        if box_set.dim() != self.n {
            return Err(Error::dim("box dimension vs n", self.n, box_set.dim()));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| AgentBlock::new(b.f.clone(), b.h.clone(), b.a.clone(), b.b.clone()))
            .collect::<Result<_>>()?;
        ProblemSpec::new(blocks, box_set, self.nonneg.clone(), self.phi_mode)
    }

    /// The explicit polyhedron if present, otherwise one derived from the problem.
    pub fn feasible_set(&self, problem: &ProblemSpec) -> Result<PolyhedralSet> {
        match &self.polyhedron {
            Some(p) => Ok(p.clone()),
            None => problem.polyhedral_feasible_set(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        crate::report::write_atomic(path, text.as_bytes())
    }
}
