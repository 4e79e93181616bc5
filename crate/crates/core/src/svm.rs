//! Distributed soft-margin SVM benchmark.
//!
//! The decision vector is `x = (w, b, z) ∈ R^{n+1+N}` and the problem is
//!
//! ```text
//! minimize ½‖w‖² + (1/λ) Σ_j z_j
//! s.t.     v_j (wᵀu_j + b) ≥ 1 − z_j,  z_j ≥ 0.
//! ```
//!
//! Samples are split into `m` contiguous blocks (the last one takes the
//! remainder). Agent `i` holds `f_i = (N_i/N)·½‖w‖² + (1/λ) Σ_{j∈block_i} z_j`
//! and folds its margin constraints into one convex `h_i`, by default the
//! pointwise max of the affine margins; `z ≥ 0` is carried by the
//! nonnegativity index set. The same constraints also come as an explicit
//! polyhedron for the projection-based baselines.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{AgentBlock, BoxSet, Oracle, PhiMode, ProblemFile, ProblemSpec};
use crate::qp::{solve_qp, PolyhedralSet};
use crate::schedules::ScheduleParams;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmDataset {
    /// Samples, one row each.
    pub u: Vec<Vec<f64>>,
    /// Labels in `{−1, +1}`.
    pub v: Vec<f64>,
    pub seed: u64,
}

impl SvmDataset {
    pub fn new(u: Vec<Vec<f64>>, v: Vec<f64>, seed: u64) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::dim("labels vs samples", u.len(), v.len()));
        }
        if u.is_empty() {
            return Err(Error::InvalidParameter("dataset is empty".into()));
        }
        let n = u[0].len();
        if let Some(row) = u.iter().position(|r| r.len() != n) {
            return Err(Error::Format(format!("sample {row} has {} features, expected {n}", u[row].len())));
        }
        if let Some(j) = v.iter().position(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::Format(format!("label {j} is {}, expected ±1", v[j])));
        }
        Ok(SvmDataset { u, v, seed })
    }

    pub fn samples(&self) -> usize {
        self.u.len()
    }

    pub fn features(&self) -> usize {
        self.u[0].len()
    }

    /// CSV with a `u0,…,u{n−1},v` header and one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.features()).map(|j| format!("u{j}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",v\n");
        for (row, label) in self.u.iter().zip(&self.v) {
            for x in row {
                out.push_str(&format!("{x:.16e},"));
            }
            out.push_str(if *label > 0.0 { "1\n" } else { "-1\n" });
        }
        out
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut u = Vec::new();
        let mut v = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("dataset row {}: {e}", i + 2)))?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("dataset row {}: {e}", i + 2)))?;
            let Some((label, feats)) = vals.split_last() else {
                return Err(Error::Format(format!("dataset row {} is empty", i + 2)));
            };
            u.push(feats.to_vec());
            v.push(*label);
        }
        SvmDataset::new(u, v, 0)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::report::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        SvmDataset::from_csv(file)
    }
}

/// Two unit-covariance Gaussian clusters centred at `±(separation/2)·e1`.
/// Samples alternate between the clusters, labels follow the cluster and are
/// flipped independently with probability `flip_prob`.
pub fn generate_data(samples: usize, dim: usize, separation: f64, flip_prob: f64, seed: u64) -> Result<SvmDataset> {
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {samples}")));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("feature dimension must be positive".into()));
    }
    if !(0.0..0.5).contains(&flip_prob) {
        return Err(Error::InvalidParameter(format!("flip_prob must lie in [0, 0.5), got {flip_prob}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = Vec::with_capacity(samples);
    let mut v = Vec::with_capacity(samples);
    for j in 0..samples {
        let label = if j % 2 == 0 { 1.0 } else { -1.0 };
        let mut row: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        row[0] += label * separation / 2.0;
        let flipped = rng.random::<f64>() < flip_prob;
        u.push(row);
        v.push(if flipped { -label } else { label });
    }
    SvmDataset::new(u, v, seed)
}

/// How an agent's margin constraints become its single `h_i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintFold {
    /// `h_i = max_j (1 − z_j − v_j(wᵀu_j + b))`
    #[default]
    Max,
    /// `h_i = Σ_j max(0, 1 − z_j − v_j(wᵀu_j + b))`
    HingeSum,
}

#[derive(Debug, Clone)]
pub struct SvmInstance {
    pub dataset: SvmDataset,
    pub lambda: f64,
    pub agents: usize,
    pub problem: ProblemSpec,
    /// Margin rows and `z ≥ 0`, for the projection-based methods.
    pub polyhedron: PolyhedralSet,
}

impl SvmInstance {
    /// `n + 1 + N`
    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn w_range(&self) -> std::ops::Range<usize> {
        0..self.dataset.features()
    }

    pub fn bias_index(&self) -> usize {
        self.dataset.features()
    }

    pub fn z_range(&self) -> std::ops::Range<usize> {
        self.dataset.features() + 1..self.dim()
    }

    /// `½‖w‖² + (1/λ) Σ z`, evaluated directly.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let w = &x[self.w_range()];
        0.5 * w.iter().map(|a| a * a).sum::<f64>() + x[self.z_range()].iter().sum::<f64>() / self.lambda
    }

    pub fn to_file(&self) -> Result<ProblemFile> {
        ProblemFile::from_problem(&self.problem, Some(self.polyhedron.clone()))
    }
}

/// Sample ranges owned by each agent.
pub fn agent_blocks(samples: usize, agents: usize) -> Vec<std::ops::Range<usize>> {
    let per = samples / agents;
    (0..agents)
        .map(|i| {
            let end = if i + 1 == agents { samples } else { (i + 1) * per };
            i * per..end
        })
        .collect()
}

/// Margin row `(−v_j u_j, −v_j, −e_j)` with offset `1`, so that the margin
/// constraint reads `row·x + 1 ≤ 0`.
fn margin_row(data: &SvmDataset, j: usize, dim: usize) -> Vec<f64> {
    let n = data.features();
    let mut row = vec![0.0; dim];
    for (r, u) in row.iter_mut().zip(&data.u[j]) {
        *r = -data.v[j] * u;
    }
    row[n] = -data.v[j];
    row[n + 1 + j] = -1.0;
    row
}

pub fn build_instance(dataset: &SvmDataset, lambda: f64, agents: usize, box_radius: f64) -> Result<SvmInstance> {
    build_instance_with(dataset, lambda, agents, box_radius, ConstraintFold::Max)
}

pub fn build_instance_with(
    dataset: &SvmDataset,
    lambda: f64,
    agents: usize,
    box_radius: f64,
    fold: ConstraintFold,
) -> Result<SvmInstance> {
    let samples = dataset.samples();
    let n = dataset.features();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(box_radius > 0.0 && box_radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("box radius must be positive, got {box_radius}")));
    }
    if agents == 0 || agents > samples {
        return Err(Error::InvalidParameter(format!(
            "need 1 ≤ m ≤ N agents, got m = {agents} for N = {samples}"
        )));
    }
    let dim = n + 1 + samples;
    let blocks = agent_blocks(samples, agents)
        .into_iter()
        .map(|range| {
            let f = Oracle::SvmLocal {
                w_dim: n,
                w_weight: range.len() as f64 / samples as f64,
                slack: range.clone().map(|j| n + 1 + j).collect(),
                slack_weight: 1.0 / lambda,
            };
            let rows: Vec<_> = range.clone().map(|j| margin_row(dataset, j, dim)).collect();
            let offsets = vec![1.0; rows.len()];
            let h = match fold {
                ConstraintFold::Max => Oracle::HingeMax { rows, offsets },
                ConstraintFold::HingeSum => Oracle::HingeSum { rows, offsets },
            };
            AgentBlock::unconstrained_eq(f, h)
        })
        .collect();
    let problem = ProblemSpec::new(
        blocks,
        BoxSet::cube(dim, box_radius)?,
        (n + 1..dim).collect(),
        PhiMode::Hinge,
    )?;

    let mut c_rows: Vec<Vec<f64>> = (0..samples).map(|j| margin_row(dataset, j, dim)).collect();
    let mut d = vec![-1.0; samples];
    for j in 0..samples {
        let mut r = vec![0.0; dim];
        r[n + 1 + j] = -1.0;
        c_rows.push(r);
        d.push(0.0);
    }
    let polyhedron = PolyhedralSet::inequalities(dim, c_rows, d)?;

    Ok(SvmInstance {
        dataset: dataset.clone(),
        lambda,
        agents,
        problem,
        polyhedron,
    })
}

/// Solves the SVM QP directly. Returns `(x*, f*)`.
pub fn reference_optimum(instance: &SvmInstance, tol: f64) -> Result<(Vec<f64>, f64)> {
    let dim = instance.dim();
    let n = instance.dataset.features();
    let q: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut r = vec![0.0; dim];
            if i < n {
                r[i] = 1.0;
            }
            r
        })
        .collect();
    let mut c = vec![0.0; dim];
    for cz in &mut c[instance.z_range()] {
        *cz = 1.0 / instance.lambda;
    }
    let sol = solve_qp(&q, &c, &instance.polyhedron, tol)?;
    let f_star = instance.objective(&sol.x);
    Ok((sol.x, f_star))
}

/// Named benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmPreset {
    pub name: String,
    pub samples: usize,
    pub features: usize,
    pub agents: usize,
    pub lambda: f64,
    pub separation: f64,
    pub flip_prob: f64,
    pub box_radius: f64,
    pub seed: u64,
    #[serde(default)]
    pub fold: ConstraintFold,
    pub params: ScheduleParams,
}

impl SvmPreset {
    /// `m = 20`, `λ = 10`, `γ0 = η0 = 1`, `b = 0.25`, first cell of the
    /// `N × n` grid (`N = 100`, `n = 50`).
    pub fn paper_fig1() -> Self {
        SvmPreset {
            name: "paper-fig1".into(),
            samples: 100,
            features: 50,
            agents: 20,
            lambda: 10.0,
            separation: 3.0,
            flip_prob: 0.05,
            box_radius: 10.0,
            seed: 1,
            fold: ConstraintFold::Max,
            params: ScheduleParams {
                gamma0: 1.0,
                eta0: 1.0,
                b: 0.25,
                r: 0.0,
            },
        }
    }

    /// The `(N, n)` grid the preset is run over.
    pub const FIG1_GRID: [(usize, usize); 6] = [(100, 50), (100, 100), (200, 50), (200, 100), (500, 50), (500, 100)];

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "paper-fig1" => Ok(Self::paper_fig1()),
            other => Err(Error::InvalidParameter(format!("unknown preset {other:?}"))),
        }
    }

    pub fn scaled(mut self, samples: usize, features: usize) -> Self {
        self.samples = samples;
        self.features = features;
        self
    }

    pub fn dataset(&self) -> Result<SvmDataset> {
        generate_data(self.samples, self.features, self.separation, self.flip_prob, self.seed)
    }

    pub fn build(&self) -> Result<SvmInstance> {
        build_instance_with(&self.dataset()?, self.lambda, self.agents, self.box_radius, self.fold)
    }
}
