//! Projection-free incremental gradient methods for constrained finite-sum
//! convex problems.
//!
//! The central solver is the averaged iteratively regularized incremental
//! gradient method ([`airig`]): agents take cyclic subgradient steps on their
//! own infeasibility metric plus a vanishing multiple of their objective, and
//! only ever project onto an easy box. Weighted iterate averaging yields
//! `O(k^{-1/2+b})` suboptimality and `O(k^{-b})` infeasibility.
//!
//! For comparison the crate ships projected IG, proximal IAG and SAGA
//! ([`baselines`]), all of which project onto the full polyhedral feasible set
//! every step using the QP solver in [`qp`], plus a distributed soft-margin
//! SVM benchmark ([`svm`]) and rate fitting and suite tooling ([`report`]).

pub mod airig;
pub mod baselines;
mod error;
pub mod history;
pub mod linalg;
pub mod problem;
pub mod qp;
pub mod report;
pub mod schedules;
pub mod svm;

pub use error::{Error, Result};
pub use history::{IterRecord, RunHistory};
pub use problem::{AgentBlock, BoundEstimates, BoxSet, Oracle, PhiMode, ProblemSpec};
pub use qp::{PolyhedralSet, QpSolution, QpSolver};
pub use schedules::ScheduleParams;
