//! Sketched reformulation solvers for regularized least squares.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embed;
pub mod error;
pub mod gen;
pub mod linalg;
pub mod metrics;
pub mod reg;
pub mod rng;
pub mod solve;
pub mod sro;

pub use embed::{Embedding, EmbeddingKind, GaussianEmbedding, SketchBudget, SparseEmbedding};
pub use error::{Error, Result};
pub use reg::{Descriptors, FusedTransform, Penalty, Regularizer};
pub use solve::{fista, lambda_path, GramOperator, QuadraticForm, SolveResult, SolverConfig};
pub use sro::{
    direct_solve, iterative_sro, iterative_sro_ihs, measure_contraction, sro_solve, Problem, SroConfig, SroMethod, SroRun,
};
pub use gen::{DesignKind, DesignSpec, InstanceSpec, ProblemInstance, SignalSpec};
pub use metrics::{error_report, sparse_eigen_exhaustive, sparse_eigen_probe, x_seminorm, ErrorReport, SparseEigenReport};
