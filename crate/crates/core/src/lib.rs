//! Randomized spanning-forest estimators for connection-Laplacian smoothing
//! and angular synchronization.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod laplacian;
pub mod oracle;
pub mod sampler;
pub mod signal;
pub mod solvers;
pub mod sync;
pub mod synthetic;

pub use error::{Error, Result};
pub use estimators::{EstimatorKind, MtsfSmoother, SmootherConfig, SmoothingEstimate};
pub use graph::{ConnectionGraph, Edge, SmoothingProblem};
pub use laplacian::SparseHermitianOperator;
pub use num_complex::Complex64;
pub use sampler::{sample_mtsf, CycleDetection, Mtsf, MtsfSampler, SamplingMode, WalkConfig};
pub use signal::ComplexSignal;
pub use solvers::{solve_cg, solve_exact, CgOptions, Preconditioner};
pub use sync::{power_iterate, sync_error, SyncOptions, SyncResult, SyncSmoother};
