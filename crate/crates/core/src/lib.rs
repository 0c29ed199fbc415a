//! Sparse and low-rank representations of parametrized function families.
//!
//! A family `f(x, y)` is sampled on two grids into a [`SnapshotMatrix`]; the
//! modules then build reduced representations of it:
//!
//! * [`pod`]: proper orthogonal decomposition (mean-square optimal basis),
//! * [`aca`]: adaptive cross approximation and its generalizations,
//! * [`eim`]: empirical interpolation, its discrete form and gEIM,
//! * [`gappy`]: least-squares reconstruction from sensors and sensor placement,
//! * [`verify`]: cross-method audits and brute-force oracles.
//!
//! [`kernels`] holds the small dense linear algebra everything else uses and
//! [`cli`] is the command-line front end.

// `!(a > b)` rejects NaN along with the failing comparison
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aca;
pub mod cli;
pub mod eim;
pub mod error;
pub mod gappy;
pub mod kernels;
pub mod pod;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use kernels::DenseMatrix;
pub use sampling::{Grid, SnapshotMatrix};

/// Why a greedy construction stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// The error measure dropped below the requested tolerance.
    ToleranceReached,
    /// No admissible pivot was left above the relative zero threshold.
    NumericalRank,
    /// The caller's rank cap was hit first.
    MaxRank,
}

/// Relative threshold under which a pivot counts as zero.
pub const PIVOT_RTOL: f64 = 1e-14;
