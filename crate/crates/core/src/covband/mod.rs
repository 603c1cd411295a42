//! Banded covariance estimation with hierarchical penalties on subdiagonals.
//!
//! Subdiagonal `m` of a `p × p` matrix (entries with `|i − j| = m`, both
//! triangles) is node `m` of a path `1 → 2 → … → p−1`. The main diagonal is
//! never penalized. Every estimator is the matching vector prox applied to
//! the subdiagonals, which reduces to one scale factor per subdiagonal.

mod estimators;
mod generate;
mod matrix;
mod metrics;

pub use estimators::{
    build as build_estimator, estimate_gl, estimate_log, estimate_mgl, estimate_mgl_with, lambda_max, names as estimator_names, scaled_bandwidth,
    CovEstimate, CovEstimator, GlBanding, LogBanding, MglBanding,
};
pub use generate::{gen_moving_average, gen_stair, sample_gaussian};
pub use matrix::{sample_covariance, SubdiagonalView, SymMatrix};
pub use metrics::{
    bandwidth, is_psd, lambda_best, log_grid, min_eigenvalue, mse, signal_condition, ErrorProfile,
};

use crate::prox::ProxError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CovError {
    #[error("matrix is {rows}×{cols}, not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("matrix has a non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("need at least 2 observations, got {0}")]
    TooFewSamples(usize),
    #[error("bandwidth {k} invalid for p = {p}: {reason}")]
    BadBandwidth { p: usize, k: usize, reason: &'static str },
    #[error("covariance is not positive semidefinite (Cholesky failed after jitter)")]
    Factorization,
    #[error("orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
    #[error(transparent)]
    Prox(#[from] ProxError),
}
