//! Proximal operators of the group lasso (GL), modified group lasso (mGL)
//! and latent overlapping group lasso (LOG) penalties.
//!
//! Each operator solves `min_β ½‖y − β‖² + λ Ω(β)` for one penalty `Ω`.

mod gl;
mod log;
mod mgl;
pub mod registry;
mod threshold;

pub use gl::{
    gl_pair, gl_path_duals, gl_path_scales, prox_gl_dual_bcd, prox_gl_path, prox_gl_tree, verify_gl_optimality,
    GlProxSolution,
};
pub use log::{
    f_stat, log_path_groups, prox_log_naive_bcd, prox_log_pair, prox_log_path, prox_log_path_bcd,
    prox_log_path_with_latents, verify_log_optimality, LogPathKnots, LogProxSolution,
};
pub use mgl::{
    mgl_objective, mgl_penalty, mgl_scales, mgl_weights, prox_mgl_path, prox_mgl_path_with, verify_mgl_optimality,
    MglWeights,
};
pub use threshold::{group_soft_threshold, soft_threshold};
pub(crate) use log::path_blocks;

pub(crate) use threshold::{norm, shrink_factor, soft};

use crate::hierarchy::GroupError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProxError {
    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),
    #[error("lambda must be non-negative and finite, got {0}")]
    BadLambda(f64),
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no convergence after {cycles} cycles")]
    NotConverged { cycles: usize, beta: Vec<f64> },
    #[error("weights must be strictly increasing along the path (position {index})")]
    WeightsNotIncreasing { index: usize },
    #[error("weight {index} must be positive and finite")]
    BadWeight { index: usize },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("hierarchy is not a forest")]
    NotAForest,
    #[error("{0}")]
    Unsupported(String),
    #[error("hierarchy is not a directed path")]
    NotAPath,
    #[error("group structure does not match the hierarchy")]
    GroupMismatch,
    #[error("node sizes must be positive and non-empty")]
    BadSizes,
    #[error("root finding failed at depth {depth}")]
    RootFinding { depth: usize },
    #[error(transparent)]
    Groups(#[from] GroupError),
}

/// Stopping rule for the block coordinate descent solvers: stop once the
/// largest coordinate change of β over a full cycle is at most
/// `tol · (1 + ‖y‖∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    pub tol: f64,
    pub max_cycles: usize,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_cycles: 100_000 }
    }
}

impl BcdOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Outcome of an optimality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub ok: bool,
    pub worst_violation: f64,
}

pub(crate) fn check_lambda(lambda: f64) -> Result<(), ProxError> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(ProxError::BadLambda(lambda))
    }
}

pub(crate) fn check_sizes(sizes: &[usize], y_len: usize) -> Result<(), ProxError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(ProxError::BadSizes);
    }
    let p: usize = sizes.iter().sum();
    if p != y_len {
        return Err(ProxError::Dimension { expected: p, got: y_len });
    }
    Ok(())
}

pub(crate) fn check_weights(w: &[f64], expected: usize) -> Result<(), ProxError> {
    if w.len() != expected {
        return Err(ProxError::WeightCount { expected, got: w.len() });
    }
    if let Some(index) = w.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(ProxError::BadWeight { index });
    }
    Ok(())
}

pub(crate) fn max_abs(y: &[f64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Squared norms of consecutive blocks of the given sizes.
pub(crate) fn block_norms_sq(y: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(y[start..start + s].iter().map(|v| v * v).sum());
        start += s;
    }
    out
}

/// Multiplies each block of `y` by its scale factor.
pub(crate) fn apply_block_scales(y: &[f64], sizes: &[usize], scales: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut start = 0;
    for (&s, &c) in sizes.iter().zip(scales) {
        out.extend(y[start..start + s].iter().map(|v| c * v));
        start += s;
    }
    out
}
