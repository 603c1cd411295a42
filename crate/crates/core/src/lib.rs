//! Hierarchical sparse modeling over DAG-structured parameter groups.
//!
//! Two convex penalties encode "a group may be nonzero only if its
//! ancestors are": the group lasso over descendant groups and the latent
//! overlapping group lasso over ancestor groups. The crate provides their
//! proximal operators (including exact finite-step algorithms on paths),
//! solvers for smooth losses, a banded covariance estimator built on them,
//! and an experiment harness.

pub mod covband;
pub mod harness;
pub mod hierarchy;
pub mod io;
pub mod prox;
pub mod solvers;
