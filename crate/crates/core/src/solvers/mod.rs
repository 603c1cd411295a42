//! Solvers for `min_β F(β) + λ Ω(β)` with smooth `F`.

mod admm;
mod loss;
mod proximal_gradient;

pub use admm::{admm_regression, AdmmOptions, AdmmResult, AdmmState};
pub use loss::{power_lipschitz, Denoising, LeastSquares, SmoothLoss};
pub use proximal_gradient::{proximal_gradient, PgOptions, PgResult};

use crate::prox::ProxError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite gradient or objective at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("no convergence after {iterations} iterations")]
    NotConverged { iterations: usize, beta: Vec<f64> },
    #[error("system matrix is not positive definite")]
    Factorization,
    #[error("lipschitz constant must be positive and finite")]
    BadLipschitz,
    #[error(transparent)]
    Prox(#[from] ProxError),
}
