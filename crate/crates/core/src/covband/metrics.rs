use nalgebra::SymmetricEigen;

use super::{CovError, SubdiagonalView, SymMatrix};

/// Largest `m ≥ 1` with a nonzero entry on subdiagonal `m`; 0 for a diagonal matrix.
pub fn bandwidth(s: &SymMatrix) -> usize {
    let p = s.order();
    (1..p).rev().find(|&m| (0..p - m).any(|i| s.get(i + m, i) != 0.0)).unwrap_or(0)
}

pub fn min_eigenvalue(s: &SymMatrix) -> f64 {
    SymmetricEigen::new(s.as_matrix().clone()).eigenvalues.min()
}

/// `λ_min ≥ −1e-10 ‖Σ‖_F`.
pub fn is_psd(s: &SymMatrix) -> bool {
    min_eigenvalue(s) >= -1e-10 * s.frobenius()
}

/// Mean over estimates of `‖Σ̂ − Σ*‖²_F / p`.
pub fn mse(estimates: &[SymMatrix], sigma_star: &SymMatrix) -> Result<f64, CovError> {
    if estimates.is_empty() {
        return Err(CovError::Empty);
    }
    let p = sigma_star.order() as f64;
    let mut total = 0.0;
    for e in estimates {
        total += e.frobenius_distance(sigma_star)?.powi(2) / p;
    }
    Ok(total / estimates.len() as f64)
}

/// Grid minimizer; ties go to the larger λ.
pub fn lambda_best(grid: &[f64], mse: &[f64]) -> Result<f64, CovError> {
    if grid.is_empty() || grid.len() != mse.len() {
        return Err(CovError::Empty);
    }
    let mut best = 0;
    for k in 1..grid.len() {
        if mse[k] < mse[best] || (mse[k] == mse[best] && grid[k] > grid[best]) {
            best = k;
        }
    }
    Ok(grid[best])
}

/// `count` values equally spaced in log scale from `hi · ratio` to `hi`, ascending.
pub fn log_grid(hi: f64, ratio: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = ((hi * ratio).ln(), hi.ln());
            (0..count)
                .map(|k| if k + 1 == count { hi } else { (a + (b - a) * k as f64 / (count - 1) as f64).exp() })
                .collect()
        }
    }
}

/// Signal-strength condition for exact bandwidth recovery:
/// `min_{1 ≤ m ≤ K} ‖Σ_{s_{m:K}}‖_F / √|s_{m:K}| > 2λ`.
pub fn signal_condition(sigma_star: &SymMatrix, k: usize, lambda: f64) -> bool {
    let view = SubdiagonalView::new(sigma_star.order());
    let z = view.norms_sq(sigma_star);
    let sizes = view.sizes();
    if k == 0 || k > z.len() {
        return false;
    }
    let (mut num, mut den) = (0.0, 0.0);
    let mut worst = f64::INFINITY;
    for m in (0..k).rev() {
        num += z[m];
        den += sizes[m] as f64;
        worst = worst.min((num / den).sqrt());
    }
    worst > 2.0 * lambda
}

/// Squared Frobenius error of every scaled estimate of one sample
/// covariance, in `O(p)` per scale vector.
///
/// With `Σ̂_{s_m} = c_m S_{s_m}` the error splits into the diagonal part
/// plus `c_m² ‖S_{s_m}‖² − 2 c_m ⟨S_{s_m}, Σ*_{s_m}⟩ + ‖Σ*_{s_m}‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    diagonal: f64,
    z: Vec<f64>,
    cross: Vec<f64>,
    star: Vec<f64>,
}

impl ErrorProfile {
    pub fn new(s: &SymMatrix, sigma_star: &SymMatrix) -> Result<Self, CovError> {
        if s.order() != sigma_star.order() {
            return Err(CovError::OrderMismatch(s.order(), sigma_star.order()));
        }
        let view = SubdiagonalView::new(s.order());
        let diagonal = (0..s.order()).map(|i| (s.get(i, i) - sigma_star.get(i, i)).powi(2)).sum();
        Ok(Self { diagonal, z: view.norms_sq(s), cross: view.inner(s, sigma_star), star: view.norms_sq(sigma_star) })
    }

    /// `‖S_{s_m}‖²` per subdiagonal, the input of the estimators.
    pub fn norms_sq(&self) -> &[f64] {
        &self.z
    }

    pub fn squared_error(&self, scales: &[f64]) -> f64 {
        let off: f64 = (0..self.z.len())
            .map(|m| {
                let c = scales[m];
                (c * c * self.z[m] - 2.0 * c * self.cross[m] + self.star[m]).max(0.0)
            })
            .sum();
        self.diagonal + off
    }
}
