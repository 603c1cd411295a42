use nalgebra::{DMatrix, DVector};

use super::SolverError;

/// A differentiable loss with Lipschitz gradient.
pub trait SmoothLoss: Send + Sync {
    fn dim(&self) -> usize;
    /// Returns `F(β)` and writes `∇F(β)` into `grad`.
    fn value_grad(&self, beta: &[f64], grad: &mut [f64]) -> f64;
    fn lipschitz(&self) -> f64;

    fn value(&self, beta: &[f64]) -> f64 {
        let mut g = vec![0.0; beta.len()];
        self.value_grad(beta, &mut g)
    }
}

/// `F(β) = ½‖y − β‖²`, for which one gradient step with step 1 is the identity on `y`.
#[derive(Debug, Clone)]
pub struct Denoising {
    y: Vec<f64>,
}

impl Denoising {
    pub fn new(y: Vec<f64>) -> Self {
        Self { y }
    }
}

impl SmoothLoss for Denoising {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn value_grad(&self, beta: &[f64], grad: &mut [f64]) -> f64 {
        let mut v = 0.0;
        for ((g, &b), &y) in grad.iter_mut().zip(beta).zip(&self.y) {
            *g = b - y;
            v += (b - y) * (b - y);
        }
        0.5 * v
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// `F(β) = ½‖y − Xβ‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    x: DMatrix<f64>,
    y: DVector<f64>,
    lipschitz: f64,
}

impl LeastSquares {
    /// Estimates the Lipschitz constant with [`power_lipschitz`].
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self, SolverError> {
        let l = power_lipschitz(&x);
        Self::with_lipschitz(x, y, l)
    }

    pub fn with_lipschitz(x: DMatrix<f64>, y: Vec<f64>, lipschitz: f64) -> Result<Self, SolverError> {
        if x.nrows() != y.len() {
            return Err(SolverError::Dimension(format!("X has {} rows, y has {} entries", x.nrows(), y.len())));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(SolverError::BadLipschitz);
        }
        Ok(Self { x, y: DVector::from_vec(y), lipschitz })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> &[f64] {
        self.y.as_slice()
    }
}

impl SmoothLoss for LeastSquares {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value_grad(&self, beta: &[f64], grad: &mut [f64]) -> f64 {
        let b = DVector::from_column_slice(beta);
        let r = &self.x * b - &self.y;
        let g = self.x.tr_mul(&r);
        grad.copy_from_slice(g.as_slice());
        0.5 * r.norm_squared()
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Largest eigenvalue of `XᵀX` by 20 power iterations from the all-ones
/// vector, inflated by 5%. Falls back to 1 for a zero design.
pub fn power_lipschitz(x: &DMatrix<f64>) -> f64 {
    let p = x.ncols();
    if p == 0 {
        return 1.0;
    }
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..20 {
        let w = x.tr_mul(&(x * &v));
        est = w.norm();
        if est == 0.0 {
            return 1.0;
        }
        v = w / est;
    }
    1.05 * est
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.3, 3.0]);
        let loss = LeastSquares::new(x, vec![1.0, -1.0, 2.0]).unwrap();
        let beta = [0.4, -0.2];
        let mut g = [0.0; 2];
        loss.value_grad(&beta, &mut g);
        for k in 0..2 {
            let h = 1e-6;
            let mut up = beta;
            let mut down = beta;
            up[k] += h;
            down[k] -= h;
            let fd = (loss.value(&up) - loss.value(&down)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()));
        }
    }

    #[test]
    fn lipschitz_bounds_spectrum() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let l = power_lipschitz(&x);
        assert!(l >= 9.0 && l <= 9.0 * 1.05 + 1e-9);
        assert_eq!(power_lipschitz(&DMatrix::zeros(2, 2)), 1.0);
    }
}
