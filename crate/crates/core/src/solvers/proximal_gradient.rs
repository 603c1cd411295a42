use super::{SmoothLoss, SolverError};
use crate::prox::registry::ProxOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgOptions {
    /// Stop once the relative objective decrease falls to this level.
    pub tol: f64,
    pub max_iters: usize,
    /// FISTA momentum. Off by default, which keeps the objective monotone.
    pub accelerate: bool,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 10_000, accelerate: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgResult {
    pub beta: Vec<f64>,
    /// `F(β_k) + λ Ω(β_k)` for every iterate, starting with the first step.
    pub objective: Vec<f64>,
    /// Steps taken before the stopping rule was confirmed. The final step,
    /// which only confirms that nothing moves, is not counted.
    pub iterations: usize,
}

impl PgResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("at least one step")
    }
}

/// Proximal gradient with constant step `1/L`.
pub fn proximal_gradient(
    loss: &dyn SmoothLoss,
    prox: &dyn ProxOperator,
    lambda: f64,
    beta0: &[f64],
    opts: PgOptions,
) -> Result<PgResult, SolverError> {
    let p = loss.dim();
    if prox.dim() != p || beta0.len() != p {
        return Err(SolverError::Dimension(format!(
            "loss has {p} coefficients, prox {} and start {}",
            prox.dim(),
            beta0.len()
        )));
    }
    let l = loss.lipschitz();
    if !(l > 0.0 && l.is_finite()) {
        return Err(SolverError::BadLipschitz);
    }
    let step = 1.0 / l;
    let mut beta = beta0.to_vec();
    let mut point = beta0.to_vec();
    let mut grad = vec![0.0; p];
    let mut objective: Vec<f64> = Vec::new();
    let mut t = 1.0f64;

    for k in 1..=opts.max_iters {
        loss.value_grad(&point, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(SolverError::NonFinite { iteration: k });
        }
        let z: Vec<f64> = point.iter().zip(&grad).map(|(b, g)| b - step * g).collect();
        let out = prox.apply(&z, lambda * step)?;
        let obj = loss.value(&out.beta) + lambda * out.penalty;
        if !obj.is_finite() {
            return Err(SolverError::NonFinite { iteration: k });
        }
        if opts.accelerate {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / t_next;
            point = out.beta.iter().zip(&beta).map(|(n, o)| n + mom * (n - o)).collect();
            t = t_next;
        } else {
            point.clone_from(&out.beta);
        }
        beta = out.beta;
        let done = objective
            .last()
            .is_some_and(|&prev| {
                // The accelerated objective is not monotone, so only its size counts there.
                let dec = if opts.accelerate { (prev - obj).abs() } else { prev - obj };
                dec <= opts.tol * prev.abs().max(f64::MIN_POSITIVE)
            });
        objective.push(obj);
        if done {
            return Ok(PgResult { beta, objective, iterations: k - 1 });
        }
    }
    Err(SolverError::NotConverged { iterations: opts.max_iters, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::Hierarchy;
    use crate::prox::registry::{build, Algorithm, ProxSetup, Regularizer};
    use crate::solvers::{Denoising, LeastSquares};
    use nalgebra::DMatrix;

    fn op(reg: Regularizer) -> Box<dyn ProxOperator> {
        let h = Hierarchy::path(&[1, 2, 1]).unwrap();
        build(reg, Algorithm::Auto, &ProxSetup::new(h)).unwrap()
    }

    #[test]
    fn denoising_is_one_prox_step() {
        let y = vec![1.5, -0.4, 2.0, 0.3];
        for reg in Regularizer::ALL {
            let prox = op(reg);
            let res = proximal_gradient(&Denoising::new(y.clone()), prox.as_ref(), 0.3, &[0.0; 4], PgOptions::default())
                .unwrap();
            let direct = prox.apply(&y, 0.3).unwrap().beta;
            assert_eq!(res.iterations, 1);
            for (a, b) in res.beta.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn objective_is_monotone_and_fixed_point_holds() {
        let x = DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
        let y = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let loss = LeastSquares::new(x, y).unwrap();
        let prox = op(Regularizer::Log);
        let opts = PgOptions { tol: 1e-14, max_iters: 100_000, accelerate: false };
        let res = proximal_gradient(&loss, prox.as_ref(), 0.5, &[0.0; 4], opts).unwrap();
        for w in res.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        let again = proximal_gradient(&loss, prox.as_ref(), 0.5, &res.beta, opts).unwrap();
        for (a, b) in again.beta.iter().zip(&res.beta) {
            assert!((a - b).abs() < 1e-6);
        }
        let fast = proximal_gradient(&loss, prox.as_ref(), 0.5, &[0.0; 4], PgOptions { accelerate: true, ..opts })
            .unwrap();
        assert!((fast.final_objective() - res.final_objective()).abs() < 1e-8 * res.final_objective());
    }
}
