use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::hierarchy::{Hierarchy, PathDecomposition};
use crate::prox::{path_blocks, prox_log_path, LogPathKnots, ProxError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    pub rho: f64,
    /// Both residuals must fall below `tol (1 + ‖y‖₂)`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self { rho: 1.0, tol: 1e-9, max_iters: 100_000 }
    }
}

/// Per-path variables, each stored in the path's layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub order: Vec<Vec<usize>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub rho: f64,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmResult {
    pub beta: Vec<f64>,
    /// `½‖y − Xβ‖² + λ Σ_ℓ Ω_ℓ(β_ℓ)`, an upper bound on the LOG objective
    /// that is tight at the optimum.
    pub objective: f64,
    pub iterations: usize,
    pub state: AdmmState,
}

/// LOG-penalized least squares `½‖y − Xβ‖² + λ Ω(β)` by ADMM over the paths
/// of a path decomposition.
///
/// Every path `ℓ` gets its own copy `β_ℓ` supported on the path, and the
/// fit uses `Σ_ℓ β_ℓ`. The `γ` step is a ridge-type solve whose `n × n`
/// system `I + ρ⁻¹ Σ_ℓ X_ℓ X_ℓᵀ` is factored once; the `β` step is the exact
/// path prox of each copy.
pub fn admm_regression(
    y: &[f64],
    x: &DMatrix<f64>,
    h: &Hierarchy,
    pd: &PathDecomposition,
    lambda: f64,
    w: &[f64],
    opts: AdmmOptions,
) -> Result<AdmmResult, SolverError> {
    let n = y.len();
    if x.nrows() != n || x.ncols() != h.p() {
        return Err(SolverError::Dimension(format!(
            "X is {}×{}, expected {n}×{}",
            x.nrows(),
            x.ncols(),
            h.p()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ProxError::BadLambda(lambda).into());
    }
    let rho = opts.rho;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(SolverError::Dimension(format!("rho must be positive, got {rho}")));
    }
    let blocks = path_blocks(h, pd, w)?;
    let xs: Vec<DMatrix<f64>> = blocks.iter().map(|b| x.select_columns(&b.order)).collect();
    let yv = DVector::from_column_slice(y);

    let mut a = DMatrix::<f64>::identity(n, n);
    for xl in &xs {
        a += (xl * xl.transpose()) / rho;
    }
    let chol = a.cholesky().ok_or(SolverError::Factorization)?;
    let mut my = DVector::<f64>::zeros(n);
    for xl in &xs {
        my += xl * xl.tr_mul(&yv);
    }
    my /= rho;

    let mut beta: Vec<DVector<f64>> = blocks.iter().map(|b| DVector::zeros(b.order.len())).collect();
    let mut gamma = beta.clone();
    let mut u = beta.clone();
    let threshold = opts.tol * (1.0 + yv.norm());
    let mut primal_residuals = Vec::new();
    let mut dual_residuals = Vec::new();
    let mut iterations = 0;

    for it in 1..=opts.max_iters {
        let c: Vec<DVector<f64>> = beta.iter().zip(&u).map(|(b, ul)| b + ul / rho).collect();
        let mut rhs = my.clone();
        for (xl, cl) in xs.iter().zip(&c) {
            rhs += xl * cl;
        }
        let delta = chol.solve(&rhs);
        let r = &yv - delta;
        let mut primal = 0.0;
        let mut dual = 0.0;
        for l in 0..blocks.len() {
            gamma[l] = &c[l] + xs[l].tr_mul(&r) / rho;
            let v = &gamma[l] - &u[l] / rho;
            let sol = prox_log_path(v.as_slice(), &blocks[l].sizes, lambda / rho, &blocks[l].weights)?;
            let next = DVector::from_vec(sol.beta);
            dual += (&next - &beta[l]).norm_squared();
            let gap = &next - &gamma[l];
            primal += gap.norm_squared();
            u[l] += rho * gap;
            beta[l] = next;
        }
        let (primal, dual) = (primal.sqrt(), rho * dual.sqrt());
        if !(primal.is_finite() && dual.is_finite()) {
            return Err(SolverError::NonFinite { iteration: it });
        }
        primal_residuals.push(primal);
        dual_residuals.push(dual);
        if primal <= threshold && dual <= threshold {
            iterations = it;
            break;
        }
    }

    let mut total = vec![0.0; h.p()];
    for (b, bl) in blocks.iter().zip(&beta) {
        for (&i, &v) in b.order.iter().zip(bl.iter()) {
            total[i] += v;
        }
    }
    if iterations == 0 {
        return Err(SolverError::NotConverged { iterations: opts.max_iters, beta: total });
    }

    // Each copy is a path-prox output, so its path penalty is exact.
    let mut penalty = 0.0;
    for (l, b) in blocks.iter().enumerate() {
        let v = &gamma[l] - &u[l] / rho;
        let z: Vec<f64> = block_sq(v.as_slice(), &b.sizes);
        penalty += LogPathKnots::compute(&z, &b.weights)?.penalty(lambda / rho);
    }
    let fit = &yv - x * DVector::from_column_slice(&total);
    let objective = 0.5 * fit.norm_squared() + lambda * penalty;

    Ok(AdmmResult {
        beta: total,
        objective,
        iterations,
        state: AdmmState {
            order: blocks.iter().map(|b| b.order.clone()).collect(),
            beta: beta.into_iter().map(|v| v.as_slice().to_vec()).collect(),
            gamma: gamma.into_iter().map(|v| v.as_slice().to_vec()).collect(),
            u: u.into_iter().map(|v| v.as_slice().to_vec()).collect(),
            rho,
            primal_residuals,
            dual_residuals,
        },
    })
}

fn block_sq(v: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let z = v[start..start + s].iter().map(|x| x * x).sum();
            start += s;
            z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{fixtures::interaction3, group_structure_log, path_decompose, WeightRule};
    use crate::prox::registry::{build, Algorithm, ProxSetup, Regularizer};
    use crate::prox::{prox_log_path_bcd, BcdOptions};
    use crate::solvers::{proximal_gradient, LeastSquares, PgOptions};

    #[test]
    fn identity_design_is_the_prox() {
        let h = interaction3();
        let pd = path_decompose(&h);
        let w = group_structure_log(&h, &WeightRule::SqrtSize).unwrap().weights();
        let y = vec![1.2, -0.7, 0.4, 2.0, -1.5, 0.3];
        let x = DMatrix::identity(6, 6);
        let res = admm_regression(&y, &x, &h, &pd, 0.4, &w, AdmmOptions { tol: 1e-11, ..Default::default() }).unwrap();
        let direct = prox_log_path_bcd(&y, &h, &pd, 0.4, &w, BcdOptions::default()).unwrap();
        for (a, b) in res.beta.iter().zip(&direct.beta) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn matches_proximal_gradient() {
        let h = interaction3();
        let pd = path_decompose(&h);
        let w = group_structure_log(&h, &WeightRule::SqrtSize).unwrap().weights();
        let x = DMatrix::from_fn(9, 6, |i, j| (((i * 5 + j * 11) % 7) as f64 - 3.0) / 2.0 + if i == j { 1.0 } else { 0.0 });
        let y: Vec<f64> = (0..9).map(|i| ((i * 3) % 5) as f64 - 1.5).collect();
        let lambda = 0.8;
        let res = admm_regression(&y, &x, &h, &pd, lambda, &w, AdmmOptions { tol: 1e-11, ..Default::default() }).unwrap();
        let prox = build(Regularizer::Log, Algorithm::PathBcd, &ProxSetup::new(h.clone())).unwrap();
        let loss = LeastSquares::new(x, y).unwrap();
        let pg = proximal_gradient(
            &loss,
            prox.as_ref(),
            lambda,
            &[0.0; 6],
            PgOptions { tol: 1e-15, max_iters: 200_000, accelerate: true },
        )
        .unwrap();
        let rel = (res.objective - pg.final_objective()).abs() / pg.final_objective();
        assert!(rel < 1e-6, "admm {} pg {}", res.objective, pg.final_objective());
        assert!(res.state.primal_residuals.len() == res.iterations);
    }
}
