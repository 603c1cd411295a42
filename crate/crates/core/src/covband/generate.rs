use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{min_eigenvalue, CovError, SymMatrix};

/// Toeplitz matrix with lag-`m` entry `(K − m)/K` for `m < K` and zero
/// beyond, so the true bandwidth is `K − 1`. Requires `2 ≤ K < p`.
pub fn gen_moving_average(p: usize, k: usize) -> Result<SymMatrix, CovError> {
    if k < 2 || k >= p {
        return Err(CovError::BadBandwidth { p, k, reason: "need 2 ≤ K < p" });
    }
    let col: Vec<f64> = (0..p).map(|m| if m < k { (k - m) as f64 / k as f64 } else { 0.0 }).collect();
    SymMatrix::toeplitz(&col)
}

/// Staircase Toeplitz pattern: five steps of length `K/5` at heights
/// 1, 0.8, 0.6, 0.4, 0.2, then zeros, with the diagonal raised so the
/// smallest eigenvalue is at least 0.01.
pub fn gen_stair(p: usize, k: usize) -> Result<SymMatrix, CovError> {
    if k == 0 || k % 5 != 0 {
        return Err(CovError::BadBandwidth { p, k, reason: "K must be a positive multiple of 5" });
    }
    if k >= p {
        return Err(CovError::BadBandwidth { p, k, reason: "need K < p" });
    }
    let step = k / 5;
    let col: Vec<f64> = (0..p).map(|m| if m < k { (5 - m / step) as f64 / 5.0 } else { 0.0 }).collect();
    let mut delta = SymMatrix::toeplitz(&col)?;
    let shift = 0.01 - min_eigenvalue(&delta);
    if shift > 0.0 {
        delta.add_to_diagonal(shift);
    }
    Ok(delta)
}

/// `n` independent rows from `N(0, Σ)`, via a Cholesky factor of `Σ`.
///
/// A failed factorization is retried once with `1e-10 · tr(Σ)/p` added to
/// the diagonal. The generator is ChaCha8 seeded with `seed`.
pub fn sample_gaussian(sigma: &SymMatrix, n: usize, seed: u64) -> Result<DMatrix<f64>, CovError> {
    let p = sigma.order();
    if sigma.as_matrix().iter().all(|&v| v == 0.0) {
        return Ok(DMatrix::zeros(n, p));
    }
    let m = sigma.as_matrix().clone();
    let l = match m.clone().cholesky() {
        Some(c) => c.unpack(),
        None => {
            let jitter = 1e-10 * m.trace() / p as f64;
            let shifted = m + DMatrix::identity(p, p) * jitter;
            shifted.cholesky().ok_or(CovError::Factorization)?.unpack()
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::<f64>::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    Ok(z * l.transpose())
}
