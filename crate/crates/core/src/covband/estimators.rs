use super::{bandwidth, CovError, SubdiagonalView, SymMatrix};
use crate::prox::{gl_path_scales, mgl_scales, mgl_weights, BcdOptions, LogPathKnots, MglWeights, ProxError};

#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub sigma_hat: SymMatrix,
    pub bandwidth: usize,
    pub lambda: f64,
    /// Knot subdiagonals (LOG only).
    pub knots: Vec<usize>,
}

/// A banding estimator, reduced to per-subdiagonal scale factors.
pub trait CovEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    /// `out[k][m − 1]` is the factor on subdiagonal `m` at `lambdas[k]`,
    /// given `z[m − 1] = ‖S_{s_m}‖²_F`.
    fn scale_path(&self, z: &[f64], lambdas: &[f64]) -> Result<Vec<Vec<f64>>, CovError>;

    fn knots(&self, _z: &[f64], _lambda: f64) -> Result<Vec<usize>, CovError> {
        Ok(Vec::new())
    }

    fn estimate(&self, s: &SymMatrix, lambda: f64) -> Result<CovEstimate, CovError> {
        check_lambda(lambda)?;
        let view = SubdiagonalView::new(s.order());
        let z = view.norms_sq(s);
        let scales = self.scale_path(&z, &[lambda])?.pop().expect("one lambda");
        let sigma_hat = view.apply_scales(s, &scales);
        Ok(CovEstimate {
            bandwidth: bandwidth(&sigma_hat),
            sigma_hat,
            lambda,
            knots: self.knots(&z, lambda)?,
        })
    }
}

fn check_lambda(lambda: f64) -> Result<(), CovError> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(ProxError::BadLambda(lambda).into())
    }
}

fn check_all(lambdas: &[f64]) -> Result<(), CovError> {
    lambdas.iter().try_for_each(|&l| check_lambda(l))
}

fn depth_of(z: &[f64]) -> SubdiagonalView {
    SubdiagonalView::new(z.len() + 1)
}

/// Latent overlapping group lasso on the ancestor groups `s_{1:m}` with
/// weights `√|s_{1:m}|`. Knots are computed once per input and shared by
/// every λ.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogBanding;

impl CovEstimator for LogBanding {
    fn name(&self) -> &'static str {
        "log"
    }

    fn scale_path(&self, z: &[f64], lambdas: &[f64]) -> Result<Vec<Vec<f64>>, CovError> {
        check_all(lambdas)?;
        if z.is_empty() {
            return Ok(vec![Vec::new(); lambdas.len()]);
        }
        let knots = LogPathKnots::compute(z, &depth_of(z).cumulative_weights())?;
        Ok(lambdas.iter().map(|&l| knots.scales(l)).collect())
    }

    fn knots(&self, z: &[f64], lambda: f64) -> Result<Vec<usize>, CovError> {
        if z.is_empty() {
            return Ok(Vec::new());
        }
        let knots = LogPathKnots::compute(z, &depth_of(z).cumulative_weights())?;
        Ok(knots.knots_at(lambda).to_vec())
    }
}

/// Group lasso on the descendant groups `s_{ℓ:p−1}` with weights `√|s_ℓ|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GlBanding;

impl CovEstimator for GlBanding {
    fn name(&self) -> &'static str {
        "gl"
    }

    fn scale_path(&self, z: &[f64], lambdas: &[f64]) -> Result<Vec<Vec<f64>>, CovError> {
        check_all(lambdas)?;
        let w = depth_of(z).node_weights();
        Ok(lambdas.iter().map(|&l| gl_path_scales(z, l, &w).0).collect())
    }
}

/// Modified group lasso: weight `√|s_ℓ|/(m − ℓ + 1)` on `s_m` inside group
/// `s_{ℓ:p−1}`, unless a custom table is given.
#[derive(Debug, Clone, Default)]
pub struct MglBanding {
    pub weights: Option<MglWeights>,
    pub opts: BcdOptions,
}

impl MglBanding {
    fn table(&self, z: &[f64]) -> Result<MglWeights, CovError> {
        match &self.weights {
            Some(w) if w.depth() == z.len() => Ok(w.clone()),
            Some(w) => Err(CovError::OrderMismatch(w.depth() + 1, z.len() + 1)),
            None => Ok(mgl_weights(&depth_of(z).sizes())?),
        }
    }
}

impl CovEstimator for MglBanding {
    fn name(&self) -> &'static str {
        "mgl"
    }

    fn scale_path(&self, z: &[f64], lambdas: &[f64]) -> Result<Vec<Vec<f64>>, CovError> {
        check_all(lambdas)?;
        if z.is_empty() {
            return Ok(vec![Vec::new(); lambdas.len()]);
        }
        let mw = self.table(z)?;
        lambdas.iter().map(|&l| Ok(mgl_scales(z, l, &mw, self.opts)?.0)).collect()
    }
}

pub fn estimate_log(s: &SymMatrix, lambda: f64) -> Result<CovEstimate, CovError> {
    LogBanding.estimate(s, lambda)
}

pub fn estimate_gl(s: &SymMatrix, lambda: f64) -> Result<CovEstimate, CovError> {
    GlBanding.estimate(s, lambda)
}

pub fn estimate_mgl(s: &SymMatrix, lambda: f64) -> Result<CovEstimate, CovError> {
    MglBanding::default().estimate(s, lambda)
}

pub fn estimate_mgl_with(s: &SymMatrix, lambda: f64, mw: &MglWeights) -> Result<CovEstimate, CovError> {
    MglBanding { weights: Some(mw.clone()), opts: BcdOptions::default() }.estimate(s, lambda)
}

type Builder = fn() -> Box<dyn CovEstimator>;

static ESTIMATORS: &[(&str, Builder)] = &[
    ("gl", || Box::new(GlBanding)),
    ("mgl", || Box::new(MglBanding::default())),
    ("log", || Box::new(LogBanding)),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    ESTIMATORS.iter().map(|(n, _)| *n)
}

pub fn build(name: &str) -> Result<Box<dyn CovEstimator>, CovError> {
    ESTIMATORS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, b)| b())
        .ok_or_else(|| CovError::UnknownEstimator(name.to_string()))
}

/// Bandwidth of the estimate with the given subdiagonal scales, without
/// building the matrix.
pub fn scaled_bandwidth(z: &[f64], scales: &[f64]) -> usize {
    (0..z.len()).rev().find(|&k| scales[k] != 0.0 && z[k] > 0.0).map_or(0, |k| k + 1)
}

/// Smallest λ at which the estimate is diagonal, by doubling and bisection
/// to relative precision 1e-12. Zero when `S` is already diagonal.
pub fn lambda_max(est: &dyn CovEstimator, z: &[f64]) -> Result<f64, CovError> {
    let k = |l: f64| -> Result<usize, CovError> {
        let sc = est.scale_path(z, &[l])?.pop().expect("one lambda");
        Ok(scaled_bandwidth(z, &sc))
    };
    if k(0.0)? == 0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while k(hi)? > 0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if k(mid)? > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::{prox_gl_path, prox_log_path, verify_log_optimality, prox_log_path_with_latents, log_path_groups};

    fn toeplitz6() -> SymMatrix {
        SymMatrix::toeplitz(&[1.0, 0.5, 0.25, 0.0, 0.0, 0.0]).unwrap()
    }

    fn via_prox(s: &SymMatrix, beta: &[f64]) -> SymMatrix {
        let v = SubdiagonalView::new(s.order());
        let diag: Vec<f64> = (0..s.order()).map(|i| s.get(i, i)).collect();
        v.scatter(&diag, beta).unwrap()
    }

    fn close(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
        a.frobenius_distance(b).unwrap() <= tol
    }

    #[test]
    fn log_matches_vector_prox() {
        let s = toeplitz6();
        let v = SubdiagonalView::new(6);
        let est = estimate_log(&s, 0.05).unwrap();
        let y = v.gather(&s);
        let w = v.cumulative_weights();
        let sol = prox_log_path(&y, &v.sizes(), 0.05, &w).unwrap();
        assert!(close(&est.sigma_hat, &via_prox(&s, &sol.beta), 1e-10));
        assert_eq!(est.knots, sol.knots);
        let lat = prox_log_path_with_latents(&y, &v.sizes(), 0.05, &w).unwrap();
        let gs = log_path_groups(&v.sizes(), &w).unwrap();
        assert!(verify_log_optimality(&y, &lat, &gs, 0.05, 1e-10).ok);
    }

    #[test]
    fn gl_matches_vector_prox() {
        let s = toeplitz6();
        let v = SubdiagonalView::new(6);
        let sol = prox_gl_path(&v.gather(&s), &v.sizes(), 0.05, &v.node_weights()).unwrap();
        assert!(close(&estimate_gl(&s, 0.05).unwrap().sigma_hat, &via_prox(&s, &sol.beta), 1e-10));
    }

    #[test]
    fn extremes() {
        let s = toeplitz6();
        for est in names().map(|n| build(n).unwrap()) {
            assert_eq!(est.estimate(&s, 0.0).unwrap().sigma_hat, s, "{}", est.name());
            let big = est.estimate(&s, 1e3).unwrap();
            assert_eq!(big.bandwidth, 0);
            for i in 0..6 {
                assert_eq!(big.sigma_hat.get(i, i), 1.0);
            }
        }
        let off = (s.frobenius().powi(2) - 6.0).sqrt();
        assert_eq!(estimate_log(&s, off * 1.0001).unwrap().bandwidth, 0);
    }

    #[test]
    fn gl_two_by_two() {
        let s = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let est = estimate_gl(&s, 0.5).unwrap();
        // ‖off-diagonal‖ = √2, threshold 0.5·√2
        assert!((est.sigma_hat.get(0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(est.sigma_hat.get(1, 1), 3.0);
    }

    #[test]
    fn uniform_mgl_is_gl() {
        let s = toeplitz6();
        let v = SubdiagonalView::new(6);
        let mw = MglWeights::uniform(&v.node_weights()).unwrap();
        for lambda in [0.01, 0.05, 0.1, 0.3] {
            let a = estimate_mgl_with(&s, lambda, &mw).unwrap();
            let b = estimate_gl(&s, lambda).unwrap();
            assert!(close(&a.sigma_hat, &b.sigma_hat, 1e-10));
        }
    }

    #[test]
    fn lambda_max_is_the_diagonal_threshold() {
        let s = toeplitz6();
        let z = SubdiagonalView::new(6).norms_sq(&s);
        for name in names() {
            let est = build(name).unwrap();
            let lm = lambda_max(est.as_ref(), &z).unwrap();
            assert_eq!(est.estimate(&s, lm).unwrap().bandwidth, 0, "{name}");
            assert!(est.estimate(&s, lm * (1.0 - 1e-9)).unwrap().bandwidth > 0, "{name}");
        }
        assert_eq!(lambda_max(&LogBanding, &[0.0, 0.0]).unwrap(), 0.0);
    }
}
