use rayon::prelude::*;

use super::{fmt_f, median, Config, Experiment, HarnessError, Pattern, Table};
use crate::covband::{
    build_estimator, gen_moving_average, gen_stair, is_psd, lambda_best, lambda_max, log_grid, min_eigenvalue,
    sample_covariance, sample_gaussian, scaled_bandwidth, signal_condition, CovEstimator, ErrorProfile,
    SubdiagonalView, SymMatrix,
};

pub const DEFAULT_K: &[usize] = &[9, 19, 29, 39, 49, 59, 69, 79, 89, 99];
pub const DEFAULT_K_STAIR: &[usize] = &[10, 20, 30, 40, 50, 60, 70, 80, 90, 95];

pub fn population(pattern: Pattern, p: usize, k: usize) -> Result<SymMatrix, HarnessError> {
    Ok(match pattern {
        Pattern::MovingAverage => gen_moving_average(p, k)?,
        Pattern::Stair => gen_stair(p, k)?,
    })
}

/// One replicate: the sample covariance (kept only when asked) and its
/// error profile against the population matrix.
pub struct Replicate {
    pub sample: Option<SymMatrix>,
    pub profile: ErrorProfile,
}

/// Replicate `r` draws `n` rows with seed `seed + r`.
pub fn draw(sigma: &SymMatrix, n: usize, replicates: usize, seed: u64, keep: bool) -> Result<Vec<Replicate>, HarnessError> {
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let data = sample_gaussian(sigma, n, seed.wrapping_add(r as u64))?;
            let s = sample_covariance(&data)?;
            let profile = ErrorProfile::new(&s, sigma)?;
            Ok(Replicate { sample: keep.then_some(s), profile })
        })
        .collect()
}

/// MSE over a log grid anchored at the first replicate's λ_max, and the
/// grid minimizer.
pub struct BestStudy {
    pub lambda_max: f64,
    pub grid: Vec<f64>,
    pub mse: Vec<f64>,
    pub best_index: usize,
    pub lambda_best: f64,
    /// `‖Σ̂ − Σ*‖²_F / p` per replicate at λ_best.
    pub errors_at_best: Vec<f64>,
}

pub fn best_study(
    est: &dyn CovEstimator,
    reps: &[Replicate],
    grid_size: usize,
    grid_ratio: f64,
) -> Result<BestStudy, HarnessError> {
    let p = reps[0].profile.norms_sq().len() as f64 + 1.0;
    let lmax = lambda_max(est, reps[0].profile.norms_sq())?;
    let grid = if lmax > 0.0 { log_grid(lmax, grid_ratio, grid_size) } else { vec![0.0] };
    let errors: Vec<Vec<f64>> = reps
        .par_iter()
        .map(|r| {
            let scales = est.scale_path(r.profile.norms_sq(), &grid)?;
            Ok(scales.iter().map(|c| r.profile.squared_error(c) / p).collect())
        })
        .collect::<Result<_, HarnessError>>()?;
    let mse: Vec<f64> =
        (0..grid.len()).map(|k| errors.iter().map(|e| e[k]).sum::<f64>() / errors.len() as f64).collect();
    let lambda_best = lambda_best(&grid, &mse)?;
    let best_index = grid.iter().position(|&l| l == lambda_best).expect("from the grid");
    Ok(BestStudy {
        lambda_max: lmax,
        errors_at_best: errors.iter().map(|e| e[best_index]).collect(),
        grid,
        mse,
        best_index,
        lambda_best,
    })
}

fn grid_of(cfg: &Config, pattern: Pattern) -> Vec<usize> {
    match pattern {
        Pattern::MovingAverage => cfg.k.clone().unwrap_or_else(|| DEFAULT_K.to_vec()),
        Pattern::Stair => cfg.k_stair.clone().unwrap_or_else(|| DEFAULT_K_STAIR.to_vec()),
    }
}

fn estimators(cfg: &Config) -> Result<Vec<Box<dyn CovEstimator>>, HarnessError> {
    let names = cfg.estimators.clone().unwrap_or_else(|| vec!["gl".into(), "mgl".into(), "log".into()]);
    names.iter().map(|n| Ok(build_estimator(n)?)).collect()
}

fn note_bandwidth(t: &mut Table) {
    t.meta("bandwidth", "k is the generator parameter; the true bandwidth (largest nonzero lag) is k - 1");
}

/// LOG estimator at `λ = x·sqrt(log p / n)` on moving-average models.
pub struct RateCheck;

impl Experiment for RateCheck {
    fn name(&self) -> &'static str {
        "rate-check"
    }

    fn run(&self, cfg: &Config) -> Result<Table, HarnessError> {
        let ps = cfg.p.clone().unwrap_or_else(|| vec![100, 200, 400]);
        let ks = grid_of(cfg, Pattern::MovingAverage);
        let n = cfg.n.unwrap_or(50);
        let reps = cfg.replicates.unwrap_or(50);
        let seed = cfg.seed.unwrap_or(1);
        let x = cfg.x.unwrap_or(2.0);
        let est = build_estimator("log")?;
        let mut t = Table::new(&[
            "p",
            "k",
            "bandwidth",
            "lambda",
            "mse_mean",
            "mse_median",
            "mse_mean_over_logp",
            "mse_median_over_logp",
            "frac_khat_le_k",
            "frac_khat_eq_k",
            "signal_condition",
        ]);
        note_bandwidth(&mut t);
        t.meta("lambda", format!("{x} * sqrt(log p / n)"));
        for &p in &ps {
            let lambda = x * ((p as f64).ln() / n as f64).sqrt();
            for &k in &ks {
                let sigma = population(Pattern::MovingAverage, p, k)?;
                let band = k - 1;
                let draws = draw(&sigma, n, reps, seed, false)?;
                let mut errs = Vec::with_capacity(reps);
                let (mut le, mut eq) = (0usize, 0usize);
                for r in &draws {
                    let z = r.profile.norms_sq();
                    let sc = est.scale_path(z, &[lambda])?.pop().expect("one lambda");
                    errs.push(r.profile.squared_error(&sc) / p as f64);
                    let kh = scaled_bandwidth(z, &sc);
                    le += usize::from(kh <= band);
                    eq += usize::from(kh == band);
                }
                let mean = errs.iter().sum::<f64>() / reps as f64;
                let med = median(&errs);
                let logp = (p as f64).ln();
                t.push(vec![
                    p.to_string(),
                    k.to_string(),
                    band.to_string(),
                    fmt_f(lambda),
                    fmt_f(mean),
                    fmt_f(med),
                    fmt_f(mean / logp),
                    fmt_f(med / logp),
                    fmt_f(le as f64 / reps as f64),
                    fmt_f(eq as f64 / reps as f64),
                    signal_condition(&sigma, band, lambda).to_string(),
                ]);
            }
        }
        Ok(t)
    }
}

/// MSE at the grid-best λ for each estimator, pattern and bandwidth.
pub struct MseComparison;

impl Experiment for MseComparison {
    fn name(&self) -> &'static str {
        "mse-comparison"
    }

    fn run(&self, cfg: &Config) -> Result<Table, HarnessError> {
        let p = single_p(cfg)?;
        let n = cfg.n.unwrap_or(50);
        let reps = cfg.replicates.unwrap_or(50);
        let seed = cfg.seed.unwrap_or(1);
        let patterns = cfg.patterns.clone().unwrap_or_else(|| vec![Pattern::MovingAverage, Pattern::Stair]);
        let ests = estimators(cfg)?;
        let (gs, gr) = (cfg.grid_size.unwrap_or(50), cfg.grid_ratio.unwrap_or(1e-4));
        let mut t = Table::new(&[
            "pattern",
            "estimator",
            "p",
            "k",
            "bandwidth",
            "lambda_max",
            "lambda_best",
            "best_index",
            "mse_best",
            "median_best",
        ]);
        note_bandwidth(&mut t);
        t.meta("grid", format!("{gs} log-spaced values in [lambda_max * {gr}, lambda_max]; lambda_max from replicate 0"));
        for &pattern in &patterns {
            for k in grid_of(cfg, pattern) {
                let sigma = population(pattern, p, k)?;
                let draws = draw(&sigma, n, reps, seed, false)?;
                for est in &ests {
                    let st = best_study(est.as_ref(), &draws, gs, gr)?;
                    t.push(vec![
                        pattern.to_string(),
                        est.name().into(),
                        p.to_string(),
                        k.to_string(),
                        (k - 1).to_string(),
                        fmt_f(st.lambda_max),
                        fmt_f(st.lambda_best),
                        st.best_index.to_string(),
                        fmt_f(st.mse[st.best_index]),
                        fmt_f(median(&st.errors_at_best)),
                    ]);
                }
            }
        }
        Ok(t)
    }
}

fn single_p(cfg: &Config) -> Result<usize, HarnessError> {
    match cfg.p.as_deref() {
        None => Ok(100),
        Some([p]) => Ok(*p),
        Some(_) => Err(HarnessError::Setting("this experiment takes a single p".into())),
    }
}

/// Fraction of positive semidefinite estimates at each estimator's λ_best,
/// with the sample covariance (λ = 0) as a reference row.
pub struct PsdDiagnostics;

impl Experiment for PsdDiagnostics {
    fn name(&self) -> &'static str {
        "psd-diagnostics"
    }

    fn run(&self, cfg: &Config) -> Result<Table, HarnessError> {
        let p = single_p(cfg)?;
        let n = cfg.n.unwrap_or(50);
        let reps = cfg.replicates.unwrap_or(50);
        let seed = cfg.seed.unwrap_or(1);
        let patterns = cfg.patterns.clone().unwrap_or_else(|| vec![Pattern::MovingAverage]);
        let ests = estimators(cfg)?;
        let (gs, gr) = (cfg.grid_size.unwrap_or(50), cfg.grid_ratio.unwrap_or(1e-4));
        let mut t = Table::new(&[
            "pattern",
            "estimator",
            "p",
            "k",
            "bandwidth",
            "lambda",
            "psd_fraction",
            "min_eig_min",
            "min_eig_median",
            "min_eig_max",
        ]);
        note_bandwidth(&mut t);
        let view = SubdiagonalView::new(p);
        for &pattern in &patterns {
            for k in grid_of(cfg, pattern) {
                let sigma = population(pattern, p, k)?;
                let draws = draw(&sigma, n, reps, seed, true)?;
                let mut summarize = |name: &str, lambda: f64, mats: Vec<SymMatrix>| {
                    let eig: Vec<f64> = mats.par_iter().map(min_eigenvalue).collect();
                    let psd = mats.iter().filter(|m| is_psd(m)).count();
                    t.push(vec![
                        pattern.to_string(),
                        name.to_string(),
                        p.to_string(),
                        k.to_string(),
                        (k - 1).to_string(),
                        fmt_f(lambda),
                        fmt_f(psd as f64 / mats.len() as f64),
                        fmt_f(eig.iter().copied().fold(f64::INFINITY, f64::min)),
                        fmt_f(median(&eig)),
                        fmt_f(eig.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                    ]);
                };
                let samples: Vec<SymMatrix> = draws.iter().map(|r| r.sample.clone().expect("kept")).collect();
                summarize("sample", 0.0, samples.clone());
                for est in &ests {
                    let st = best_study(est.as_ref(), &draws, gs, gr)?;
                    let mats = samples
                        .par_iter()
                        .map(|s| {
                            let sc = est.scale_path(&view.norms_sq(s), &[st.lambda_best])?.pop().expect("one lambda");
                            Ok(view.apply_scales(s, &sc))
                        })
                        .collect::<Result<Vec<_>, HarnessError>>()?;
                    summarize(est.name(), st.lambda_best, mats);
                }
            }
        }
        Ok(t)
    }
}
