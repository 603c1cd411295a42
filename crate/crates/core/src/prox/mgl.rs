use super::{
    apply_block_scales, block_norms_sq, check_lambda, check_sizes, BcdOptions, Certificate, GlProxSolution, ProxError,
};

/// Lower-triangular weight table `w_{ℓ,m}`, `0 ≤ ℓ ≤ m < D`, for the
/// modified group lasso on a path.
#[derive(Debug, Clone, PartialEq)]
pub struct MglWeights {
    rows: Vec<Vec<f64>>,
}

impl MglWeights {
    /// `rows[ℓ][m − ℓ] = w_{ℓ,m}`; every row `ℓ` must have `D − ℓ` positive entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ProxError> {
        let d = rows.len();
        if d == 0 {
            return Err(ProxError::BadSizes);
        }
        for (l, row) in rows.iter().enumerate() {
            if row.len() != d - l {
                return Err(ProxError::WeightCount { expected: d - l, got: row.len() });
            }
            if row.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(ProxError::BadWeight { index: l });
            }
        }
        Ok(Self { rows })
    }

    /// `w_{ℓ,m} = c_ℓ` for all `m`; the penalty then reduces to the GL path penalty.
    pub fn uniform(c: &[f64]) -> Result<Self, ProxError> {
        let d = c.len();
        Self::from_rows((0..d).map(|l| vec![c[l]; d - l]).collect())
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, l: usize, m: usize) -> f64 {
        self.rows[l][m - l]
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.rows[l]
    }
}

/// Standard weights `w_{ℓ,m} = sqrt(|s_ℓ|)/(m − ℓ + 1)`.
pub fn mgl_weights(sizes: &[usize]) -> Result<MglWeights, ProxError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(ProxError::BadSizes);
    }
    let d = sizes.len();
    let rows = (0..d)
        .map(|l| {
            let base = (sizes[l] as f64).sqrt();
            (l..d).map(|m| base / (m - l + 1) as f64).collect()
        })
        .collect();
    MglWeights::from_rows(rows)
}

/// Per-node scale factors of the mGL prox on a path, from squared node norms `z`.
///
/// One pass sweeps from the deepest group to the root. At depth `i` the
/// group `s_i ∪ … ∪ s_D` either vanishes (when `λ² ≥ Σ_m ‖r_m‖²/w_{i,m}²`
/// for the current residual `r`) or each node is scaled by `v/(w_{i,m}² + v)`
/// where `v > 0` solves `Σ_m w_{i,m}² ‖r_m‖²/(w_{i,m}² + v)² = λ²`.
///
/// A single pass is exact when the weights are constant within each group.
/// With weights that vary inside a group it is only the first pass of block
/// coordinate descent on the dual, so passes repeat until the BCD stopping
/// rule holds. Returns the scales, the weighted dual norm of each group and
/// the number of passes.
pub fn mgl_scales(
    z: &[f64],
    lambda: f64,
    mw: &MglWeights,
    opts: BcdOptions,
) -> Result<(Vec<f64>, Vec<f64>, usize), ProxError> {
    let sweep = mgl_sweep(z, lambda, mw, opts)?;
    Ok((sweep.scale, sweep.dual_norms, sweep.passes))
}

struct Sweep {
    scale: Vec<f64>,
    dual_norms: Vec<f64>,
    /// `dual[i][m − i]`: dual block of group `i` on node `m`, as a multiple of `y_{s_m}`.
    dual: Vec<Vec<f64>>,
    passes: usize,
}

fn mgl_sweep(z: &[f64], lambda: f64, mw: &MglWeights, opts: BcdOptions) -> Result<Sweep, ProxError> {
    let d = z.len();
    mgl_sweep_from(z, lambda, mw, opts, (0..d).map(|i| vec![0.0; d - i]).collect())
}

fn mgl_sweep_from(
    z: &[f64],
    lambda: f64,
    mw: &MglWeights,
    opts: BcdOptions,
    mut dual: Vec<Vec<f64>>,
) -> Result<Sweep, ProxError> {
    let d = z.len();
    let mut dual_norms = vec![0.0; d];
    if lambda == 0.0 {
        dual.iter_mut().for_each(|row| row.fill(0.0));
        return Ok(Sweep { scale: vec![1.0; d], dual_norms, dual, passes: 1 });
    }
    let lam2 = lambda * lambda;
    // all coordinates of node m move by |Δscale_m| · max|y_{s_m}| ≤ |Δscale_m| · sqrt(z_m)
    let y_max = z.iter().fold(0.0f64, |m, v| m.max(v.sqrt()));
    let threshold = opts.tol * (1.0 + y_max);
    let root: Vec<f64> = z.iter().map(|v| v.sqrt()).collect();
    let mut scratch = PassScratch::with_capacity(d);
    let mut accel = Anderson::new(ANDERSON_DEPTH);
    let mut scale = scale_of(&dual);
    let mut x = flatten(&dual, &root);

    for pass in 1..=opts.max_cycles {
        let start = scale.clone();
        one_pass(z, lam2, mw, &mut dual, &mut scale, &mut dual_norms, &mut scratch)?;
        let change = (0..d).fold(0.0f64, |acc, m| acc.max((scale[m] - start[m]).abs() * root[m]));
        if change <= threshold {
            return Ok(Sweep { scale, dual_norms, dual, passes: pass });
        }
        let g = flatten(&dual, &root);
        if let Some(next) = accel.step(&x, &g) {
            unflatten(&next, &root, &mut dual);
            scale = scale_of(&dual);
            x = next;
        } else {
            x = g;
        }
    }
    Err(ProxError::NotConverged { cycles: opts.max_cycles, beta: scale })
}

/// History length of the Anderson extrapolation between passes.
const ANDERSON_DEPTH: usize = 8;

struct PassScratch {
    a: Vec<f64>,
    w2: Vec<f64>,
    coef: Vec<f64>,
}

impl PassScratch {
    fn with_capacity(d: usize) -> Self {
        Self { a: Vec::with_capacity(d), w2: Vec::with_capacity(d), coef: Vec::with_capacity(d) }
    }
}

/// One backward pass of dual block coordinate descent, deepest group first.
fn one_pass(
    z: &[f64],
    lam2: f64,
    mw: &MglWeights,
    dual: &mut [Vec<f64>],
    scale: &mut [f64],
    dual_norms: &mut [f64],
    s: &mut PassScratch,
) -> Result<(), ProxError> {
    let d = z.len();
    for i in (0..d).rev() {
        s.a.clear();
        s.w2.clear();
        s.coef.clear();
        let mut ratio = 0.0;
        for m in i..d {
            let c = scale[m] + dual[i][m - i];
            let n = c * c * z[m];
            let ww = mw.get(i, m).powi(2);
            ratio += n / ww;
            s.a.push(ww * n);
            s.w2.push(ww);
            s.coef.push(c);
        }
        if lam2 >= ratio {
            dual[i].copy_from_slice(&s.coef);
            scale[i..].fill(0.0);
            dual_norms[i] = ratio.sqrt();
            continue;
        }
        let v = solve_secular(&s.a, &s.w2, lam2).ok_or(ProxError::RootFinding { depth: i })?;
        let mut norm_sq = 0.0;
        for (k, m) in (i..d).enumerate() {
            scale[m] = s.coef[k] * v / (s.w2[k] + v);
            dual[i][k] = s.coef[k] - scale[m];
            norm_sq += s.a[k] / (s.w2[k] + v).powi(2);
        }
        dual_norms[i] = norm_sq.sqrt();
    }
    Ok(())
}

fn scale_of(dual: &[Vec<f64>]) -> Vec<f64> {
    (0..dual.len()).map(|m| 1.0 - (0..=m).map(|l| dual[l][m - l]).sum::<f64>()).collect()
}

/// Dual coefficients in units of `‖y_{s_m}‖`, so distances are vector norms.
fn flatten(dual: &[Vec<f64>], root: &[f64]) -> Vec<f64> {
    dual.iter().enumerate().flat_map(|(l, row)| row.iter().enumerate().map(move |(k, v)| v * root[l + k])).collect()
}

fn unflatten(x: &[f64], root: &[f64], dual: &mut [Vec<f64>]) {
    let mut it = x.iter();
    for (l, row) in dual.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            let r = root[l + k];
            let xv = *it.next().expect("same shape");
            *v = if r > 0.0 { xv / r } else { 0.0 };
        }
    }
}

/// Anderson extrapolation of a fixed-point map from its last few steps.
///
/// The history is dropped whenever the fixed-point residual grows, which
/// falls back to plain iteration.
struct Anderson {
    depth: usize,
    dx: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
    last_norm: f64,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self { depth, dx: Vec::new(), df: Vec::new(), last: None, last_norm: f64::INFINITY }
    }

    /// Given an iterate `x` and its image `g`, returns the next iterate, or
    /// `None` to take `g` as is.
    fn step(&mut self, x: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        let f: Vec<f64> = g.iter().zip(x).map(|(a, b)| a - b).collect();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > self.last_norm {
            self.dx.clear();
            self.df.clear();
            self.last = None;
        }
        self.last_norm = norm;
        if let Some((px, pf)) = self.last.take() {
            self.dx.push(x.iter().zip(&px).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            if self.dx.len() > self.depth {
                self.dx.remove(0);
                self.df.remove(0);
            }
        }
        self.last = Some((x.to_vec(), f.clone()));
        let k = self.df.len();
        if k == 0 {
            return None;
        }
        let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
        let mut rhs = nalgebra::DVector::<f64>::zeros(k);
        for i in 0..k {
            rhs[i] = dot(&self.df[i], &f);
            for j in 0..=i {
                let v = dot(&self.df[i], &self.df[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let ridge = 1e-10 * gram.trace().max(f64::MIN_POSITIVE);
        for i in 0..k {
            gram[(i, i)] += ridge;
        }
        let gamma = gram.cholesky()?.solve(&rhs);
        let mut next = g.to_vec();
        for i in 0..k {
            for (n, (a, b)) in next.iter_mut().zip(self.dx[i].iter().zip(&self.df[i])) {
                *n -= gamma[i] * (a + b);
            }
        }
        next.iter().all(|v| v.is_finite()).then_some(next)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks the mGL optimality conditions for `beta`.
///
/// A dual decomposition `y − β = Σ_ℓ η_ℓ` is rebuilt from the backward
/// sweep; the check requires `‖W_ℓ⁻¹ η_ℓ‖ ≤ λ` and, where `W_ℓ β ≠ 0`,
/// `W_ℓ⁻¹ η_ℓ = λ W_ℓ β / ‖W_ℓ β‖`, with `W_ℓ` the diagonal weights of group `ℓ`.
pub fn verify_mgl_optimality(
    y: &[f64],
    sizes: &[usize],
    lambda: f64,
    mw: &MglWeights,
    beta: &[f64],
    tol: f64,
) -> Result<Certificate, ProxError> {
    check_lambda(lambda)?;
    check_sizes(sizes, y.len())?;
    check_sizes(sizes, beta.len())?;
    let d = sizes.len();
    let sweep = mgl_sweep(&block_norms_sq(y, sizes), lambda, mw, BcdOptions::with_tol(1e-14))?;
    let mut offsets = vec![0];
    for &s in sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let block = |v: &[f64], m: usize| v[offsets[m]..offsets[m + 1]].to_vec();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();

    let mut worst = 0.0f64;
    // reconstruction: y_m − β_m = Σ_{ℓ ≤ m} η_{ℓ,m}
    for m in 0..d {
        let coef: f64 = (0..=m).map(|l| sweep.dual[l][m - l]).sum();
        let expected: Vec<f64> = block(y, m).iter().map(|v| coef * v).collect();
        let actual: Vec<f64> = block(y, m).iter().zip(block(beta, m)).map(|(a, b)| a - b).collect();
        worst = worst.max(diff(&expected, &actual));
    }
    for l in 0..d {
        let u: Vec<Vec<f64>> = (l..d)
            .map(|m| block(y, m).iter().map(|v| sweep.dual[l][m - l] * v / mw.get(l, m)).collect())
            .collect();
        let u_norm = u.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(u_norm - lambda);
        let wb: Vec<Vec<f64>> = (l..d).map(|m| block(beta, m).iter().map(|v| mw.get(l, m) * v).collect()).collect();
        let wb_norm = wb.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        if wb_norm > 0.0 {
            let gap: f64 = u
                .iter()
                .flatten()
                .zip(wb.iter().flatten())
                .map(|(a, b)| (a - lambda * b / wb_norm).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(gap);
        }
    }
    Ok(Certificate { ok: worst <= tol, worst_violation: worst })
}

/// Root of `g(v) = Σ a_k/(w2_k + v)² − lam2` on `v > 0`, given `g(0) > 0`.
///
/// `g` is convex and decreasing, so Newton from the left end of the bracket
/// approaches the root monotonically; bisection covers any step that leaves
/// the bracket.
fn solve_secular(a: &[f64], w2: &[f64], lam2: f64) -> Option<f64> {
    let g = |v: f64| a.iter().zip(w2).map(|(&a, &w)| a / (w + v).powi(2)).sum::<f64>() - lam2;
    let dg = |v: f64| -2.0 * a.iter().zip(w2).map(|(&a, &w)| a / (w + v).powi(3)).sum::<f64>();
    let mut hi = 1.0;
    while g(hi) >= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    let mut lo = 0.0;
    let mut v = 0.0;
    for _ in 0..1000 {
        let gv = g(v);
        if gv.abs() <= 1e-12 * lam2 {
            return Some(v);
        }
        if gv > 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        if hi - lo <= 1e-14 * (1.0 + v) {
            return Some(v);
        }
        let step = v - gv / dg(v);
        v = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    None
}

/// mGL prox on a path whose nodes occupy consecutive blocks of `y`, with
/// the default stopping rule.
pub fn prox_mgl_path(y: &[f64], sizes: &[usize], lambda: f64, mw: &MglWeights) -> Result<GlProxSolution, ProxError> {
    prox_mgl_path_with(y, sizes, lambda, mw, BcdOptions::default())
}

pub fn prox_mgl_path_with(
    y: &[f64],
    sizes: &[usize],
    lambda: f64,
    mw: &MglWeights,
    opts: BcdOptions,
) -> Result<GlProxSolution, ProxError> {
    check_lambda(lambda)?;
    check_sizes(sizes, y.len())?;
    if mw.depth() != sizes.len() {
        return Err(ProxError::WeightCount { expected: sizes.len(), got: mw.depth() });
    }
    let (scales, dual_norms, passes) = mgl_scales(&block_norms_sq(y, sizes), lambda, mw, opts)?;
    Ok(GlProxSolution { beta: apply_block_scales(y, sizes, &scales), dual_norms, duals: None, cycles: passes })
}

/// `Σ_ℓ sqrt(Σ_{m ≥ ℓ} w_{ℓ,m}² ‖β_{s_m}‖²)`.
pub fn mgl_penalty(beta: &[f64], sizes: &[usize], mw: &MglWeights) -> f64 {
    let z = block_norms_sq(beta, sizes);
    (0..z.len())
        .map(|l| (l..z.len()).map(|m| mw.get(l, m).powi(2) * z[m]).sum::<f64>().sqrt())
        .sum()
}

/// `½‖y − β‖² + λ · mgl_penalty(β)`.
pub fn mgl_objective(y: &[f64], beta: &[f64], sizes: &[usize], lambda: f64, mw: &MglWeights) -> f64 {
    let fit: f64 = y.iter().zip(beta).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * fit + lambda * mgl_penalty(beta, sizes, mw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::prox_gl_path;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_weights() {
        let mw = mgl_weights(&[1, 1, 1]).unwrap();
        let expect = [[1.0, 0.5, 1.0 / 3.0], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]];
        for l in 0..3 {
            for m in l..3 {
                assert!((mw.get(l, m) - expect[l][m]).abs() < 1e-15);
            }
        }
        assert_eq!(mgl_weights(&[4]).unwrap().get(0, 0), 2.0);
        assert_eq!(mgl_weights(&[4, 1]).unwrap().get(0, 0), 2.0);
        assert!(mgl_weights(&[]).is_err());
    }

    #[test]
    fn zero_lambda_passthrough() {
        let y = [0.5, -1.0, 2.0];
        let sol = prox_mgl_path(&y, &[2, 1], 0.0, &mgl_weights(&[2, 1]).unwrap()).unwrap();
        assert_eq!(sol.beta, y);
    }

    #[test]
    fn uniform_weights_match_gl() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = rng.random_range(1..12);
            let sizes: Vec<usize> = (0..d).map(|_| rng.random_range(1..4)).collect();
            let p: usize = sizes.iter().sum();
            let y: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
            let lambda = rng.random_range(0.0..1.0);
            let mgl = prox_mgl_path(&y, &sizes, lambda, &MglWeights::uniform(&c).unwrap()).unwrap();
            let gl = prox_gl_path(&y, &sizes, lambda, &c).unwrap();
            for (a, b) in mgl.beta.iter().zip(&gl.beta) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn perturbations_do_not_improve_objective() {
        let d = 20;
        let y: Vec<f64> = (0..d).map(|i| 1.0 - i as f64 / d as f64).collect();
        let sizes = vec![1; d];
        let mw = mgl_weights(&sizes).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for lambda in [0.1, 0.4, 0.9] {
            let beta = prox_mgl_path(&y, &sizes, lambda, &mw).unwrap().beta;
            let base = mgl_objective(&y, &beta, &sizes, lambda, &mw);
            for _ in 0..2000 {
                let moved: Vec<f64> = beta.iter().map(|b| b + rng.random_range(-1e-4..1e-4)).collect();
                assert!(mgl_objective(&y, &moved, &sizes, lambda, &mw) >= base - 1e-12);
            }
        }
    }

    #[test]
    fn certificate_accepts_solution_and_rejects_input() {
        let y = [3.0, 0.2, 1.0, -0.4, 0.7];
        let sizes = [1, 2, 1, 1];
        let mw = mgl_weights(&sizes).unwrap();
        for lambda in [0.05, 0.3, 0.7, 2.0] {
            let sol = prox_mgl_path(&y, &sizes, lambda, &mw).unwrap();
            let cert = verify_mgl_optimality(&y, &sizes, lambda, &mw, &sol.beta, 1e-9).unwrap();
            assert!(cert.ok, "lambda {lambda}: {cert:?}");
        }
        let cert = verify_mgl_optimality(&y, &sizes, 0.3, &mw, &y, 1e-9).unwrap();
        assert!(!cert.ok);
    }

    #[test]
    fn uniform_weights_need_one_pass() {
        let y = [3.0, 0.2, 1.0, -0.4, 0.7];
        let mw = MglWeights::uniform(&[1.0, 1.5, 0.5, 2.0]).unwrap();
        let sol = prox_mgl_path(&y, &[1, 2, 1, 1], 0.3, &mw).unwrap();
        assert!(sol.cycles <= 2);
    }

    #[test]
    fn weighted_dual_norms_bounded() {
        let y = [3.0, 0.2, 1.0, -0.4];
        let mw = mgl_weights(&[1, 2, 1]).unwrap();
        let sol = prox_mgl_path(&y, &[1, 2, 1], 0.7, &mw).unwrap();
        assert!(sol.dual_norms.iter().all(|&n| n <= 0.7 + 1e-9));
    }
}
