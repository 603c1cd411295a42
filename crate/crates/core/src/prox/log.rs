use super::{
    apply_block_scales, block_norms_sq, check_lambda, check_sizes, check_weights, max_abs, norm,
    shrink_factor, soft, BcdOptions, Certificate, ProxError,
};
use crate::hierarchy::{Group, GroupStructure, Hierarchy, PathDecomposition};

/// Result of a LOG proximal operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProxSolution {
    pub beta: Vec<f64>,
    /// One latent vector per group, aligned with the group's indices.
    /// Only present when requested or when the solver produces them anyway.
    pub latents: Option<Vec<Vec<f64>>>,
    /// Knots `k_1 < … < k_m` (path algorithm only); `k_i` counts path nodes.
    pub knots: Vec<usize>,
    /// Outer cycles (1 for the path algorithm).
    pub cycles: usize,
    /// Times the knot loop condition was evaluated (path algorithm only).
    pub loop_count: usize,
    /// Number of `f(j, k)` evaluations (path algorithm only).
    pub f_updates: usize,
}

/// `f(j, k) = ‖y_{s_{k+1} ∪ … ∪ s_j}‖₂ / sqrt(w_j² − w_k²)` with `w_0 = 0`.
///
/// `j` and `k` count path nodes, so `0 ≤ k < j ≤ D`; nodes occupy
/// consecutive blocks of `y` with the given sizes.
pub fn f_stat(j: usize, k: usize, y: &[f64], w: &[f64], sizes: &[usize]) -> Result<f64, ProxError> {
    check_sizes(sizes, y.len())?;
    check_weights(w, sizes.len())?;
    if !(k < j && j <= sizes.len()) {
        return Err(ProxError::Dimension { expected: sizes.len(), got: j });
    }
    let wk = if k == 0 { 0.0 } else { w[k - 1] };
    let den = w[j - 1] * w[j - 1] - wk * wk;
    if den <= 0.0 {
        return Err(ProxError::WeightsNotIncreasing { index: j - 1 });
    }
    let start: usize = sizes[..k].iter().sum();
    let end: usize = sizes[..j].iter().sum();
    Ok(norm(&y[start..end]) / den.sqrt())
}

fn check_increasing(w: &[f64]) -> Result<(), ProxError> {
    check_weights(w, w.len())?;
    if let Some(index) = (1..w.len()).find(|&i| w[i] <= w[i - 1]) {
        return Err(ProxError::WeightsNotIncreasing { index });
    }
    Ok(())
}

/// Relative tolerance under which two values of `f²` are treated as equal,
/// so that ties created by rounding (e.g. `w_j = sqrt(j)`) resolve to the
/// largest `j`.
const TIE_RTOL: f64 = 1e-12;

/// Output of the knot loop.
#[derive(Debug, Clone, PartialEq)]
struct KnotRun {
    knots: Vec<usize>,
    /// `f(k_i, k_{i-1})²` for every accepted knot.
    averages_sq: Vec<f64>,
    loops: usize,
    f_updates: usize,
}

/// Knot search on squared node norms `z`.
///
/// From the last knot `k`, take the `j > k` maximizing `f(j, k)` (largest
/// `j` on ties) and stop once that maximum is at most `λ`. Without a
/// threshold the loop runs until every node is covered.
fn knot_loop(z: &[f64], w: &[f64], lambda: Option<f64>) -> KnotRun {
    let d = z.len();
    let cut = lambda.map(|l| l * l);
    let mut run = KnotRun { knots: Vec::new(), averages_sq: Vec::new(), loops: 0, f_updates: 0 };
    let mut k = 0;
    loop {
        run.loops += 1;
        if k == d {
            break;
        }
        let wk2 = if k == 0 { 0.0 } else { w[k - 1] * w[k - 1] };
        let mut acc = 0.0;
        let mut top = f64::NEG_INFINITY;
        let mut best = 0.0;
        let mut best_j = k + 1;
        for j in k + 1..=d {
            acc += z[j - 1];
            let f2 = acc / (w[j - 1] * w[j - 1] - wk2);
            run.f_updates += 1;
            // values within rounding of the running maximum count as ties
            if f2 >= top - TIE_RTOL * top.abs() {
                top = top.max(f2);
                best = f2;
                best_j = j;
            }
        }
        if cut.is_some_and(|c| best <= c) {
            break;
        }
        run.knots.push(best_j);
        run.averages_sq.push(best);
        k = best_j;
    }
    run
}

/// Per-node scale factors for the first `m` knots at threshold λ:
/// nodes in knot block `i` are scaled by `1 − λ/f(k_i, k_{i−1})`, the rest by 0.
fn knot_scales(d: usize, knots: &[usize], averages_sq: &[f64], lambda: f64) -> Vec<f64> {
    let mut scales = vec![0.0; d];
    let mut start = 0;
    for (&k, &a2) in knots.iter().zip(averages_sq) {
        let c = shrink_factor(a2.sqrt(), lambda);
        scales[start..k].fill(c);
        start = k;
    }
    scales
}

/// Knots and block averages of the LOG path prox, computed once and reused
/// for any number of thresholds.
///
/// Knot locations do not depend on λ; λ only decides how many of them are
/// used.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPathKnots {
    d: usize,
    w: Vec<f64>,
    run: KnotRun,
}

impl LogPathKnots {
    /// `z[l]` is the squared norm of node `l`; `w` must be strictly increasing.
    pub fn compute(z: &[f64], w: &[f64]) -> Result<Self, ProxError> {
        if z.is_empty() {
            return Err(ProxError::BadSizes);
        }
        if w.len() != z.len() {
            return Err(ProxError::WeightCount { expected: z.len(), got: w.len() });
        }
        check_increasing(w)?;
        Ok(Self { d: z.len(), w: w.to_vec(), run: knot_loop(z, w, None) })
    }

    /// All knots, as if λ were 0 and no block had zero average.
    pub fn all_knots(&self) -> &[usize] {
        &self.run.knots
    }

    /// `f(k_i, k_{i−1})` for every knot.
    pub fn averages(&self) -> Vec<f64> {
        self.run.averages_sq.iter().map(|a| a.sqrt()).collect()
    }

    /// Number of knots in use at λ.
    pub fn active(&self, lambda: f64) -> usize {
        let cut = lambda * lambda;
        self.run.averages_sq.iter().position(|&a| a <= cut).unwrap_or(self.run.knots.len())
    }

    pub fn knots_at(&self, lambda: f64) -> &[usize] {
        &self.run.knots[..self.active(lambda)]
    }

    /// Per-node scale factors at λ.
    pub fn scales(&self, lambda: f64) -> Vec<f64> {
        let m = self.active(lambda);
        knot_scales(self.d, &self.run.knots[..m], &self.run.averages_sq[..m], lambda)
    }

    /// `Ω(β̂)` at λ, from the latent decomposition of the solution:
    /// `Σ_j w_{k_j}² (a_j − a_{j+1})` with `a_{m+1} = λ`.
    pub fn penalty(&self, lambda: f64) -> f64 {
        let m = self.active(lambda);
        let a = self.averages();
        (0..m)
            .map(|j| {
                let next = if j + 1 < m { a[j + 1] } else { lambda };
                self.w[self.run.knots[j] - 1].powi(2) * (a[j] - next)
            })
            .sum()
    }
}

/// Ancestor groups of a path: group `j` is `s_1 ∪ … ∪ s_{j+1}` with weight `w[j]`.
pub fn log_path_groups(sizes: &[usize], w: &[f64]) -> Result<GroupStructure, ProxError> {
    check_weights(w, sizes.len())?;
    let mut end = 0;
    let groups = sizes
        .iter()
        .zip(w)
        .map(|(&s, &weight)| {
            end += s;
            Group { indices: (0..end).collect(), weight }
        })
        .collect();
    Ok(GroupStructure::new(sizes.iter().sum(), groups)?)
}

/// LOG prox on a directed path whose nodes occupy consecutive blocks of `y`.
///
/// `w[j]` weights the group `s_1 ∪ … ∪ s_{j+1}` and must be strictly increasing.
/// Runs in `O(p + D m)` where `m` is the number of knots.
pub fn prox_log_path(y: &[f64], sizes: &[usize], lambda: f64, w: &[f64]) -> Result<LogProxSolution, ProxError> {
    check_lambda(lambda)?;
    check_sizes(sizes, y.len())?;
    if w.len() != sizes.len() {
        return Err(ProxError::WeightCount { expected: sizes.len(), got: w.len() });
    }
    check_increasing(w)?;
    let run = knot_loop(&block_norms_sq(y, sizes), w, Some(lambda));
    let scales = knot_scales(sizes.len(), &run.knots, &run.averages_sq, lambda);
    Ok(LogProxSolution {
        beta: apply_block_scales(y, sizes, &scales),
        latents: None,
        knots: run.knots,
        cycles: 1,
        loop_count: run.loops,
        f_updates: run.f_updates,
    })
}

/// [`prox_log_path`] plus latent vectors for the groups of [`log_path_groups`].
///
/// With `A_j = Σ_{i ≤ j} y_{B_i}/a_i` over the knot blocks `B_i`, the latent
/// of group `k_j` is `A_j (a_j − a_{j+1})`, with `a_{m+1} = λ`; all other
/// latents vanish.
pub fn prox_log_path_with_latents(
    y: &[f64],
    sizes: &[usize],
    lambda: f64,
    w: &[f64],
) -> Result<LogProxSolution, ProxError> {
    let mut sol = prox_log_path(y, sizes, lambda, w)?;
    let z = block_norms_sq(y, sizes);
    let averages: Vec<f64> = {
        let mut out = Vec::with_capacity(sol.knots.len());
        let mut k = 0;
        for &kn in &sol.knots {
            let wk2 = if k == 0 { 0.0 } else { w[k - 1] * w[k - 1] };
            out.push((z[k..kn].iter().sum::<f64>() / (w[kn - 1] * w[kn - 1] - wk2)).sqrt());
            k = kn;
        }
        out
    };
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(sizes.iter().scan(0, |acc, &s| {
            *acc += s;
            Some(*acc)
        }))
        .collect();
    let mut latents: Vec<Vec<f64>> = offsets[1..].iter().map(|&end| vec![0.0; end]).collect();
    let mut a_vec: Vec<f64> = Vec::new();
    let m = sol.knots.len();
    let mut prev = 0;
    for (j, &kn) in sol.knots.iter().enumerate() {
        a_vec.extend(y[offsets[prev]..offsets[kn]].iter().map(|v| v / averages[j]));
        let next = if j + 1 < m { averages[j + 1] } else { lambda };
        let coef = averages[j] - next;
        latents[kn - 1] = a_vec.iter().map(|v| v * coef).collect();
        prev = kn;
    }
    sol.latents = Some(latents);
    Ok(sol)
}

/// Closed-form LOG prox for the two-node path `{1} → {2}` with `w[0]` on
/// `{1}` and `w[1]` on `{1, 2}`; requires `w[0] < w[1]`.
pub fn prox_log_pair(y: [f64; 2], lambda: f64, w: [f64; 2]) -> Result<[f64; 2], ProxError> {
    check_lambda(lambda)?;
    check_increasing(&w)?;
    let gap = (w[1] * w[1] - w[0] * w[0]).sqrt();
    if y[1].abs() >= gap / w[0] * y[0].abs() {
        let c = shrink_factor(norm(&y), lambda * w[1]);
        Ok([c * y[0], c * y[1]])
    } else {
        Ok([soft(y[0], lambda * w[0]), soft(y[1], lambda * gap)])
    }
}

/// Block coordinate descent over the latent vectors, one group per block:
/// `v_g ← S_G(y_g − β_g + v_g, λ w_g)`.
pub fn prox_log_naive_bcd(
    y: &[f64],
    gs: &GroupStructure,
    lambda: f64,
    opts: BcdOptions,
) -> Result<LogProxSolution, ProxError> {
    check_lambda(lambda)?;
    if y.len() != gs.p() {
        return Err(ProxError::Dimension { expected: gs.p(), got: y.len() });
    }
    let mut beta = vec![0.0; y.len()];
    let mut latents: Vec<Vec<f64>> = gs.groups().iter().map(|g| vec![0.0; g.indices.len()]).collect();
    let threshold = opts.tol * (1.0 + max_abs(y));
    let mut r = Vec::new();
    let mut start = beta.clone();

    for cycle in 1..=opts.max_cycles {
        start.copy_from_slice(&beta);
        for (g, group) in gs.groups().iter().enumerate() {
            r.clear();
            r.extend(group.indices.iter().zip(&latents[g]).map(|(&i, &v)| y[i] - beta[i] + v));
            let c = shrink_factor(norm(&r), lambda * group.weight);
            for (k, &i) in group.indices.iter().enumerate() {
                let v = c * r[k];
                beta[i] += v - latents[g][k];
                latents[g][k] = v;
            }
        }
        let change = beta.iter().zip(&start).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change <= threshold || gs.len() == 1 {
            return Ok(LogProxSolution {
                beta: sum_latents(gs, &latents),
                latents: Some(latents),
                knots: Vec::new(),
                cycles: cycle,
                loop_count: 0,
                f_updates: 0,
            });
        }
    }
    Err(ProxError::NotConverged { cycles: opts.max_cycles, beta })
}

fn sum_latents(gs: &GroupStructure, latents: &[Vec<f64>]) -> Vec<f64> {
    let mut beta = vec![0.0; gs.p()];
    for (group, v) in gs.groups().iter().zip(latents) {
        for (&i, &x) in group.indices.iter().zip(v) {
            beta[i] += x;
        }
    }
    beta
}

/// One path block of the path-based BCD: coordinates in layer order plus
/// the path's slice of the ancestor-group weights.
pub(crate) struct PathBlock {
    pub order: Vec<usize>,
    pub sizes: Vec<usize>,
    pub weights: Vec<f64>,
}

pub(crate) fn path_blocks(h: &Hierarchy, pd: &PathDecomposition, w: &[f64]) -> Result<Vec<PathBlock>, ProxError> {
    check_weights(w, h.num_nodes())?;
    (0..pd.len())
        .map(|l| {
            let layers = pd.layers(l);
            let weights: Vec<f64> = pd.paths()[l].iter().map(|&n| w[n]).collect();
            check_increasing(&weights)?;
            Ok(PathBlock {
                order: layers.iter().flatten().copied().collect(),
                sizes: layers.iter().map(Vec::len).collect(),
                weights,
            })
        })
        .collect()
}

/// Block coordinate descent with one block per path of a path decomposition.
///
/// Each block update is the exact path prox applied to the residual on the
/// path's support. `w[n]` weights the ancestor group of node `n` and must
/// increase strictly along every path. Latents are returned for the
/// ancestor groups in node order.
pub fn prox_log_path_bcd(
    y: &[f64],
    h: &Hierarchy,
    pd: &PathDecomposition,
    lambda: f64,
    w: &[f64],
    opts: BcdOptions,
) -> Result<LogProxSolution, ProxError> {
    check_lambda(lambda)?;
    if y.len() != h.p() {
        return Err(ProxError::Dimension { expected: h.p(), got: y.len() });
    }
    let blocks = path_blocks(h, pd, w)?;
    let mut beta = vec![0.0; y.len()];
    let mut values: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.order.len()]).collect();
    let mut inputs: Vec<Vec<f64>> = values.clone();
    let threshold = opts.tol * (1.0 + max_abs(y));
    let mut start = beta.clone();
    let mut cycles = 0;

    for cycle in 1..=opts.max_cycles {
        start.copy_from_slice(&beta);
        for (l, block) in blocks.iter().enumerate() {
            let r: Vec<f64> = block
                .order
                .iter()
                .zip(&values[l])
                .map(|(&i, &v)| y[i] - beta[i] + v)
                .collect();
            let sol = prox_log_path(&r, &block.sizes, lambda, &block.weights)?;
            for (k, &i) in block.order.iter().enumerate() {
                beta[i] += sol.beta[k] - values[l][k];
            }
            values[l] = sol.beta;
            inputs[l] = r;
        }
        let change = beta.iter().zip(&start).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change <= threshold || blocks.len() == 1 {
            cycles = cycle;
            break;
        }
    }
    if cycles == 0 {
        return Err(ProxError::NotConverged { cycles: opts.max_cycles, beta });
    }

    // Latents of each block's last update, mapped onto the ancestor groups.
    let mut latents: Vec<Vec<f64>> = Vec::with_capacity(h.num_nodes());
    let mut by_node: Vec<Option<Vec<f64>>> = vec![None; h.num_nodes()];
    let mut scratch = vec![0.0; y.len()];
    for (l, block) in blocks.iter().enumerate() {
        let sol = prox_log_path_with_latents(&inputs[l], &block.sizes, lambda, &block.weights)?;
        for (j, v) in sol.latents.expect("requested").into_iter().enumerate() {
            let node = pd.paths()[l][j];
            for (k, &x) in v.iter().enumerate() {
                scratch[block.order[k]] = x;
            }
            let group = h.union_of(&h.ancestors(node).expect("node in range"));
            by_node[node] = Some(group.iter().map(|&i| scratch[i]).collect());
            for &i in &block.order[..v.len()] {
                scratch[i] = 0.0;
            }
        }
    }
    for v in by_node {
        latents.push(v.expect("every node lies on one path"));
    }
    let mut beta = vec![0.0; y.len()];
    for (block, vals) in blocks.iter().zip(&values) {
        for (&i, &v) in block.order.iter().zip(vals) {
            beta[i] += v;
        }
    }
    Ok(LogProxSolution { beta, latents: Some(latents), knots: Vec::new(), cycles, loop_count: 0, f_updates: 0 })
}

/// Checks the LOG optimality conditions through the latent decomposition:
/// `β = Σ_g v_g`; where `v_g ≠ 0`, `β_g − y_g = −λ w_g v_g/‖v_g‖`; where
/// `v_g = 0`, `‖β_g − y_g‖ ≤ λ w_g`. Reports the largest violation.
pub fn verify_log_optimality(
    y: &[f64],
    sol: &LogProxSolution,
    gs: &GroupStructure,
    lambda: f64,
    tol: f64,
) -> Certificate {
    let Some(latents) = sol.latents.as_ref() else {
        return Certificate { ok: false, worst_violation: f64::INFINITY };
    };
    if latents.len() != gs.len() || y.len() != gs.p() || sol.beta.len() != gs.p() {
        return Certificate { ok: false, worst_violation: f64::INFINITY };
    }
    let recon = sum_latents(gs, latents);
    let scale = 1.0 + max_abs(&sol.beta);
    let mut worst = recon.iter().zip(&sol.beta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
    for (group, v) in gs.groups().iter().zip(latents) {
        let radius = lambda * group.weight;
        let nv = norm(v);
        if nv > 0.0 {
            for (&i, &x) in group.indices.iter().zip(v) {
                let gap = (sol.beta[i] - y[i]) + radius * x / nv;
                worst = worst.max(gap.abs());
            }
        } else {
            let diff: Vec<f64> = group.indices.iter().map(|&i| sol.beta[i] - y[i]).collect();
            worst = worst.max(norm(&diff) - radius);
        }
    }
    Certificate { ok: worst <= tol, worst_violation: worst }
}
