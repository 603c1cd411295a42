use super::{
    apply_block_scales, block_norms_sq, check_lambda, check_sizes, check_weights, max_abs, norm,
    shrink_factor, soft, BcdOptions, Certificate, ProxError,
};
use crate::hierarchy::{GroupStructure, Hierarchy};

/// Result of a GL-type proximal operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GlProxSolution {
    pub beta: Vec<f64>,
    /// Final norm of each dual block `η^(g)`. For mGL this is the weighted
    /// dual norm `‖W⁻¹η‖₂`, bounded by λ rather than `λ w_g`.
    pub dual_norms: Vec<f64>,
    /// Dual blocks aligned with each group's indices, when the solver tracks them.
    pub duals: Option<Vec<Vec<f64>>>,
    pub cycles: usize,
}

/// Block coordinate descent on the dual of the GL prox.
///
/// Each group update adds back its dual block, projects onto the ball of
/// radius `λ w_g` and subtracts the projection, which amounts to
/// `β_g ← S_G(β_g + η_g, λ w_g)`. Groups are visited in the order given.
pub fn prox_gl_dual_bcd(
    y: &[f64],
    gs: &GroupStructure,
    lambda: f64,
    opts: BcdOptions,
) -> Result<GlProxSolution, ProxError> {
    check_lambda(lambda)?;
    if y.len() != gs.p() {
        return Err(ProxError::Dimension { expected: gs.p(), got: y.len() });
    }
    let mut beta = y.to_vec();
    let mut eta: Vec<Vec<f64>> = gs.groups().iter().map(|g| vec![0.0; g.indices.len()]).collect();
    let threshold = opts.tol * (1.0 + max_abs(y));
    let mut r = Vec::new();
    let mut start = beta.clone();

    for cycle in 1..=opts.max_cycles {
        start.copy_from_slice(&beta);
        for (g, group) in gs.groups().iter().enumerate() {
            r.clear();
            r.extend(group.indices.iter().zip(&eta[g]).map(|(&i, &e)| beta[i] + e));
            let c = shrink_factor(norm(&r), lambda * group.weight);
            for (k, &i) in group.indices.iter().enumerate() {
                beta[i] = c * r[k];
                eta[g][k] = r[k] - beta[i];
            }
        }
        let change = beta.iter().zip(&start).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change <= threshold {
            let dual_norms = eta.iter().map(|e| norm(e)).collect();
            return Ok(GlProxSolution { beta, dual_norms, duals: Some(eta), cycles: cycle });
        }
    }
    Err(ProxError::NotConverged { cycles: opts.max_cycles, beta })
}

/// Exact GL prox on a forest in one pass, children before parents.
///
/// `gs` must hold the descendant groups of `h` in node order.
pub fn prox_gl_tree(
    y: &[f64],
    h: &Hierarchy,
    lambda: f64,
    gs: &GroupStructure,
) -> Result<GlProxSolution, ProxError> {
    check_lambda(lambda)?;
    if !h.is_forest() {
        return Err(ProxError::NotAForest);
    }
    if y.len() != h.p() {
        return Err(ProxError::Dimension { expected: h.p(), got: y.len() });
    }
    if gs.len() != h.num_nodes() || gs.p() != h.p() {
        return Err(ProxError::GroupMismatch);
    }
    for i in 0..h.num_nodes() {
        let expected = h.union_of(&h.descendants(i).expect("node in range"));
        if gs.group(i).indices != expected {
            return Err(ProxError::GroupMismatch);
        }
    }

    let mut beta = y.to_vec();
    let mut duals = vec![Vec::new(); gs.len()];
    let mut dual_norms = vec![0.0; gs.len()];
    for &node in h.topological_order().iter().rev() {
        let group = gs.group(node);
        let r: Vec<f64> = group.indices.iter().map(|&i| beta[i]).collect();
        let c = shrink_factor(norm(&r), lambda * group.weight);
        let mut eta = Vec::with_capacity(r.len());
        for (&i, &v) in group.indices.iter().zip(&r) {
            beta[i] = c * v;
            eta.push(v - beta[i]);
        }
        dual_norms[node] = norm(&eta);
        duals[node] = eta;
    }
    Ok(GlProxSolution { beta, dual_norms, duals: Some(duals), cycles: 1 })
}

/// Per-node scale factors of the GL prox on a directed path.
///
/// `z[l]` is the squared norm of node `l` (in path order) and `w[l]` the
/// weight of the group holding node `l` and everything below it. Returns the
/// scale applied to each node and the norm of each group's dual block.
pub fn gl_path_scales(z: &[f64], lambda: f64, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = z.len();
    let mut c = vec![0.0; d];
    let mut dual_norms = vec![0.0; d];
    let mut tail = 0.0;
    for l in (0..d).rev() {
        let r = (z[l] + tail).sqrt();
        let mu = lambda * w[l];
        c[l] = shrink_factor(r, mu);
        dual_norms[l] = r.min(mu);
        tail = if r > mu { (r - mu) * (r - mu) } else { 0.0 };
    }
    for l in 1..d {
        c[l] *= c[l - 1];
    }
    (c, dual_norms)
}

/// GL prox on a directed path `s_1 → … → s_D` whose nodes occupy consecutive
/// blocks of `y` with the given sizes.
///
/// `w[l]` weights the group `s_l ∪ … ∪ s_D`. Runs in `O(p + D)`.
pub fn prox_gl_path(y: &[f64], sizes: &[usize], lambda: f64, w: &[f64]) -> Result<GlProxSolution, ProxError> {
    check_lambda(lambda)?;
    check_sizes(sizes, y.len())?;
    check_weights(w, sizes.len())?;
    let (scales, dual_norms) = gl_path_scales(&block_norms_sq(y, sizes), lambda, w);
    Ok(GlProxSolution { beta: apply_block_scales(y, sizes, &scales), dual_norms, duals: None, cycles: 1 })
}

/// Dual blocks of the GL path prox; block `l` covers `s_l ∪ … ∪ s_D` in
/// the layout of `y`. Costs `O(p D)`.
pub fn gl_path_duals(y: &[f64], sizes: &[usize], lambda: f64, w: &[f64]) -> Result<Vec<Vec<f64>>, ProxError> {
    check_lambda(lambda)?;
    check_sizes(sizes, y.len())?;
    check_weights(w, sizes.len())?;
    let mut cur = y.to_vec();
    let mut duals = vec![Vec::new(); sizes.len()];
    let mut start = y.len();
    for l in (0..sizes.len()).rev() {
        start -= sizes[l];
        let r = &mut cur[start..];
        let c = shrink_factor(norm(r), lambda * w[l]);
        duals[l] = r.iter().map(|v| (1.0 - c) * v).collect();
        r.iter_mut().for_each(|v| *v *= c);
    }
    Ok(duals)
}

/// Closed-form GL prox for the two-node path `{1} → {2}`, with `w[0]` on
/// the group `{1, 2}` and `w[1]` on `{2}`.
pub fn gl_pair(y: [f64; 2], lambda: f64, w: [f64; 2]) -> Result<[f64; 2], ProxError> {
    check_lambda(lambda)?;
    check_weights(&w, 2)?;
    let inner = [y[0], soft(y[1], lambda * w[1])];
    let c = shrink_factor(norm(&inner), lambda * w[0]);
    Ok([c * inner[0], c * inner[1]])
}

/// Checks the GL optimality conditions given a dual decomposition:
/// `y − β = Σ_g η_g`, `‖η_g‖ ≤ λ w_g`, and `η_g = λ w_g β_g/‖β_g‖` where `β_g ≠ 0`.
pub fn verify_gl_optimality(
    y: &[f64],
    gs: &GroupStructure,
    lambda: f64,
    beta: &[f64],
    duals: &[Vec<f64>],
    tol: f64,
) -> Certificate {
    let mut residual: Vec<f64> = y.iter().zip(beta).map(|(a, b)| a - b).collect();
    let mut worst = 0.0f64;
    for (group, eta) in gs.groups().iter().zip(duals) {
        let radius = lambda * group.weight;
        worst = worst.max(norm(eta) - radius);
        let bg: Vec<f64> = group.indices.iter().map(|&i| beta[i]).collect();
        let nb = norm(&bg);
        if nb > 0.0 {
            let gap: Vec<f64> = eta.iter().zip(&bg).map(|(e, b)| e - radius * b / nb).collect();
            worst = worst.max(norm(&gap));
        }
        for (&i, e) in group.indices.iter().zip(eta) {
            residual[i] -= e;
        }
    }
    worst = worst.max(max_abs(&residual));
    Certificate { ok: worst <= tol, worst_violation: worst }
}
