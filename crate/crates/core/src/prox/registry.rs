//! Prox operators behind one trait, registered by name.
//!
//! ```
//! use hsm_core::hierarchy::Hierarchy;
//! use hsm_core::prox::registry::{build, Algorithm, ProxSetup, Regularizer};
//!
//! let h = Hierarchy::path(&[1, 1, 1]).unwrap();
//! let op = build(Regularizer::Log, Algorithm::Auto, &ProxSetup::new(h)).unwrap();
//! assert_eq!(op.name(), "log-path");
//! let out = op.apply(&[2.0, 2.0, 0.1], 0.5).unwrap();
//! assert_eq!(out.knots, vec![2]);
//! ```

use std::fmt;
use std::str::FromStr;

use super::{
    gl_path_duals, mgl_penalty, norm, prox_gl_dual_bcd, prox_gl_path, prox_gl_tree, prox_log_naive_bcd,
    prox_log_path_bcd, prox_log_path_with_latents, prox_mgl_path, verify_gl_optimality, verify_log_optimality,
    verify_mgl_optimality, BcdOptions, MglWeights, ProxError,
};
use crate::hierarchy::{group_structure_gl, group_structure_log, path_decompose, GroupStructure, Hierarchy, PathDecomposition, WeightRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularizer {
    Gl,
    Mgl,
    Log,
}

impl Regularizer {
    pub const ALL: [Regularizer; 3] = [Regularizer::Gl, Regularizer::Mgl, Regularizer::Log];

    pub fn as_str(self) -> &'static str {
        match self {
            Regularizer::Gl => "gl",
            Regularizer::Mgl => "mgl",
            Regularizer::Log => "log",
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regularizer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gl" => Ok(Regularizer::Gl),
            "mgl" => Ok(Regularizer::Mgl),
            "log" => Ok(Regularizer::Log),
            _ => Err(format!("unknown regularizer `{s}` (expected gl, mgl or log)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Auto,
    Naive,
    Path,
    Dual,
    Tree,
    PathBcd,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Auto => "auto",
            Algorithm::Naive => "naive",
            Algorithm::Path => "path",
            Algorithm::Dual => "dual",
            Algorithm::Tree => "tree",
            Algorithm::PathBcd => "path-bcd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Algorithm::Auto),
            "naive" => Ok(Algorithm::Naive),
            "path" => Ok(Algorithm::Path),
            "dual" => Ok(Algorithm::Dual),
            "tree" => Ok(Algorithm::Tree),
            "path-bcd" => Ok(Algorithm::PathBcd),
            _ => Err(format!("unknown algorithm `{s}` (expected auto, naive, path, dual, tree or path-bcd)")),
        }
    }
}

/// What a prox operator returns, in the hierarchy's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxOutcome {
    pub beta: Vec<f64>,
    /// Penalty value `Ω(β)`; for LOG taken from the solver's latent decomposition.
    pub penalty: f64,
    pub cycles: usize,
    pub knots: Vec<usize>,
    /// Largest optimality violation, when certification was requested.
    pub kkt: Option<f64>,
}

pub trait ProxOperator: Send + Sync {
    fn name(&self) -> &'static str;
    fn regularizer(&self) -> Regularizer;
    fn dim(&self) -> usize;
    fn apply(&self, y: &[f64], lambda: f64) -> Result<ProxOutcome, ProxError>;
}

/// Inputs shared by every registered operator.
#[derive(Debug, Clone)]
pub struct ProxSetup {
    pub hierarchy: Hierarchy,
    /// One weight per group in node order; the default rule is `sqrt(|g|)`.
    /// For mGL these replace `sqrt(|s_ℓ|)` in `w_{ℓ,m} = c_ℓ/(m − ℓ + 1)`.
    pub weights: Option<Vec<f64>>,
    pub opts: BcdOptions,
    pub certify: bool,
}

impl ProxSetup {
    pub fn new(hierarchy: Hierarchy) -> Self {
        Self { hierarchy, weights: None, opts: BcdOptions::default(), certify: false }
    }

    fn rule(&self) -> WeightRule {
        self.weights.clone().map(WeightRule::Custom).unwrap_or_default()
    }
}

type Builder = fn(&ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError>;

pub struct Entry {
    pub name: &'static str,
    pub regularizer: Regularizer,
    pub summary: &'static str,
    build: Builder,
}

pub static REGISTRY: &[Entry] = &[
    Entry { name: "gl-dual", regularizer: Regularizer::Gl, summary: "dual block coordinate descent, any DAG", build: GlDual::boxed },
    Entry { name: "gl-tree", regularizer: Regularizer::Gl, summary: "one pass from leaves to roots, forests", build: GlTree::boxed },
    Entry { name: "gl-path", regularizer: Regularizer::Gl, summary: "closed-form scaling, directed paths", build: GlPath::boxed },
    Entry { name: "mgl-path", regularizer: Regularizer::Mgl, summary: "backward sweep with scalar root finding, directed paths", build: MglPath::boxed },
    Entry { name: "log-naive", regularizer: Regularizer::Log, summary: "latent block coordinate descent, one group per block", build: LogNaive::boxed },
    Entry { name: "log-path", regularizer: Regularizer::Log, summary: "finite-step knot algorithm, directed paths", build: LogPath::boxed },
    Entry { name: "log-path-bcd", regularizer: Regularizer::Log, summary: "block coordinate descent with one block per path", build: LogPathBcd::boxed },
];

pub fn names() -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().map(|e| e.name)
}

pub fn build_by_name(name: &str, setup: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
    let entry = REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ProxError::Unsupported(format!("no prox operator named `{name}`")))?;
    (entry.build)(setup)
}

/// Registered name for a regularizer/algorithm pair on the given hierarchy.
///
/// `auto` picks the closed-form path algorithm on paths; otherwise the
/// one-pass tree algorithm on forests (GL) or path-based BCD (LOG).
pub fn resolve(reg: Regularizer, algo: Algorithm, h: &Hierarchy) -> Result<&'static str, ProxError> {
    use Algorithm::*;
    let is_path = h.as_path().is_some();
    let name = match (reg, algo) {
        (Regularizer::Gl, Auto) if is_path => "gl-path",
        (Regularizer::Gl, Auto) if h.is_forest() => "gl-tree",
        (Regularizer::Gl, Auto | Dual | Naive) => "gl-dual",
        (Regularizer::Gl, Tree) => "gl-tree",
        (Regularizer::Gl, Path) => "gl-path",
        (Regularizer::Mgl, Auto | Path | Dual) => "mgl-path",
        (Regularizer::Log, Auto) if is_path => "log-path",
        (Regularizer::Log, Auto | PathBcd) => "log-path-bcd",
        (Regularizer::Log, Naive) => "log-naive",
        (Regularizer::Log, Path) => "log-path",
        _ => return Err(ProxError::Unsupported(format!("algorithm `{algo}` is not available for `{reg}`"))),
    };
    Ok(name)
}

pub fn build(reg: Regularizer, algo: Algorithm, setup: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
    build_by_name(resolve(reg, algo, &setup.hierarchy)?, setup)
}

fn check_dim(y: &[f64], p: usize) -> Result<(), ProxError> {
    if y.len() == p {
        Ok(())
    } else {
        Err(ProxError::Dimension { expected: p, got: y.len() })
    }
}

/// Coordinates of a path hierarchy laid out node by node from the root.
struct PathLayout {
    nodes: Vec<usize>,
    order: Vec<usize>,
    sizes: Vec<usize>,
    p: usize,
}

impl PathLayout {
    fn new(h: &Hierarchy) -> Result<Self, ProxError> {
        let nodes = h.as_path().ok_or(ProxError::NotAPath)?;
        let order = nodes.iter().flat_map(|&n| h.node(n).iter().copied()).collect();
        let sizes = nodes.iter().map(|&n| h.node(n).len()).collect();
        Ok(Self { nodes, order, sizes, p: h.p() })
    }

    fn gather(&self, y: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&i| y[i]).collect()
    }

    fn scatter(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (&i, &x) in self.order.iter().zip(v) {
            out[i] = x;
        }
        out
    }

    /// Group weights of `gs` (node order) rearranged into path order.
    fn path_weights(&self, gs: &GroupStructure) -> Vec<f64> {
        self.nodes.iter().map(|&n| gs.group(n).weight).collect()
    }

    /// Re-aligns per-group vectors given in layout order (group `l` covers
    /// `order[range(l)]`) with the indices of the node's group in `gs`.
    fn align(&self, gs: &GroupStructure, blocks: Vec<Vec<f64>>, range: impl Fn(usize) -> std::ops::Range<usize>) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); gs.len()];
        let mut scratch = vec![0.0; self.p];
        for (l, v) in blocks.into_iter().enumerate() {
            let coords = &self.order[range(l)];
            for (&i, &x) in coords.iter().zip(&v) {
                scratch[i] = x;
            }
            let node = self.nodes[l];
            out[node] = gs.group(node).indices.iter().map(|&i| scratch[i]).collect();
            for &i in coords {
                scratch[i] = 0.0;
            }
        }
        out
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for &s in &self.sizes {
            out.push(out.last().unwrap() + s);
        }
        out
    }
}

fn log_penalty(gs: &GroupStructure, latents: &[Vec<f64>]) -> f64 {
    gs.groups().iter().zip(latents).map(|(g, v)| g.weight * norm(v)).sum()
}

struct GlDual {
    gs: GroupStructure,
    opts: BcdOptions,
    certify: bool,
}

impl GlDual {
    fn boxed(s: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
        Ok(Box::new(Self { gs: group_structure_gl(&s.hierarchy, &s.rule())?, opts: s.opts, certify: s.certify }))
    }
}

impl ProxOperator for GlDual {
    fn name(&self) -> &'static str {
        "gl-dual"
    }
    fn regularizer(&self) -> Regularizer {
        Regularizer::Gl
    }
    fn dim(&self) -> usize {
        self.gs.p()
    }
    fn apply(&self, y: &[f64], lambda: f64) -> Result<ProxOutcome, ProxError> {
        let sol = prox_gl_dual_bcd(y, &self.gs, lambda, self.opts)?;
        let kkt = self.certify.then(|| {
            verify_gl_optimality(y, &self.gs, lambda, &sol.beta, sol.duals.as_ref().expect("tracked"), 0.0).worst_violation
        });
        Ok(ProxOutcome { penalty: self.gs.gl_penalty(&sol.beta), cycles: sol.cycles, knots: Vec::new(), kkt, beta: sol.beta })
    }
}

struct GlTree {
    h: Hierarchy,
    gs: GroupStructure,
    certify: bool,
}

impl GlTree {
    fn boxed(s: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
        if !s.hierarchy.is_forest() {
            return Err(ProxError::NotAForest);
        }
        Ok(Box::new(Self { h: s.hierarchy.clone(), gs: group_structure_gl(&s.hierarchy, &s.rule())?, certify: s.certify }))
    }
}

impl ProxOperator for GlTree {
    fn name(&self) -> &'static str {
        "gl-tree"
    }
    fn regularizer(&self) -> Regularizer {
        Regularizer::Gl
    }
    fn dim(&self) -> usize {
        self.gs.p()
    }
    fn apply(&self, y: &[f64], lambda: f64) -> Result<ProxOutcome, ProxError> {
        let sol = prox_gl_tree(y, &self.h, lambda, &self.gs)?;
        let kkt = self.certify.then(|| {
            verify_gl_optimality(y, &self.gs, lambda, &sol.beta, sol.duals.as_ref().expect("tracked"), 0.0).worst_violation
        });
        Ok(ProxOutcome { penalty: self.gs.gl_penalty(&sol.beta), cycles: sol.cycles, knots: Vec::new(), kkt, beta: sol.beta })
    }
}

struct GlPath {
    layout: PathLayout,
    gs: GroupStructure,
    w: Vec<f64>,
    certify: bool,
}

impl GlPath {
    fn boxed(s: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
        let layout = PathLayout::new(&s.hierarchy)?;
        let gs = group_structure_gl(&s.hierarchy, &s.rule())?;
        let w = layout.path_weights(&gs);
        Ok(Box::new(Self { layout, gs, w, certify: s.certify }))
    }
}

impl ProxOperator for GlPath {
    fn name(&self) -> &'static str {
        "gl-path"
    }
    fn regularizer(&self) -> Regularizer {
        Regularizer::Gl
    }
    fn dim(&self) -> usize {
        self.layout.p
    }
    fn apply(&self, y: &[f64], lambda: f64) -> Result<ProxOutcome, ProxError> {
        check_dim(y, self.layout.p)?;
        let yy = self.layout.gather(y);
        let sol = prox_gl_path(&yy, &self.layout.sizes, lambda, &self.w)?;
        let beta = self.layout.scatter(&sol.beta);
        let kkt = if self.certify {
            let duals = gl_path_duals(&yy, &self.layout.sizes, lambda, &self.w)?;
            let offsets = self.layout.offsets();
            let n = self.layout.order.len();
            let duals = self.layout.align(&self.gs, duals, |l| offsets[l]..n);
            Some(verify_gl_optimality(y, &self.gs, lambda, &beta, &duals, 0.0).worst_violation)
        } else {
            None
        };
        Ok(ProxOutcome { penalty: self.gs.gl_penalty(&beta), cycles: 1, knots: Vec::new(), kkt, beta })
    }
}

struct MglPath {
    layout: PathLayout,
    mw: MglWeights,
    certify: bool,
}

impl MglPath {
    fn boxed(s: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
        let layout = PathLayout::new(&s.hierarchy)?;
        let d = layout.nodes.len();
        let base: Vec<f64> = match &s.weights {
            Some(w) => {
                super::check_weights(w, d)?;
                layout.nodes.iter().map(|&n| w[n]).collect()
            }
            None => layout.sizes.iter().map(|&k| (k as f64).sqrt()).collect(),
        };
        let rows = (0..d).map(|l| (l..d).map(|m| base[l] / (m - l + 1) as f64).collect()).collect();
        Ok(Box::new(Self { layout, mw: MglWeights::from_rows(rows)?, certify: s.certify }))
    }
}

impl ProxOperator for MglPath {
    fn name(&self) -> &'static str {
        "mgl-path"
    }
    fn regularizer(&self) -> Regularizer {
        Regularizer::Mgl
    }
    fn dim(&self) -> usize {
        self.layout.p
    }
    fn apply(&self, y: &[f64], lambda: f64) -> Result<ProxOutcome, ProxError> {
        check_dim(y, self.layout.p)?;
        let yy = self.layout.gather(y);
        let sol = prox_mgl_path(&yy, &self.layout.sizes, lambda, &self.mw)?;
        let kkt = if self.certify {
            Some(verify_mgl_optimality(&yy, &self.layout.sizes, lambda, &self.mw, &sol.beta, 0.0)?.worst_violation)
        } else {
            None
        };
        let penalty = mgl_penalty(&sol.beta, &self.layout.sizes, &self.mw);
        Ok(ProxOutcome { beta: self.layout.scatter(&sol.beta), penalty, cycles: 1, knots: Vec::new(), kkt })
    }
}

struct LogNaive {
    gs: GroupStructure,
    opts: BcdOptions,
    certify: bool,
}

impl LogNaive {
    fn boxed(s: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
        Ok(Box::new(Self { gs: group_structure_log(&s.hierarchy, &s.rule())?, opts: s.opts, certify: s.certify }))
    }
}

impl ProxOperator for LogNaive {
    fn name(&self) -> &'static str {
        "log-naive"
    }
    fn regularizer(&self) -> Regularizer {
        Regularizer::Log
    }
    fn dim(&self) -> usize {
        self.gs.p()
    }
    fn apply(&self, y: &[f64], lambda: f64) -> Result<ProxOutcome, ProxError> {
        let sol = prox_log_naive_bcd(y, &self.gs, lambda, self.opts)?;
        let kkt = self.certify.then(|| verify_log_optimality(y, &sol, &self.gs, lambda, 0.0).worst_violation);
        let penalty = log_penalty(&self.gs, sol.latents.as_ref().expect("tracked"));
        Ok(ProxOutcome { beta: sol.beta, penalty, cycles: sol.cycles, knots: Vec::new(), kkt })
    }
}

struct LogPath {
    layout: PathLayout,
    gs: GroupStructure,
    w: Vec<f64>,
    certify: bool,
}

impl LogPath {
    fn boxed(s: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
        let layout = PathLayout::new(&s.hierarchy)?;
        let gs = group_structure_log(&s.hierarchy, &s.rule())?;
        let w = layout.path_weights(&gs);
        super::log::path_blocks(&s.hierarchy, &path_decompose(&s.hierarchy), &gs.weights())?;
        Ok(Box::new(Self { layout, gs, w, certify: s.certify }))
    }
}

impl ProxOperator for LogPath {
    fn name(&self) -> &'static str {
        "log-path"
    }
    fn regularizer(&self) -> Regularizer {
        Regularizer::Log
    }
    fn dim(&self) -> usize {
        self.layout.p
    }
    fn apply(&self, y: &[f64], lambda: f64) -> Result<ProxOutcome, ProxError> {
        check_dim(y, self.layout.p)?;
        let sol = prox_log_path_with_latents(&self.layout.gather(y), &self.layout.sizes, lambda, &self.w)?;
        let offsets = self.layout.offsets();
        let latents = self.layout.align(&self.gs, sol.latents.expect("requested"), |l| 0..offsets[l + 1]);
        let beta = self.layout.scatter(&sol.beta);
        let penalty = log_penalty(&self.gs, &latents);
        let kkt = self.certify.then(|| {
            let full = super::LogProxSolution {
                beta: beta.clone(),
                latents: Some(latents),
                knots: Vec::new(),
                cycles: 1,
                loop_count: 0,
                f_updates: 0,
            };
            verify_log_optimality(y, &full, &self.gs, lambda, 0.0).worst_violation
        });
        Ok(ProxOutcome { beta, penalty, cycles: 1, knots: sol.knots, kkt })
    }
}

struct LogPathBcd {
    h: Hierarchy,
    pd: PathDecomposition,
    gs: GroupStructure,
    opts: BcdOptions,
    certify: bool,
}

impl LogPathBcd {
    fn boxed(s: &ProxSetup) -> Result<Box<dyn ProxOperator>, ProxError> {
        let gs = group_structure_log(&s.hierarchy, &s.rule())?;
        let pd = path_decompose(&s.hierarchy);
        super::log::path_blocks(&s.hierarchy, &pd, &gs.weights())?;
        Ok(Box::new(Self { h: s.hierarchy.clone(), pd, gs, opts: s.opts, certify: s.certify }))
    }
}

impl ProxOperator for LogPathBcd {
    fn name(&self) -> &'static str {
        "log-path-bcd"
    }
    fn regularizer(&self) -> Regularizer {
        Regularizer::Log
    }
    fn dim(&self) -> usize {
        self.gs.p()
    }
    fn apply(&self, y: &[f64], lambda: f64) -> Result<ProxOutcome, ProxError> {
        let sol = prox_log_path_bcd(y, &self.h, &self.pd, lambda, &self.gs.weights(), self.opts)?;
        let kkt = self.certify.then(|| verify_log_optimality(y, &sol, &self.gs, lambda, 0.0).worst_violation);
        let penalty = log_penalty(&self.gs, sol.latents.as_ref().expect("tracked"));
        Ok(ProxOutcome { beta: sol.beta, penalty, cycles: sol.cycles, knots: Vec::new(), kkt })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interaction() -> Hierarchy {
        let nodes = (0..6).map(|i| vec![i]).collect();
        Hierarchy::new(6, nodes, &[(0, 3), (1, 3), (0, 4), (2, 4), (1, 5), (2, 5)]).unwrap()
    }

    #[test]
    fn auto_resolution() {
        let path = Hierarchy::path(&[1, 2]).unwrap();
        let tree = Hierarchy::new(3, vec![vec![0], vec![1], vec![2]], &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(resolve(Regularizer::Gl, Algorithm::Auto, &path).unwrap(), "gl-path");
        assert_eq!(resolve(Regularizer::Gl, Algorithm::Auto, &tree).unwrap(), "gl-tree");
        assert_eq!(resolve(Regularizer::Gl, Algorithm::Auto, &interaction()).unwrap(), "gl-dual");
        assert_eq!(resolve(Regularizer::Log, Algorithm::Auto, &path).unwrap(), "log-path");
        assert_eq!(resolve(Regularizer::Log, Algorithm::Auto, &tree).unwrap(), "log-path-bcd");
        assert!(resolve(Regularizer::Log, Algorithm::Tree, &path).is_err());
        assert!(build(Regularizer::Log, Algorithm::Path, &ProxSetup::new(tree)).is_err());
        assert_eq!(names().count(), REGISTRY.len());
    }

    #[test]
    fn all_operators_certify() {
        let y = [1.0, -0.4, 0.7, 1.2, 0.3, -0.9];
        let mut shuffled_path = ProxSetup::new(
            Hierarchy::new(6, vec![vec![4, 1], vec![0], vec![5, 2, 3]], &[(1, 0), (0, 2)]).unwrap(),
        );
        shuffled_path.certify = true;
        shuffled_path.opts = BcdOptions::with_tol(1e-13);
        for name in names() {
            let op = build_by_name(name, &shuffled_path).unwrap();
            for lambda in [0.0, 0.1, 0.3, 2.0] {
                let out = op.apply(&y, lambda).unwrap();
                assert!(out.kkt.unwrap() < 1e-8, "{name} at {lambda}: {:?}", out.kkt);
                if lambda == 0.0 {
                    for (a, b) in out.beta.iter().zip(&y) {
                        assert!((a - b).abs() < 1e-9, "{name}");
                    }
                }
            }
        }
    }

    #[test]
    fn log_operators_agree() {
        let mut setup = ProxSetup::new(interaction());
        setup.opts = BcdOptions::with_tol(1e-13);
        let y = [1.0, -0.4, 0.7, 1.2, 0.3, -0.9];
        let a = build_by_name("log-naive", &setup).unwrap().apply(&y, 0.25).unwrap();
        let b = build_by_name("log-path-bcd", &setup).unwrap().apply(&y, 0.25).unwrap();
        for (x, z) in a.beta.iter().zip(&b.beta) {
            assert!((x - z).abs() < 1e-9);
        }
        assert!((a.penalty - b.penalty).abs() < 1e-8);
    }
}
