//! DAGs over disjoint parameter groups.
//!
//! A [`Hierarchy`] holds `N` non-empty, pairwise disjoint index sets
//! `s_1, …, s_N ⊆ {0, …, p-1}` and a set of directed edges between them.
//! Hierarchical sparsity asks that `β_{s_i} = 0` force `β_{s_j} = 0` for
//! every descendant `s_j` of `s_i`.
//!
//! Indices are 0-based throughout the crate; the text format in
//! [`format`] is 1-based.

mod decompose;
pub mod format;
mod groups;

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

pub use decompose::{path_decompose, DecompositionError, PathDecomposition};
pub use groups::{group_structure_gl, group_structure_log, Group, GroupError, GroupStructure, WeightRule};

/// First invariant a candidate hierarchy breaks.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("node {node} is empty")]
    EmptyNode { node: usize },
    #[error("index {index} is shared by nodes {first} and {second}")]
    Overlap { index: usize, first: usize, second: usize },
    #[error("node {node} holds index {index} outside [0, {p})")]
    IndexOutOfRange { node: usize, index: usize, p: usize },
    #[error("edge {parent} -> {child} references a missing node")]
    EdgeOutOfRange { parent: usize, child: usize },
    #[error("edges contain a cycle through node {node}")]
    Cycle { node: usize },
}

/// Checks the hierarchy invariants and returns a topological order on success.
///
/// Checks run in a fixed order: empty nodes, overlaps, out-of-range indices,
/// dangling edges, cycles. The topological order breaks ties toward the
/// smallest node index.
pub fn validate(
    p: usize,
    nodes: &[Vec<usize>],
    edges: &[(usize, usize)],
) -> Result<Vec<usize>, Violation> {
    if let Some(node) = nodes.iter().position(|s| s.is_empty()) {
        return Err(Violation::EmptyNode { node });
    }
    let mut owner: std::collections::HashMap<usize, usize> = Default::default();
    for (node, s) in nodes.iter().enumerate() {
        for &index in s {
            if let Some(&first) = owner.get(&index) {
                return Err(Violation::Overlap { index, first, second: node });
            }
            owner.insert(index, node);
        }
    }
    for (node, s) in nodes.iter().enumerate() {
        if let Some(&index) = s.iter().find(|&&i| i >= p) {
            return Err(Violation::IndexOutOfRange { node, index, p });
        }
    }
    let n = nodes.len();
    if let Some(&(parent, child)) = edges.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(Violation::EdgeOutOfRange { parent, child });
    }

    let (children, _) = adjacency(n, edges);
    let mut indegree = vec![0usize; n];
    for cs in &children {
        for &c in cs {
            indegree[c] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() < n {
        let node = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
        return Err(Violation::Cycle { node });
    }
    Ok(order)
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut children = vec![Vec::new(); n];
    let mut parents = vec![Vec::new(); n];
    for &(a, b) in edges {
        if !children[a].contains(&b) {
            children[a].push(b);
            parents[b].push(a);
        }
    }
    for v in children.iter_mut().chain(parents.iter_mut()) {
        v.sort_unstable();
    }
    (children, parents)
}

/// A validated DAG over disjoint index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    p: usize,
    nodes: Vec<Vec<usize>>,
    labels: Vec<String>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Hierarchy {
    /// Builds a hierarchy from 0-based index sets and `(parent, child)` edges.
    /// Node labels default to the 1-based node position.
    pub fn new(p: usize, nodes: Vec<Vec<usize>>, edges: &[(usize, usize)]) -> Result<Self, Violation> {
        let labels = (1..=nodes.len()).map(|i| i.to_string()).collect();
        Self::with_labels(p, nodes, labels, edges)
    }

    pub fn with_labels(
        p: usize,
        mut nodes: Vec<Vec<usize>>,
        labels: Vec<String>,
        edges: &[(usize, usize)],
    ) -> Result<Self, Violation> {
        for s in nodes.iter_mut() {
            s.sort_unstable();
        }
        // duplicate indices inside one node count as an overlap with itself
        for (node, s) in nodes.iter().enumerate() {
            if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
                return Err(Violation::Overlap { index: w[0], first: node, second: node });
            }
        }
        let topo = validate(p, &nodes, edges)?;
        let (children, parents) = adjacency(nodes.len(), edges);
        assert_eq!(labels.len(), nodes.len(), "one label per node");
        Ok(Self { p, nodes, labels, children, parents, topo })
    }

    /// Directed path `s_1 → s_2 → … → s_D` with contiguous index blocks of
    /// the given sizes.
    pub fn path(sizes: &[usize]) -> Result<Self, Violation> {
        let mut nodes = Vec::with_capacity(sizes.len());
        let mut next = 0;
        for &size in sizes {
            nodes.push((next..next + size).collect());
            next += size;
        }
        let edges: Vec<_> = (1..sizes.len()).map(|i| (i - 1, i)).collect();
        Self::new(next, nodes, &edges)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &[usize] {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Vec<usize>] {
        &self.nodes
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(a, cs)| cs.iter().map(move |&b| (a, b)))
    }

    /// Topological order (parents before children), smallest index first on ties.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Nodes reachable from `i`, including `i`.
    pub fn descendants(&self, i: usize) -> Result<BTreeSet<usize>, NodeOutOfRange> {
        self.reach(i, &self.children)
    }

    /// Nodes from which `j` is reachable, including `j`.
    pub fn ancestors(&self, j: usize) -> Result<BTreeSet<usize>, NodeOutOfRange> {
        self.reach(j, &self.parents)
    }

    fn reach(&self, start: usize, next: &[Vec<usize>]) -> Result<BTreeSet<usize>, NodeOutOfRange> {
        if start >= self.nodes.len() {
            return Err(NodeOutOfRange { node: start, count: self.nodes.len() });
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            if seen.insert(i) {
                stack.extend(next[i].iter().copied());
            }
        }
        Ok(seen)
    }

    /// Node order along the path if the DAG is a single directed path.
    pub fn as_path(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        if n == 0 || self.children.iter().map(Vec::len).sum::<usize>() != n - 1 {
            return None;
        }
        let root = (0..n).find(|&i| self.parents[i].is_empty())?;
        let mut order = vec![root];
        let mut cur = root;
        while let Some(&c) = self.children[cur].first() {
            if self.children[cur].len() > 1 {
                return None;
            }
            order.push(c);
            cur = c;
        }
        (order.len() == n).then_some(order)
    }

    /// True when every node has at most one parent.
    pub fn is_forest(&self) -> bool {
        self.parents.iter().all(|ps| ps.len() <= 1)
    }

    /// Union of the index sets of the given nodes, sorted.
    pub fn union_of<'a>(&self, nodes: impl IntoIterator<Item = &'a usize>) -> Vec<usize> {
        let mut out: Vec<usize> = nodes.into_iter().flat_map(|&i| self.nodes[i].iter().copied()).collect();
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("node {node} out of range (hierarchy has {count} nodes)")]
pub struct NodeOutOfRange {
    pub node: usize,
    pub count: usize,
}

impl fmt::Display for Hierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format::write_hierarchy(self))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Hierarchy;

    /// Two-way interaction DAG with three main effects: s_1, s_2, s_3 are main
    /// effects and s_4 = {1,2}, s_5 = {1,3}, s_6 = {2,3} interactions.
    pub fn interaction3() -> Hierarchy {
        let nodes = (0..6).map(|i| vec![i]).collect();
        let edges = [(0, 3), (1, 3), (0, 4), (2, 4), (1, 5), (2, 5)];
        Hierarchy::new(6, nodes, &edges).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::interaction3;
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn validate_examples() {
        assert!(validate(1, &[vec![0]], &[]).is_ok());
        assert!(matches!(
            validate(1, &[vec![0], vec![0]], &[]),
            Err(Violation::Overlap { index: 0, first: 0, second: 1 })
        ));
        assert!(matches!(
            validate(2, &[vec![0], vec![1]], &[(0, 1), (1, 0)]),
            Err(Violation::Cycle { .. })
        ));
        assert!(matches!(
            validate(1, &[vec![0], vec![1]], &[]),
            Err(Violation::IndexOutOfRange { node: 1, index: 1, p: 1 })
        ));
        assert!(matches!(validate(1, &[vec![]], &[]), Err(Violation::EmptyNode { node: 0 })));
        assert!(matches!(validate(1, &[vec![0]], &[(0, 0)]), Err(Violation::Cycle { node: 0 })));
        assert!(matches!(validate(1, &[vec![0]], &[(0, 3)]), Err(Violation::EdgeOutOfRange { .. })));
    }

    #[test]
    fn interaction_reachability() {
        let h = interaction3();
        // s_2 -> {s_2, s_4, s_6}; s_5 <- {s_1, s_3, s_5}
        assert_eq!(h.descendants(1).unwrap(), set(&[1, 3, 5]));
        assert_eq!(h.ancestors(4).unwrap(), set(&[0, 2, 4]));
        assert!(h.descendants(6).is_err());
    }

    #[test]
    fn path_reachability() {
        let h = Hierarchy::path(&[1, 1, 1]).unwrap();
        assert_eq!(h.descendants(0).unwrap(), set(&[0, 1, 2]));
        assert_eq!(h.ancestors(2).unwrap(), set(&[0, 1, 2]));
        assert_eq!(h.ancestors(0).unwrap(), set(&[0]));
        assert_eq!(h.as_path(), Some(vec![0, 1, 2]));
        assert!(h.is_forest());
    }

    #[test]
    fn isolated_node() {
        let h = Hierarchy::new(2, vec![vec![0], vec![1]], &[]).unwrap();
        assert_eq!(h.descendants(1).unwrap(), set(&[1]));
        assert_eq!(h.as_path(), None);
        assert!(!interaction3().is_forest());
    }
}
