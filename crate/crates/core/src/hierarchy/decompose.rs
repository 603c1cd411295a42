use std::collections::BTreeSet;

use super::Hierarchy;

/// Exact cover of a hierarchy's nodes by directed paths.
///
/// For a path `n_1 → … → n_k` the ancestor sets are nested,
/// `anc(n_1) ⊂ … ⊂ anc(n_k)`, so the ancestor groups of the path's nodes
/// form a path-shaped group structure over `anc(n_k)`. Each such path is
/// stored with its layers `anc(n_j) \ anc(n_{j-1})` already expanded to
/// coordinate indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDecomposition {
    paths: Vec<Vec<usize>>,
    layers: Vec<Vec<Vec<usize>>>,
    supports: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecompositionError {
    #[error("node {node} appears in {count} paths")]
    Cover { node: usize, count: usize },
    #[error("path {path} uses {from} -> {to}, which is not an edge")]
    MissingEdge { path: usize, from: usize, to: usize },
    #[error("path {path} is empty")]
    EmptyPath { path: usize },
    #[error("path {path} references node {node} out of range")]
    NodeOutOfRange { path: usize, node: usize },
}

impl PathDecomposition {
    /// Builds a decomposition from explicit paths, checking the cover and edge invariants.
    pub fn from_paths(h: &Hierarchy, paths: Vec<Vec<usize>>) -> Result<Self, DecompositionError> {
        let n = h.num_nodes();
        let mut count = vec![0usize; n];
        for (path, nodes) in paths.iter().enumerate() {
            if nodes.is_empty() {
                return Err(DecompositionError::EmptyPath { path });
            }
            for &node in nodes {
                if node >= n {
                    return Err(DecompositionError::NodeOutOfRange { path, node });
                }
                count[node] += 1;
            }
            for w in nodes.windows(2) {
                if !h.children(w[0]).contains(&w[1]) {
                    return Err(DecompositionError::MissingEdge { path, from: w[0], to: w[1] });
                }
            }
        }
        if let Some(node) = (0..n).find(|&i| count[i] != 1) {
            return Err(DecompositionError::Cover { node, count: count[node] });
        }

        let mut layers = Vec::with_capacity(paths.len());
        let mut supports = Vec::with_capacity(paths.len());
        for nodes in &paths {
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            let mut path_layers = Vec::with_capacity(nodes.len());
            for &node in nodes {
                let anc = h.ancestors(node).expect("checked above");
                let fresh: Vec<usize> = anc.difference(&seen).copied().collect();
                path_layers.push(h.union_of(&fresh));
                seen.extend(fresh);
            }
            supports.push(h.union_of(&seen));
            layers.push(path_layers);
        }
        Ok(Self { paths, layers, supports })
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Coordinate indices added at each step along path `l`.
    pub fn layers(&self, l: usize) -> &[Vec<usize>] {
        &self.layers[l]
    }

    /// Union of the ancestor groups of path `l`, i.e. the ancestors of its last node.
    pub fn support(&self, l: usize) -> &[usize] {
        &self.supports[l]
    }

    /// Induced partition of the ancestor groups: for each path, the coordinate
    /// index sets `anc(n)` of its nodes in path order.
    pub fn induced_partition(&self) -> Vec<Vec<Vec<usize>>> {
        self.layers
            .iter()
            .map(|path_layers| {
                let mut acc: Vec<usize> = Vec::new();
                path_layers
                    .iter()
                    .map(|layer| {
                        acc.extend(layer);
                        let mut g = acc.clone();
                        g.sort_unstable();
                        g
                    })
                    .collect()
            })
            .collect()
    }
}

/// Greedy path decomposition.
///
/// Roots are visited in node order. From the current root, candidate paths
/// walk through already covered nodes and then through a contiguous run of
/// uncovered nodes; only that run is emitted. The longest run wins. Ties go
/// to the smallest node index at each step, which yields the
/// lexicographically smallest run among the longest ones.
pub fn path_decompose(h: &Hierarchy) -> PathDecomposition {
    let n = h.num_nodes();
    let mut covered = vec![false; n];
    let mut paths = Vec::new();
    let roots: Vec<usize> = (0..n).filter(|&i| h.parents(i).is_empty()).collect();

    for &root in &roots {
        loop {
            let frontier = frontier(h, root, &covered);
            if frontier.is_empty() {
                break;
            }
            let len = longest_uncovered(h, &covered);
            let mut cur = *frontier
                .iter()
                .max_by(|&&a, &&b| len[a].cmp(&len[b]).then(b.cmp(&a)))
                .expect("non-empty frontier");
            let mut path = vec![cur];
            loop {
                let next = h
                    .children(cur)
                    .iter()
                    .copied()
                    .filter(|&c| !covered[c])
                    .max_by(|&a, &b| len[a].cmp(&len[b]).then(b.cmp(&a)));
                match next {
                    Some(c) => {
                        path.push(c);
                        cur = c;
                    }
                    None => break,
                }
            }
            for &i in &path {
                covered[i] = true;
            }
            paths.push(path);
        }
    }
    PathDecomposition::from_paths(h, paths).expect("greedy output is a valid decomposition")
}

/// Uncovered nodes reachable from `root` through covered nodes only.
fn frontier(h: &Hierarchy, root: usize, covered: &[bool]) -> Vec<usize> {
    if !covered[root] {
        return vec![root];
    }
    let mut seen = vec![false; covered.len()];
    let mut stack = vec![root];
    let mut out = Vec::new();
    seen[root] = true;
    while let Some(i) = stack.pop() {
        for &c in h.children(i) {
            if !seen[c] {
                seen[c] = true;
                if covered[c] {
                    stack.push(c);
                } else {
                    out.push(c);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Number of nodes on the longest all-uncovered path starting at each node (0 if covered).
fn longest_uncovered(h: &Hierarchy, covered: &[bool]) -> Vec<usize> {
    let mut len = vec![0usize; covered.len()];
    for &i in h.topological_order().iter().rev() {
        if !covered[i] {
            len[i] = 1 + h.children(i).iter().map(|&c| len[c]).max().unwrap_or(0);
        }
    }
    len
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::interaction3;
    use super::super::{group_structure_log, WeightRule};
    use super::*;

    fn check_invariants(h: &Hierarchy, pd: &PathDecomposition) {
        PathDecomposition::from_paths(h, pd.paths().to_vec()).unwrap();
        let mut groups: Vec<Vec<usize>> = pd.induced_partition().into_iter().flatten().collect();
        let mut expected: Vec<Vec<usize>> = group_structure_log(h, &WeightRule::Unit)
            .unwrap()
            .groups()
            .iter()
            .map(|g| g.indices.clone())
            .collect();
        groups.sort();
        expected.sort();
        assert_eq!(groups, expected);
    }

    #[test]
    fn path_graph_is_one_path() {
        let h = Hierarchy::path(&[1, 2, 1, 1]).unwrap();
        let pd = path_decompose(&h);
        assert_eq!(pd.paths(), &[vec![0, 1, 2, 3]]);
        assert_eq!(pd.support(0), &[0, 1, 2, 3, 4]);
        check_invariants(&h, &pd);
    }

    #[test]
    fn edgeless_graph_is_singletons() {
        let h = Hierarchy::new(3, vec![vec![0], vec![1], vec![2]], &[]).unwrap();
        let pd = path_decompose(&h);
        assert_eq!(pd.paths(), &[vec![0], vec![1], vec![2]]);
        check_invariants(&h, &pd);
    }

    #[test]
    fn interaction_dag() {
        let h = interaction3();
        let pd = path_decompose(&h);
        check_invariants(&h, &pd);
        assert_eq!(pd.paths()[0], vec![0, 3]);
        assert_eq!(pd.paths().iter().map(Vec::len).sum::<usize>(), 6);
        // layers of the second node of the first path add s_2 and s_4
        assert_eq!(pd.layers(0), &[vec![0], vec![1, 3]]);
    }

    #[test]
    fn uncovered_run_after_covered_prefix() {
        // r -> a1 -> a2 -> a3 -> c, r -> u1 -> c, c -> d1 -> d2, c -> u2
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 5), (5, 4), (4, 6), (6, 7), (4, 8)];
        let h = Hierarchy::new(9, (0..9).map(|i| vec![i]).collect(), &edges).unwrap();
        let pd = path_decompose(&h);
        check_invariants(&h, &pd);
        assert_eq!(pd.paths()[0], vec![0, 1, 2, 3, 4, 6, 7]);
        assert_eq!(pd.paths()[1], vec![5]);
        assert_eq!(pd.paths()[2], vec![8]);
    }

    #[test]
    fn rejects_bad_paths() {
        let h = Hierarchy::path(&[1, 1, 1]).unwrap();
        assert!(PathDecomposition::from_paths(&h, vec![vec![0, 2], vec![1]]).is_err());
        assert!(PathDecomposition::from_paths(&h, vec![vec![0, 1]]).is_err());
        assert!(PathDecomposition::from_paths(&h, vec![vec![0, 1], vec![1, 2]]).is_err());
    }
}
