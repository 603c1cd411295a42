use rand::Rng;

use crate::hierarchy::Hierarchy;

/// Random DAG over `nodes` nodes: node sizes uniform in `1..=max_size`,
/// consecutive index blocks, and each pair `i < j` of a random node order
/// joined by an edge with probability `edge_prob`.
pub fn random_dag<R: Rng>(rng: &mut R, nodes: usize, max_size: usize, edge_prob: f64) -> Hierarchy {
    let mut perm: Vec<usize> = (0..nodes).collect();
    for i in (1..nodes).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut start = 0;
    let groups: Vec<Vec<usize>> = (0..nodes)
        .map(|_| {
            let s = rng.random_range(1..=max_size.max(1));
            start += s;
            (start - s..start).collect()
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..nodes {
        for b in a + 1..nodes {
            if rng.random_bool(edge_prob) {
                edges.push((perm[a], perm[b]));
            }
        }
    }
    Hierarchy::new(start, groups, &edges).expect("edges follow a topological order")
}

/// Directed path with node sizes uniform in `1..=max_size`.
pub fn random_path<R: Rng>(rng: &mut R, depth: usize, max_size: usize) -> Hierarchy {
    let sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=max_size.max(1))).collect();
    Hierarchy::path(&sizes).expect("nonempty nodes")
}
