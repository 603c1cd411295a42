use super::Hierarchy;

/// A weighted group of coordinate indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Sorted, 0-based coordinate indices.
    pub indices: Vec<usize>,
    pub weight: f64,
}

/// Weighted groups over `{0, …, p-1}`, possibly overlapping.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    p: usize,
    groups: Vec<Group>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroupError {
    #[error("group {group} has non-positive or non-finite weight {weight}")]
    BadWeight { group: usize, weight: f64 },
    #[error("group {group} holds index {index} outside [0, {p})")]
    IndexOutOfRange { group: usize, index: usize, p: usize },
    #[error("group {group} is empty")]
    Empty { group: usize },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
}

impl GroupStructure {
    pub fn new(p: usize, mut groups: Vec<Group>) -> Result<Self, GroupError> {
        for (group, g) in groups.iter_mut().enumerate() {
            g.indices.sort_unstable();
            g.indices.dedup();
            if g.indices.is_empty() {
                return Err(GroupError::Empty { group });
            }
            if !(g.weight > 0.0 && g.weight.is_finite()) {
                return Err(GroupError::BadWeight { group, weight: g.weight });
            }
            if let Some(&index) = g.indices.iter().find(|&&i| i >= p) {
                return Err(GroupError::IndexOutOfRange { group, index, p });
            }
        }
        Ok(Self { p, groups })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> &Group {
        &self.groups[i]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.weight).collect()
    }

    /// Same groups with new weights.
    pub fn reweighted(&self, weights: &[f64]) -> Result<Self, GroupError> {
        if weights.len() != self.groups.len() {
            return Err(GroupError::WeightCount { expected: self.groups.len(), got: weights.len() });
        }
        let groups = self
            .groups
            .iter()
            .zip(weights)
            .map(|(g, &weight)| Group { indices: g.indices.clone(), weight })
            .collect();
        Self::new(self.p, groups)
    }

    /// Group lasso penalty `Σ_g w_g ‖β_g‖₂`.
    pub fn gl_penalty(&self, beta: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|g| g.weight * g.indices.iter().map(|&i| beta[i] * beta[i]).sum::<f64>().sqrt())
            .sum()
    }
}

/// How group weights are assigned.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum WeightRule {
    /// `w_g = sqrt(|g|)`.
    #[default]
    SqrtSize,
    /// `w_g = 1`.
    Unit,
    /// One weight per group, in node order.
    Custom(Vec<f64>),
}

impl WeightRule {
    fn assign(&self, sets: Vec<Vec<usize>>, p: usize) -> Result<GroupStructure, GroupError> {
        let weights: Vec<f64> = match self {
            WeightRule::SqrtSize => sets.iter().map(|s| (s.len() as f64).sqrt()).collect(),
            WeightRule::Unit => vec![1.0; sets.len()],
            WeightRule::Custom(w) => {
                if w.len() != sets.len() {
                    return Err(GroupError::WeightCount { expected: sets.len(), got: w.len() });
                }
                w.clone()
            }
        };
        let groups = sets.into_iter().zip(weights).map(|(indices, weight)| Group { indices, weight }).collect();
        GroupStructure::new(p, groups)
    }
}

/// Descendant groups: group `i` is the union of node `i` and everything below it.
pub fn group_structure_gl(h: &Hierarchy, rule: &WeightRule) -> Result<GroupStructure, GroupError> {
    let sets = (0..h.num_nodes())
        .map(|i| h.union_of(&h.descendants(i).expect("node in range")))
        .collect();
    rule.assign(sets, h.p())
}

/// Ancestor groups: group `j` is the union of node `j` and everything above it.
pub fn group_structure_log(h: &Hierarchy, rule: &WeightRule) -> Result<GroupStructure, GroupError> {
    let sets = (0..h.num_nodes())
        .map(|j| h.union_of(&h.ancestors(j).expect("node in range")))
        .collect();
    rule.assign(sets, h.p())
}
