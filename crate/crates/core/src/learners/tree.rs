use serde::{Deserialize, Serialize};

use super::Samples;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 8, min_samples_split: 2 }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_split == 0 {
            return Err(Error::Config("tree max_depth and min_samples_split must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        score: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary CART classifier using Gini impurity. Leaves hold the raw
/// positive-class fraction of their training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

/// `n * gini` for a node with `pos` positives out of `n`.
fn weighted_gini(n: f64, pos: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n - (pos * pos + (n - pos) * (n - pos)) / n
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    cost: f64,
}

fn best_split(samples: &Samples<'_>, idx: &[usize]) -> Option<BestSplit> {
    let n = idx.len() as f64;
    let total_pos = idx.iter().filter(|&&i| samples.labels[i]).count() as f64;
    let mut best: Option<BestSplit> = None;
    let mut column: Vec<(f64, bool)> = Vec::with_capacity(idx.len());

    for feature in 0..samples.dim() {
        column.clear();
        column.extend(idx.iter().map(|&i| (samples.rows[i][feature], samples.labels[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_pos = 0.0;
        for k in 0..column.len() - 1 {
            if column[k].1 {
                left_pos += 1.0;
            }
            let (lo, hi) = (column[k].0, column[k + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = (k + 1) as f64;
            let cost = weighted_gini(n_left, left_pos) + weighted_gini(n - n_left, total_pos - left_pos);
            // Thresholds ascend within a feature and features ascend, so a
            // strict comparison keeps the lowest (feature, threshold) on ties.
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(BestSplit { feature, threshold, cost });
            }
        }
    }
    best
}

impl DecisionTree {
    pub fn fit(samples: &Samples<'_>, params: &TreeParams) -> Self {
        let mut nodes = Vec::new();
        let root: Vec<usize> = (0..samples.len()).collect();
        // (node slot, row indices, depth)
        let mut stack = vec![(0usize, root, 0usize)];
        nodes.push(Node::Leaf { score: 0.0 });

        while let Some((slot, idx, depth)) = stack.pop() {
            let pos = idx.iter().filter(|&&i| samples.labels[i]).count();
            let score = pos as f64 / idx.len() as f64;
            let pure = pos == 0 || pos == idx.len();
            if pure || depth >= params.max_depth || idx.len() < params.min_samples_split.max(2) {
                nodes[slot] = Node::Leaf { score };
                continue;
            }
            let Some(split) = best_split(samples, &idx) else {
                nodes[slot] = Node::Leaf { score };
                continue;
            };
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| samples.rows[i][split.feature] <= split.threshold);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { score: 0.0 });
            nodes.push(Node::Leaf { score: 0.0 });
            nodes[slot] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
            stack.push((right, right_idx, depth + 1));
            stack.push((left, left_idx, depth + 1));
        }
        DecisionTree { nodes }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { score } => return score,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Learned `(feature, threshold)` pairs.
    pub fn thresholds(&self) -> Vec<(usize, f64)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}
