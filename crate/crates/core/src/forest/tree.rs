//! Honest tree growing.
//!
//! Split search only ever looks at the splitting half; the estimation half
//! is routed alongside so that minimum node sizes can be enforced on it and
//! so that every leaf knows its estimation rows.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Estimation-half rows that fall in this leaf.
        rows: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Sorted rows used to choose splits.
    pub split_rows: Vec<u32>,
    /// Sorted rows used for leaf estimates.
    pub estimation_rows: Vec<u32>,
}

impl Tree {
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { .. } => return id,
            }
        }
    }

    pub fn leaf_rows(&self, leaf: usize) -> &[u32] {
        match &self.nodes[leaf] {
            Node::Leaf { rows } => rows,
            Node::Split { .. } => &[],
        }
    }

    /// Whether `row` was drawn into this tree's subsample (either half).
    pub fn contains(&self, row: u32) -> bool {
        self.split_rows.binary_search(&row).is_ok()
            || self.estimation_rows.binary_search(&row).is_ok()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Per-node split responses and leaf admissibility.
pub(crate) trait SplitRule: Sync {
    /// Fills `out` with one response per row of `rows`. Returns `false` when
    /// the node cannot be split at all.
    fn relabel(&self, rows: &[u32], out: &mut Vec<f64>) -> bool;

    /// Whether a set of estimation rows can stand as a leaf.
    fn leaf_ok(&self, estimation: &[u32]) -> bool;
}

pub(crate) struct GrowParams {
    pub mtry: usize,
    pub min_node_size: usize,
}

pub(crate) fn grow<R: Rng, S: SplitRule>(
    x: &FeatureMatrix,
    rule: &S,
    split_rows: Vec<u32>,
    estimation_rows: Vec<u32>,
    params: &GrowParams,
    rng: &mut R,
) -> Tree {
    let mut nodes = vec![Node::Leaf { rows: Vec::new() }];
    let mut stack = vec![(0usize, split_rows.clone(), estimation_rows.clone())];
    let mut scratch = Scratch::default();

    while let Some((id, s, e)) = stack.pop() {
        let split = find_split(x, rule, &s, &e, params, rng, &mut scratch);
        let Some((feature, threshold)) = split else {
            nodes[id] = Node::Leaf { rows: e };
            continue;
        };
        let (sl, sr): (Vec<u32>, Vec<u32>) = s
            .iter()
            .partition(|&&r| x.get(r as usize, feature) <= threshold);
        let (el, er): (Vec<u32>, Vec<u32>) = e
            .iter()
            .partition(|&&r| x.get(r as usize, feature) <= threshold);
        if !rule.leaf_ok(&el) || !rule.leaf_ok(&er) {
            // Degenerate estimation child: keep the parent as the leaf.
            nodes[id] = Node::Leaf { rows: e };
            continue;
        }
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { rows: Vec::new() });
        nodes.push(Node::Leaf { rows: Vec::new() });
        nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        stack.push((right, sr, er));
        stack.push((left, sl, el));
    }

    Tree {
        nodes,
        split_rows: sorted(split_rows),
        estimation_rows: sorted(estimation_rows),
    }
}

fn sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v
}

#[derive(Default)]
struct Scratch {
    responses: Vec<f64>,
    order: Vec<(f64, f64)>,
    est_values: Vec<f64>,
}

fn find_split<R: Rng, S: SplitRule>(
    x: &FeatureMatrix,
    rule: &S,
    s: &[u32],
    e: &[u32],
    params: &GrowParams,
    rng: &mut R,
    scratch: &mut Scratch,
) -> Option<(usize, f64)> {
    let min = params.min_node_size;
    let n = s.len();
    if n < 2 * min || e.len() < 2 * min {
        return None;
    }
    if !rule.relabel(s, &mut scratch.responses) {
        return None;
    }
    let total: f64 = scratch.responses.iter().sum();
    let sum_sq: f64 = scratch.responses.iter().map(|r| r * r).sum();
    let nf = n as f64;
    let mut best = total * total / nf + 1e-12 * sum_sq;
    let mut found = None;

    let mut features: Vec<usize> = index::sample(rng, x.n_cols(), params.mtry).into_vec();
    features.sort_unstable();

    for f in features {
        scratch.order.clear();
        scratch
            .order
            .extend(s.iter().zip(&scratch.responses).map(|(&r, &resp)| (x.get(r as usize, f), resp)));
        scratch.order.sort_by(|a, b| a.0.total_cmp(&b.0));
        scratch.est_values.clear();
        scratch
            .est_values
            .extend(e.iter().map(|&r| x.get(r as usize, f)));
        scratch.est_values.sort_by(f64::total_cmp);

        let mut left_sum = 0.0;
        let mut est_left = 0usize;
        for i in 0..n - 1 {
            left_sum += scratch.order[i].1;
            let (v, v_next) = (scratch.order[i].0, scratch.order[i + 1].0);
            let n_left = i + 1;
            if v == v_next || n_left < min || n - n_left < min {
                continue;
            }
            let mut threshold = v + (v_next - v) / 2.0;
            if threshold >= v_next {
                threshold = v;
            }
            while est_left < scratch.est_values.len() && scratch.est_values[est_left] <= threshold {
                est_left += 1;
            }
            if est_left < min || e.len() - est_left < min {
                continue;
            }
            let right_sum = total - left_sum;
            let crit = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
            if crit > best {
                best = crit;
                found = Some((f, threshold));
            }
        }
    }
    found
}
