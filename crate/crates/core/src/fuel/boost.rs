//! Squared-error gradient boosting over exact-greedy regression trees.
//!
//! Trees are grown level by level. For every level each feature's presorted
//! sample order is scanned once, accumulating left-side statistics per open
//! node, so a level costs `O(n * d)` regardless of how many nodes it has.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest SSE reduction that justifies a split.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A binary regression tree stored as a flat node array rooted at index 0.
/// Samples with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }

    fn check(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidArgument("tree without nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                left,
                right,
                threshold,
            } = *node
            {
                // Children always follow their parent, which also rules out cycles.
                if feature >= n_features
                    || left <= i
                    || right <= i
                    || left >= self.nodes.len()
                    || right >= self.nodes.len()
                    || threshold.is_nan()
                {
                    return Err(Error::InvalidArgument(format!(
                        "malformed split node {i}: {node:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Additive tree model: `base_score + learning_rate * Σ tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub n_features: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl TreeEnsemble {
    /// Checks structural invariants: split features in range, children
    /// indices forward-pointing, learning rate in `(0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) || !self.base_score.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bad ensemble header: base_score={} learning_rate={}",
                self.base_score, self.learning_rate
            )));
        }
        self.trees.iter().try_for_each(|t| t.check(self.n_features))
    }

    /// Unclamped model output.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.evaluate(x)).sum();
        self.base_score + self.learning_rate * sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    /// Number of trees `K`.
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_trees: 200,
            max_depth: 6,
            learning_rate: 0.1,
            min_samples_leaf: 5,
        }
    }
}

/// Column-major design matrix with per-feature presorted sample order.
struct Columns {
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Columns {
    fn new(rows: &[&[f64]], n_features: usize) -> Self {
        let n = rows.len();
        let cols: Vec<Vec<f64>> = (0..n_features)
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
                idx
            })
            .collect();
        Columns { cols, order }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Statistics of a node still open for splitting.
struct OpenNode {
    tree_index: usize,
    sum: f64,
    count: usize,
}

/// Per-node scan state while walking one feature's sorted order.
#[derive(Clone, Copy)]
struct Scan {
    left_sum: f64,
    left_count: usize,
    last: f64,
}

fn grow_tree(columns: &Columns, residual: &[f64], params: &BoostParams) -> (RegressionTree, Vec<f64>) {
    let n = residual.len();
    let n_features = columns.cols.len();
    let min_leaf = params.min_samples_leaf.max(1);

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // Open-node slot of every sample, or `NONE` once it sits in a final leaf.
    const NONE: u32 = u32::MAX;
    let mut slot = vec![0u32; n];
    let mut open = vec![OpenNode {
        tree_index: 0,
        sum: residual.iter().sum(),
        count: n,
    }];
    let mut leaf_of = vec![0usize; n];

    for _depth in 0..params.max_depth {
        if open.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
        let mut scans = vec![
            Scan {
                left_sum: 0.0,
                left_count: 0,
                last: f64::NAN,
            };
            open.len()
        ];
        for f in 0..n_features {
            let col = &columns.cols[f];
            for s in scans.iter_mut() {
                *s = Scan {
                    left_sum: 0.0,
                    left_count: 0,
                    last: f64::NAN,
                };
            }
            for &i in &columns.order[f] {
                let i = i as usize;
                let k = slot[i];
                if k == NONE {
                    continue;
                }
                let k = k as usize;
                let v = col[i];
                let node = &open[k];
                let scan = &mut scans[k];
                if scan.left_count >= min_leaf
                    && node.count - scan.left_count >= min_leaf
                    && v > scan.last
                {
                    let right_sum = node.sum - scan.left_sum;
                    let right_count = (node.count - scan.left_count) as f64;
                    let left_count = scan.left_count as f64;
                    let gain = scan.left_sum * scan.left_sum / left_count
                        + right_sum * right_sum / right_count
                        - node.sum * node.sum / node.count as f64;
                    if gain > MIN_GAIN && best[k].map_or(true, |b| gain > b.gain) {
                        let mid = 0.5 * (scan.last + v);
                        let threshold = if mid > scan.last { mid } else { v };
                        best[k] = Some(Candidate {
                            gain,
                            feature: f,
                            threshold,
                        });
                    }
                }
                scan.left_sum += residual[i];
                scan.left_count += 1;
                scan.last = v;
            }
        }

        // Materialise the splits and route samples to the children.
        let mut next_open = Vec::new();
        let mut child_slots: Vec<Option<(u32, u32)>> = vec![None; open.len()];
        for (k, node) in open.iter().enumerate() {
            let Some(c) = best[k] else { continue };
            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[node.tree_index] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left,
                right: left + 1,
            };
            let l = next_open.len() as u32;
            next_open.push(OpenNode {
                tree_index: left,
                sum: 0.0,
                count: 0,
            });
            next_open.push(OpenNode {
                tree_index: left + 1,
                sum: 0.0,
                count: 0,
            });
            child_slots[k] = Some((l, l + 1));
        }
        for i in 0..n {
            let k = slot[i];
            if k == NONE {
                continue;
            }
            let k = k as usize;
            match (best[k], child_slots[k]) {
                (Some(c), Some((l, r))) => {
                    let s = if columns.cols[c.feature][i] < c.threshold { l } else { r };
                    slot[i] = s;
                    let child = &mut next_open[s as usize];
                    child.sum += residual[i];
                    child.count += 1;
                }
                _ => {
                    leaf_of[i] = open[k].tree_index;
                    slot[i] = NONE;
                }
            }
        }
        open = next_open;
    }
    for i in 0..n {
        if slot[i] != NONE {
            leaf_of[i] = open[slot[i] as usize].tree_index;
        }
    }

    // Leaf values: mean residual of the samples that reach them.
    let mut sums = vec![0.0; nodes.len()];
    let mut counts = vec![0usize; nodes.len()];
    for i in 0..n {
        sums[leaf_of[i]] += residual[i];
        counts[leaf_of[i]] += 1;
    }
    for (idx, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf { value } = node {
            *value = if counts[idx] > 0 {
                sums[idx] / counts[idx] as f64
            } else {
                0.0
            };
        }
    }
    let contributions = leaf_of
        .iter()
        .map(|&leaf| match nodes[leaf] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("samples end in leaves"),
        })
        .collect();
    (RegressionTree { nodes }, contributions)
}

/// Fits a boosted ensemble on a dense design matrix (`rows[i]` has
/// `n_features` entries).
pub fn fit_matrix(
    rows: &[&[f64]],
    targets: &[f64],
    n_features: usize,
    params: &BoostParams,
) -> Result<TreeEnsemble> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch(rows.len(), targets.len()));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be in (0, 1], got {}",
            params.learning_rate
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n_features) {
        return Err(Error::Shape(format!(
            "row has {} features, expected {n_features}",
            r.len()
        )));
    }

    let base_score = targets.iter().sum::<f64>() / targets.len() as f64;
    let columns = Columns::new(rows, n_features);
    let mut residual: Vec<f64> = targets.iter().map(|y| y - base_score).collect();
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let (tree, contrib) = grow_tree(&columns, &residual, params);
        for (r, c) in residual.iter_mut().zip(&contrib) {
            *r -= params.learning_rate * c;
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        n_features,
        base_score,
        learning_rate: params.learning_rate,
        trees,
    })
}
