//! Greedy CART trees over dense real features.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use super::{check_binary, check_width, check_xy, Task};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Impurity {
    /// Within-node variance.
    Mse,
    /// Binary Gini index.
    Gini,
    /// Binary entropy in nats.
    Entropy,
}

impl Impurity {
    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Regression => Impurity::Mse,
            Task::Classification => Impurity::Gini,
        }
    }

    /// Impurity of a node with `n` samples, target sum `s` and sum of
    /// squares `ss`.
    pub fn of_sums(self, n: f64, s: f64, ss: f64) -> f64 {
        if n == 0.0 {
            return 0.0;
        }
        match self {
            Impurity::Mse => (ss / n - (s / n).powi(2)).max(0.0),
            Impurity::Gini => {
                let p = s / n;
                2.0 * p * (1.0 - p)
            }
            Impurity::Entropy => {
                let p = s / n;
                let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
                h(p) + h(1.0 - p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub impurity: Impurity,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl TreeConfig {
    /// Standalone decision tree: depth 10, at least 10 samples per split.
    pub fn decision_tree(task: Task) -> Self {
        TreeConfig {
            impurity: Impurity::default_for(task),
            max_depth: Some(10),
            min_samples_split: 10,
        }
    }

    /// Unlimited depth, splits down to 2 samples.
    pub fn unrestricted(task: Task) -> Self {
        TreeConfig {
            impurity: Impurity::default_for(task),
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
        depth: usize,
        n_samples: usize,
        impurity: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Arena indices of the children.
        left: usize,
        right: usize,
        depth: usize,
        n_samples: usize,
        impurity: f64,
        /// Sample-weighted impurity of the two children.
        child_impurity: f64,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { depth, .. } | TreeNode::Split { depth, .. } => *depth,
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Leaf { n_samples, .. } | TreeNode::Split { n_samples, .. } => *n_samples,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    /// Node arena; the root is at index 0.
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub config: TreeConfig,
}

impl TreeModel {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(self.n_features, x)?;
        let mut row = vec![0.0; x.ncols()];
        Ok((0..x.nrows())
            .map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = x[(i, j)];
                }
                self.predict_row(&row)
            })
            .collect())
    }
}

/// Midpoints between consecutive distinct values; `c` distinct values give
/// `c − 1` thresholds.
pub fn candidate_thresholds(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| midpoint(w[0], w[1])).collect()
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    // Rounding can push the midpoint onto `hi`, which would send it left.
    if m >= hi {
        lo
    } else {
        m
    }
}

pub fn fit_tree(x: &DMatrix<f64>, y: &[f64], cfg: &TreeConfig) -> Result<TreeModel> {
    check_xy(x, y)?;
    let rows: Vec<usize> = (0..x.nrows()).collect();
    build(x, y, rows, cfg, None)
}

/// Per-split feature subsampling for forests.
pub(crate) struct FeatureSampler<'a> {
    pub per_split: usize,
    pub rng: &'a mut Rng,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

pub(crate) fn build(
    x: &DMatrix<f64>,
    y: &[f64],
    rows: Vec<usize>,
    cfg: &TreeConfig,
    mut sampler: Option<FeatureSampler<'_>>,
) -> Result<TreeModel> {
    if cfg.impurity != Impurity::Mse {
        check_binary(y)?;
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot grow a tree on zero rows".into(),
        ));
    }
    let p = x.ncols();
    let mut nodes: Vec<Option<TreeNode>> = vec![None];
    let mut stack = vec![(0usize, rows, 0usize)];
    let mut features: Vec<usize> = (0..p).collect();
    let mut pairs: Vec<(f64, f64)> = Vec::new();

    while let Some((id, idx, depth)) = stack.pop() {
        let n = idx.len() as f64;
        let s: f64 = idx.iter().map(|&i| y[i]).sum();
        let ss: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
        let impurity = cfg.impurity.of_sums(n, s, ss);
        let value = s / n;
        let pure = idx.iter().all(|&i| y[i] == y[idx[0]]);
        let depth_ok = cfg.max_depth.is_none_or(|d| depth < d);
        let mut best: Option<Candidate> = None;

        if !pure && depth_ok && idx.len() >= cfg.min_samples_split.max(2) {
            let budget = match sampler.as_mut() {
                Some(smp) => {
                    features.shuffle(smp.rng);
                    smp.per_split.clamp(1, p.max(1))
                }
                None => p,
            };
            let mut visited = 0;
            for &f in &features {
                if visited >= budget && best.is_some() {
                    break;
                }
                pairs.clear();
                pairs.extend(idx.iter().map(|&i| (x[(i, f)], y[i])));
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                if pairs[0].0 == pairs[pairs.len() - 1].0 {
                    continue;
                }
                visited += 1;
                let (mut ls, mut lss) = (0.0, 0.0);
                for k in 0..pairs.len() - 1 {
                    let t = pairs[k].1;
                    ls += t;
                    lss += t * t;
                    if pairs[k].0 == pairs[k + 1].0 {
                        continue;
                    }
                    let nl = (k + 1) as f64;
                    let nr = n - nl;
                    let score = (nl * cfg.impurity.of_sums(nl, ls, lss)
                        + nr * cfg.impurity.of_sums(nr, s - ls, ss - lss))
                        / n;
                    if best.as_ref().is_none_or(|b| score < b.score) {
                        best = Some(Candidate {
                            feature: f,
                            threshold: midpoint(pairs[k].0, pairs[k + 1].0),
                            score,
                        });
                    }
                }
            }
        }

        match best {
            Some(c) => {
                let (li, ri): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x[(i, c.feature)] <= c.threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(None);
                nodes.push(None);
                nodes[id] = Some(TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                    depth,
                    n_samples: idx.len(),
                    impurity,
                    child_impurity: c.score,
                });
                stack.push((right, ri, depth + 1));
                stack.push((left, li, depth + 1));
            }
            None => {
                nodes[id] = Some(TreeNode::Leaf {
                    value,
                    depth,
                    n_samples: idx.len(),
                    impurity,
                });
            }
        }
    }
    Ok(TreeModel {
        nodes: nodes
            .into_iter()
            .map(|n| n.expect("every node is filled"))
            .collect(),
        n_features: p,
        config: cfg.clone(),
    })
}
