//! Bagged CART forest with per-split feature subsampling.

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;

use super::tree::{build, FeatureSampler, TreeConfig, TreeModel};
use super::{check_width, check_xy, Task};
use crate::rng::{child_rng, derive_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    /// ⌈√p⌉ features per split.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => (p as f64).sqrt().ceil() as usize,
            MaxFeatures::All => p,
            MaxFeatures::Count(k) => k.min(p),
        }
        .max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub task: Task,
    pub tree: TreeConfig,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl ForestConfig {
    /// 100 unrestricted trees on bootstrap samples, ⌈√p⌉ features per split.
    pub fn new(task: Task) -> Self {
        ForestConfig {
            n_trees: 100,
            task,
            tree: TreeConfig::unrestricted(task),
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub tree_seeds: Vec<u64>,
    pub task: Task,
    pub n_features: usize,
}

impl ForestModel {
    /// Mean of tree outputs for regression; fraction of trees voting for
    /// class 1 for classification.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(self.n_features, x)?;
        let mut out = vec![0.0; x.nrows()];
        let mut row = vec![0.0; x.ncols()];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            let total: f64 = self
                .trees
                .iter()
                .map(|t| {
                    let v = t.predict_row(&row);
                    match self.task {
                        Task::Regression => v,
                        Task::Classification => f64::from(u8::from(v > 0.5)),
                    }
                })
                .sum();
            *o = total / self.trees.len() as f64;
        }
        Ok(out)
    }
}

pub fn fit_forest(
    x: &DMatrix<f64>,
    y: &[f64],
    cfg: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    check_xy(x, y)?;
    if cfg.n_trees == 0 {
        return Err(Error::InvalidArgument(
            "forest needs at least one tree".into(),
        ));
    }
    let n = x.nrows();
    let per_split = cfg.max_features.resolve(x.ncols());
    let tree_seeds: Vec<u64> = (0..cfg.n_trees as u64)
        .map(|t| derive_seed(seed, t))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&ts| {
            let mut rng = child_rng(ts, 0);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let sampler = FeatureSampler {
                per_split,
                rng: &mut rng,
            };
            build(x, y, rows, &cfg.tree, Some(sampler))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        tree_seeds,
        task: cfg.task,
        n_features: x.ncols(),
    })
}
