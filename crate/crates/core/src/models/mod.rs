//! Desk-scale learners.
//!
//! All learners take a dense `n × p` design matrix and a target slice.
//! Classification targets are 0/1 reals; classifiers predict the probability
//! of class 1 and [`threshold`] turns that into labels.

mod forest;
mod logistic;
mod mlp;
mod ridge;
mod tree;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use forest::{fit_forest, ForestConfig, ForestModel, MaxFeatures};
pub use logistic::{
    fit_logistic, logistic_gradient, logistic_objective, sigmoid, LogisticConfig, LogisticModel,
};
pub use mlp::{fit_mlp, MlpConfig, MlpInit, MlpModel, MlpParams};
pub use ridge::{fit_ridge, fit_ridge_alpha, ridge_gradient, RidgeModel, DEFAULT_ALPHAS};
pub use tree::{candidate_thresholds, fit_tree, Impurity, TreeConfig, TreeModel, TreeNode};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    Classification,
}

/// Label 1 when the probability exceeds 0.5.
pub fn threshold(probabilities: &[f64]) -> Vec<f64> {
    probabilities
        .iter()
        .map(|&p| if p > 0.5 { 1.0 } else { 0.0 })
        .collect()
}

pub(crate) fn check_xy(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("cannot fit on zero rows".into()));
    }
    Ok(())
}

pub(crate) fn check_width(expected: usize, x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn check_binary(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(
            "classification targets must be 0 or 1".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Ridge linear regression.
    Lnr,
    /// L2 logistic regression.
    Lgr,
    /// One-hidden-layer MLP.
    Nn,
    /// CART decision tree.
    Dt,
    /// Random forest.
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Lnr,
        ModelKind::Lgr,
        ModelKind::Nn,
        ModelKind::Dt,
        ModelKind::Rf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lnr => "lnr",
            ModelKind::Lgr => "lgr",
            ModelKind::Nn => "nn",
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
        }
    }

    pub fn supports(self, task: Task) -> bool {
        match self {
            ModelKind::Lnr => task == Task::Regression,
            ModelKind::Lgr => task == Task::Classification,
            ModelKind::Nn | ModelKind::Dt | ModelKind::Rf => true,
        }
    }

    /// Affine-transformation-input models see the encoded features through
    /// a linear map first.
    pub fn is_affine_input(self) -> bool {
        matches!(self, ModelKind::Lnr | ModelKind::Lgr | ModelKind::Nn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lnr" | "ridge" | "linear" => Ok(ModelKind::Lnr),
            "lgr" | "logistic" => Ok(ModelKind::Lgr),
            "nn" | "mlp" => Ok(ModelKind::Nn),
            "dt" | "tree" | "cart" => Ok(ModelKind::Dt),
            "rf" | "forest" => Ok(ModelKind::Rf),
            _ => Err(Error::InvalidArgument(format!("unknown model `{s}`"))),
        }
    }
}

/// Model variant plus hyperparameters; unset fields take the defaults of
/// the corresponding learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples_split: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<usize>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            alphas: None,
            c: None,
            max_iter: None,
            hidden: None,
            max_depth: None,
            min_samples_split: None,
            n_trees: None,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Fit on `(x, y)`. `seed` drives every random choice of the learner.
    pub fn fit(&self, x: &DMatrix<f64>, y: &[f64], task: Task, seed: u64) -> Result<FittedModel> {
        if !self.kind.supports(task) {
            return Err(Error::InvalidArgument(format!(
                "model `{}` does not support {task:?}",
                self.kind
            )));
        }
        let model = match self.kind {
            ModelKind::Lnr => {
                let alphas = self
                    .alphas
                    .clone()
                    .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
                FittedModel::Ridge(fit_ridge(x, y, &alphas)?)
            }
            ModelKind::Lgr => {
                let mut cfg = LogisticConfig::default();
                if let Some(c) = self.c {
                    cfg.c = c;
                }
                if let Some(it) = self.max_iter {
                    cfg.max_iter = it;
                }
                FittedModel::Logistic(fit_logistic(x, y, &cfg)?)
            }
            ModelKind::Nn => {
                let mut cfg = MlpConfig::default();
                if let Some(it) = self.max_iter {
                    cfg.max_iter = it;
                }
                if let Some(h) = self.hidden {
                    cfg.hidden = h;
                }
                FittedModel::Mlp(fit_mlp(x, y, task, &cfg, seed)?)
            }
            ModelKind::Dt => {
                let mut cfg = TreeConfig::decision_tree(task);
                if let Some(d) = self.max_depth {
                    cfg.max_depth = Some(d);
                }
                if let Some(m) = self.min_samples_split {
                    cfg.min_samples_split = m;
                }
                FittedModel::Tree(fit_tree(x, y, &cfg)?)
            }
            ModelKind::Rf => {
                let mut cfg = ForestConfig::new(task);
                if let Some(n) = self.n_trees {
                    cfg.n_trees = n;
                }
                if let Some(d) = self.max_depth {
                    cfg.tree.max_depth = Some(d);
                }
                if let Some(m) = self.min_samples_split {
                    cfg.tree.min_samples_split = m;
                }
                FittedModel::Forest(fit_forest(x, y, &cfg, seed)?)
            }
        };
        Ok(model)
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Ridge(RidgeModel),
    Logistic(LogisticModel),
    Mlp(MlpModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

impl FittedModel {
    /// Real predictions for regression, class-1 probabilities for
    /// classification.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            FittedModel::Ridge(m) => m.predict(x),
            FittedModel::Logistic(m) => m.predict_proba(x),
            FittedModel::Mlp(m) => m.predict(x),
            FittedModel::Tree(m) => m.predict(x),
            FittedModel::Forest(m) => m.predict(x),
        }
    }

    pub fn predict_labels(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(threshold(&self.predict(x)?))
    }
}
