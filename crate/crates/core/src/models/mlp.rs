//! One-hidden-layer ReLU network trained with Adam on shuffled minibatches.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::logistic::sigmoid;
use super::{check_binary, check_width, check_xy, Task};
use crate::rng::{child_rng, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpInit {
    /// Uniform in ±√(6 / (fan_in + fan_out)), biases included.
    GlorotUniform,
    /// All parameters zero.
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: usize,
    /// L2 strength on weight matrices (not biases).
    pub alpha: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Number of epochs.
    pub max_iter: usize,
    pub batch_size: usize,
    pub init: MlpInit,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 100,
            alpha: 1e-4,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iter: 200,
            batch_size: 200,
            init: MlpInit::GlorotUniform,
        }
    }
}

/// Network parameters. `w1` is `hidden × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
}

impl MlpParams {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        MlpParams {
            w1: DMatrix::zeros(hidden, inputs),
            b1: DVector::zeros(hidden),
            w2: DVector::zeros(hidden),
            b2: 0.0,
        }
    }

    fn init(inputs: usize, hidden: usize, init: MlpInit, seed: u64) -> Self {
        let mut p = Self::zeros(inputs, hidden);
        if init == MlpInit::Zeros {
            return p;
        }
        let mut rng = child_rng(seed, 0);
        let b1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let b2 = (6.0 / (hidden + 1) as f64).sqrt();
        for v in p.w1.iter_mut() {
            *v = rng.random_range(-b1..b1);
        }
        for v in p.b1.iter_mut() {
            *v = rng.random_range(-b1..b1);
        }
        for v in p.w2.iter_mut() {
            *v = rng.random_range(-b2..b2);
        }
        p.b2 = rng.random_range(-b2..b2);
        p
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flatten as `w1` (column-major), `b1`, `w2`, `b2`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(self.w1.iter());
        v.extend(self.b1.iter());
        v.extend(self.w2.iter());
        v.push(self.b2);
        v
    }

    /// Inverse of [`MlpParams::to_vec`] using this value's shapes.
    pub fn with_values(&self, values: &[f64]) -> Self {
        assert_eq!(values.len(), self.len());
        let (h, i) = self.w1.shape();
        let mut at = 0;
        let mut take = |k: usize| {
            let s = &values[at..at + k];
            at += k;
            s
        };
        let w1 = DMatrix::from_column_slice(h, i, take(h * i));
        let b1 = DVector::from_column_slice(take(h));
        let w2 = DVector::from_column_slice(take(h));
        let b2 = take(1)[0];
        MlpParams { w1, b1, w2, b2 }
    }

    fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    /// Raw network output (pre-sigmoid for classification).
    pub fn forward(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut pre = x * self.w1.transpose();
        for mut row in pre.row_iter_mut() {
            row += self.b1.transpose();
        }
        pre.apply(|v| *v = v.max(0.0));
        let mut out = pre * &self.w2;
        out.add_scalar_mut(self.b2);
        out
    }

    /// Batch loss and its gradient.
    ///
    /// Regression: mean of `(f − y)² / 2`. Classification: mean log-loss of
    /// `sigmoid(f)`. Both add `alpha / (2n) · (‖w1‖² + ‖w2‖²)`.
    pub fn loss_and_gradient(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        task: Task,
        alpha: f64,
    ) -> (f64, MlpParams) {
        let n = x.nrows() as f64;
        let mut pre = x * self.w1.transpose();
        for mut row in pre.row_iter_mut() {
            row += self.b1.transpose();
        }
        let act = pre.map(|v| v.max(0.0));
        let mut out = &act * &self.w2;
        out.add_scalar_mut(self.b2);

        let mut loss = 0.0;
        let mut delta = DVector::zeros(y.len());
        for (i, (&f, &t)) in out.iter().zip(y).enumerate() {
            match task {
                Task::Regression => {
                    loss += 0.5 * (f - t).powi(2);
                    delta[i] = f - t;
                }
                Task::Classification => {
                    // log(1 + e^f) − t·f, stable form.
                    let sp = if f > 0.0 {
                        f + (-f).exp().ln_1p()
                    } else {
                        f.exp().ln_1p()
                    };
                    loss += sp - t * f;
                    delta[i] = sigmoid(f) - t;
                }
            }
        }
        loss /= n;
        delta /= n;
        loss += alpha / (2.0 * n) * (self.w1.norm_squared() + self.w2.norm_squared());

        let gw2 = act.transpose() * &delta + &self.w2 * (alpha / n);
        let gb2 = delta.sum();
        let mut dh = &delta * self.w2.transpose();
        for (d, a) in dh.iter_mut().zip(pre.iter()) {
            if *a <= 0.0 {
                *d = 0.0;
            }
        }
        let gw1 = dh.transpose() * x + &self.w1 * (alpha / n);
        let gb1 = DVector::from_iterator(dh.ncols(), dh.column_iter().map(|c| c.sum()));
        (
            loss,
            MlpParams {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        )
    }
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub params: MlpParams,
    pub task: Task,
    pub config: MlpConfig,
    /// Adam step count.
    pub steps: u64,
    /// Mean batch loss of each epoch.
    pub loss_curve: Vec<f64>,
}

impl MlpModel {
    /// Regression output, or probability of class 1.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(self.params.w1.ncols(), x)?;
        let out = self.params.forward(x);
        Ok(match self.task {
            Task::Regression => out.iter().copied().collect(),
            Task::Classification => out.iter().map(|&f| sigmoid(f)).collect(),
        })
    }
}

pub fn fit_mlp(
    x: &DMatrix<f64>,
    y: &[f64],
    task: Task,
    cfg: &MlpConfig,
    seed: u64,
) -> Result<MlpModel> {
    check_xy(x, y)?;
    if task == Task::Classification {
        check_binary(y)?;
    }
    if cfg.hidden == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument(
            "hidden width and batch size must be positive".into(),
        ));
    }
    let n = x.nrows();
    let mut params = MlpParams::init(x.ncols(), cfg.hidden, cfg.init, seed);
    let dim = params.len();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut steps = 0u64;
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(crate::rng::derive_seed(seed, 1));
    let mut loss_curve = Vec::with_capacity(cfg.max_iter);

    for epoch in 0..cfg.max_iter {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let xb = x.select_rows(chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let (loss, grad) = params.loss_and_gradient(&xb, &yb, task, cfg.alpha);
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite MLP loss at epoch {epoch}, step {steps}"
                )));
            }
            epoch_loss += loss * chunk.len() as f64;
            steps += 1;
            let g = grad.to_vec();
            let mut theta = params.to_vec();
            let lr = cfg.learning_rate * (1.0 - cfg.beta2.powi(steps as i32)).sqrt()
                / (1.0 - cfg.beta1.powi(steps as i32));
            for k in 0..dim {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                theta[k] -= lr * m[k] / (v[k].sqrt() + cfg.epsilon);
            }
            params = params.with_values(&theta);
            if !params.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite MLP parameters at epoch {epoch}, step {steps}"
                )));
            }
        }
        loss_curve.push(epoch_loss / n as f64);
    }
    Ok(MlpModel {
        params,
        task,
        config: cfg.clone(),
        steps,
        loss_curve,
    })
}
