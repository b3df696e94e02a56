//! L2-penalized logistic regression fitted by Newton steps (IRLS) with a
//! backtracking line search.

use nalgebra::{DMatrix, DVector};

use super::{check_binary, check_width, check_xy};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticConfig {
    /// Inverse regularization strength.
    pub c: f64,
    pub max_iter: usize,
    /// Stop once the largest gradient entry falls below this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            c: 1.0,
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub weights: DVector<f64>,
    pub intercept: f64,
    pub c: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn decision_function(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(self.weights.len(), x)?;
        Ok((x * &self.weights)
            .iter()
            .map(|z| z + self.intercept)
            .collect())
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self
            .decision_function(x)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear(x: &DMatrix<f64>, w: &DVector<f64>, b: f64) -> DVector<f64> {
    let mut z = x * w;
    z.add_scalar_mut(b);
    z
}

/// `C·Σ logloss + ½‖w‖²`.
pub fn logistic_objective(x: &DMatrix<f64>, y: &[f64], w: &DVector<f64>, b: f64, c: f64) -> f64 {
    let z = linear(x, w, b);
    let loss: f64 = z.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum();
    c * loss + 0.5 * w.norm_squared()
}

/// Gradient of [`logistic_objective`], weights first, intercept last.
pub fn logistic_gradient(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &DVector<f64>,
    b: f64,
    c: f64,
) -> DVector<f64> {
    let p = x.ncols();
    let z = linear(x, w, b);
    let r = DVector::from_iterator(y.len(), z.iter().zip(y).map(|(&z, &t)| sigmoid(z) - t));
    let gw = x.transpose() * &r * c + w;
    let mut g = DVector::zeros(p + 1);
    g.rows_mut(0, p).copy_from(&gw);
    g[p] = c * r.sum();
    g
}

pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64], cfg: &LogisticConfig) -> Result<LogisticModel> {
    check_xy(x, y)?;
    check_binary(y)?;
    if !(cfg.c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C must be positive, got {}",
            cfg.c
        )));
    }
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::InvalidArgument(
            "logistic regression needs both classes in the target".into(),
        ));
    }
    let n = x.nrows();
    let p = x.ncols();
    // Augmented design with a trailing column of ones for the intercept.
    let mut xa = DMatrix::from_element(n, p + 1, 1.0);
    xa.columns_mut(0, p).copy_from(x);

    let mut w = DVector::zeros(p);
    let mut b = 0.0;
    let mut obj = logistic_objective(x, y, &w, b, cfg.c);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let g = logistic_gradient(x, y, &w, b, cfg.c);
        if g.amax() < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let z = linear(x, &w, b);
        let mut weighted = xa.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            let s = sigmoid(z[i]);
            row *= cfg.c * s * (1.0 - s);
        }
        let mut hess = xa.transpose() * weighted;
        for j in 0..p {
            hess[(j, j)] += 1.0;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => {
                // Intercept direction can go flat when every probability
                // saturates; a small ridge keeps the step defined.
                for j in 0..=p {
                    hess[(j, j)] += 1e-10;
                }
                hess.lu()
                    .solve(&g)
                    .ok_or_else(|| Error::Numerical("singular logistic Hessian".into()))?
            }
        };
        let mut t = 1.0;
        let slope = g.dot(&step);
        loop {
            let w_new = &w - step.rows(0, p) * t;
            let b_new = b - step[p] * t;
            let obj_new = logistic_objective(x, y, &w_new, b_new, cfg.c);
            if obj_new <= obj - 1e-4 * t * slope || t < 1e-12 {
                w = w_new;
                b = b_new;
                obj = obj_new;
                break;
            }
            t *= 0.5;
        }
        if !obj.is_finite() {
            return Err(Error::Numerical("logistic objective diverged".into()));
        }
    }
    if !converged {
        converged = logistic_gradient(x, y, &w, b, cfg.c).amax() < cfg.tol;
    }
    Ok(LogisticModel {
        weights: w,
        intercept: b,
        c: cfg.c,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_row_slice(
            8,
            2,
            &[
                -2.0, 0.5, -1.0, -0.3, -0.5, 1.0, 0.2, -1.0, 0.4, 0.8, 1.1, -0.2, 1.5, 0.3, -0.1,
                0.1,
            ],
        );
        let y = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        (x, y)
    }

    #[test]
    fn separable_pair() {
        let x = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let m = fit_logistic(&x, &[0.0, 1.0], &LogisticConfig::default()).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert!(p[0] < 0.5 && p[1] > 0.5);
    }

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let x = DMatrix::from_row_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let m = fit_logistic(&x, &y, &LogisticConfig::default()).unwrap();
        assert!(m.intercept.abs() < 1e-6, "{}", m.intercept);
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let (x, y) = fixture();
        let m = fit_logistic(&x, &y, &LogisticConfig::default()).unwrap();
        assert!(m.converged);
        let g = logistic_gradient(&x, &y, &m.weights, m.intercept, 1.0);
        assert!(g.norm() < 1e-6);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (x, y) = fixture();
        let w = DVector::from_vec(vec![0.3, -0.7]);
        let b = 0.2;
        let g = logistic_gradient(&x, &y, &w, b, 2.0);
        let h = 1e-5;
        let mut fd = DVector::zeros(3);
        for j in 0..3 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            let (mut bp, mut bm) = (b, b);
            if j < 2 {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            fd[j] = (logistic_objective(&x, &y, &wp, bp, 2.0)
                - logistic_objective(&x, &y, &wm, bm, 2.0))
                / (2.0 * h);
        }
        assert!((&g - &fd).norm() / g.norm() < 1e-4);
    }

    #[test]
    fn single_class_refused() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(fit_logistic(&x, &[1.0, 1.0, 1.0], &LogisticConfig::default()).is_err());
        assert!(fit_logistic(&x, &[0.0, 2.0, 1.0], &LogisticConfig::default()).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
    }
}
