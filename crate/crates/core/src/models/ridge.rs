//! Ridge regression with an unpenalized intercept and cross-validated alpha.

use nalgebra::{DMatrix, DVector};

use super::{check_width, check_xy};
use crate::{Error, Result};

pub const DEFAULT_ALPHAS: [f64; 3] = [0.1, 1.0, 10.0];

const CV_FOLDS: usize = 5;

#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub weights: DVector<f64>,
    pub intercept: f64,
    pub alpha: f64,
    /// Cross-validated MSE per candidate alpha, in candidate order.
    pub cv_scores: Vec<(f64, f64)>,
}

impl RidgeModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(self.weights.len(), x)?;
        let out = x * &self.weights;
        Ok(out.iter().map(|v| v + self.intercept).collect())
    }
}

/// Solve the centered normal equations `(XᵀX + αI)w = Xᵀy` for one alpha.
pub fn fit_ridge_alpha(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<RidgeModel> {
    check_xy(x, y)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let n = x.nrows();
    let p = x.ncols();
    let x_mean: DVector<f64> = DVector::from_iterator(p, x.column_iter().map(|c| c.mean()));
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += alpha;
    }
    let rhs = xc.transpose() * yc;
    let weights = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("ridge system is singular".into()))?,
    };
    let intercept = y_mean - x_mean.dot(&weights);
    Ok(RidgeModel {
        weights,
        intercept,
        alpha,
        cv_scores: Vec::new(),
    })
}

/// Fit ridge with alpha chosen by 5-fold CV MSE (leave-one-out when n < 5).
/// Folds are interleaved: row `i` belongs to fold `i mod k`. Ties go to the
/// earliest candidate.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], alphas: &[f64]) -> Result<RidgeModel> {
    check_xy(x, y)?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument("ridge needs at least 2 rows".into()));
    }
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("empty alpha grid".into()));
    }
    let k = CV_FOLDS.min(n);
    let mut scores = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut sse = 0.0;
        for fold in 0..k {
            let train: Vec<usize> = (0..n).filter(|i| i % k != fold).collect();
            let test: Vec<usize> = (0..n).filter(|i| i % k == fold).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = fit_ridge_alpha(&xt, &yt, alpha)?;
            let pred = model.predict(&x.select_rows(&test))?;
            sse += test
                .iter()
                .zip(&pred)
                .map(|(&i, p)| (y[i] - p).powi(2))
                .sum::<f64>();
        }
        scores.push((alpha, sse / n as f64));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.1 < scores[best].1 {
            best = i;
        }
    }
    let mut model = fit_ridge_alpha(x, y, scores[best].0)?;
    model.cv_scores = scores;
    Ok(model)
}

/// Gradient of `‖y − Xw − b‖² + α‖w‖²`, weights first, intercept last.
pub fn ridge_gradient(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &DVector<f64>,
    intercept: f64,
    alpha: f64,
) -> DVector<f64> {
    let p = x.ncols();
    let resid = DVector::from_iterator(
        y.len(),
        (x * weights).iter().zip(y).map(|(f, t)| t - f - intercept),
    );
    let gw = x.transpose() * &resid * -2.0 + weights * (2.0 * alpha);
    let mut g = DVector::zeros(p + 1);
    g.rows_mut(0, p).copy_from(&gw);
    g[p] = -2.0 * resid.sum();
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_fn(20, 3, |i, j| {
            ((i * 7 + j * 3) % 11) as f64 - 5.0 + j as f64 * 0.3
        });
        let y = (0..20)
            .map(|i| 2.0 * x[(i, 0)] - 1.0 * x[(i, 1)] + 0.5 * x[(i, 2)] + 3.0)
            .collect();
        (x, y)
    }

    #[test]
    fn recovers_noiseless_weights_with_tiny_alpha() {
        let (x, y) = design();
        let m = fit_ridge(&x, &y, &[1e-8]).unwrap();
        let pred = m.predict(&x).unwrap();
        let mse = pred
            .iter()
            .zip(&y)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / 20.0;
        assert!(mse < 1e-6, "mse {mse}");
        assert!((m.weights[0] - 2.0).abs() < 1e-6);
        assert!((m.intercept - 3.0).abs() < 1e-6);
    }

    #[test]
    fn constant_target() {
        let (x, _) = design();
        let m = fit_ridge(&x, &[4.0; 20], &DEFAULT_ALPHAS).unwrap();
        assert!(m.weights.amax() < 1e-12);
        assert!((m.intercept - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let (x, mut y) = design();
        for (i, v) in y.iter_mut().enumerate() {
            *v += ((i * 13) % 5) as f64 * 0.1;
        }
        let m = fit_ridge(&x, &y, &DEFAULT_ALPHAS).unwrap();
        let g = ridge_gradient(&x, &y, &m.weights, m.intercept, m.alpha);
        assert!(g.norm() < 1e-8, "{}", g.norm());
    }

    #[test]
    fn residual_orthogonal_to_columns() {
        let (x, mut y) = design();
        y[3] += 1.0;
        let m = fit_ridge_alpha(&x, &y, 1e-12).unwrap();
        let pred = m.predict(&x).unwrap();
        let r = DVector::from_iterator(20, y.iter().zip(&pred).map(|(t, p)| t - p));
        assert!((x.transpose() * &r).amax() < 1e-8);
        assert!(r.sum().abs() < 1e-8);
    }

    #[test]
    fn selection_prefers_first_on_ties() {
        let (x, _) = design();
        let m = fit_ridge(&x, &[1.0; 20], &[5.0, 1.0]).unwrap();
        assert_eq!(m.alpha, 5.0);
        assert_eq!(m.cv_scores.len(), 2);
    }

    #[test]
    fn width_mismatch() {
        let (x, y) = design();
        let m = fit_ridge(&x, &y, &DEFAULT_ALPHAS).unwrap();
        assert!(m.predict(&DMatrix::zeros(2, 2)).is_err());
    }
}
