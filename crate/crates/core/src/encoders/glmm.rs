//! Random-intercept encoder.
//!
//! Model: `y = μ + w_level + ε`, `w_k ~ N(0, τ²)`, `ε ~ N(0, σ²)`, fitted by
//! maximum likelihood with EM. Given `(μ, τ², σ²)` the posterior of `w_k` is
//! normal with
//!
//! ```text
//! v_k = τ²σ² / (m_k τ² + σ²)
//! ŵ_k = m_k τ² (ȳ_k − μ) / (m_k τ² + σ²)
//! ```
//!
//! and the M-step updates are
//!
//! ```text
//! μ  = Σ_k m_k (ȳ_k − ŵ_k) / m
//! τ² = Σ_k (ŵ_k² + v_k) / c
//! σ² = Σ_k [SS_k + m_k (ȳ_k − μ − ŵ_k)² + m_k v_k] / m
//! ```
//!
//! Binary targets are treated as 0/1 reals under the same Gaussian model.
//! The encoding of level `k` is its predicted random effect `ŵ_k`.

use super::target::{compute_group_stats, GroupStats};
use super::{EncoderKind, FittedEncoder, UnseenPolicy};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GlmmFit {
    pub intercept: f64,
    /// `ŵ_k` per level, in level-table order.
    pub effects: Vec<f64>,
    /// Between-level variance τ².
    pub tau2: f64,
    /// Residual variance σ².
    pub sigma2: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn posterior_means(stats: &GroupStats, mu: f64, tau2: f64, sigma2: f64) -> Vec<f64> {
    stats
        .counts
        .iter()
        .zip(&stats.means)
        .map(|(&m, &ybar)| {
            let m = m as f64;
            m * tau2 * (ybar - mu) / (m * tau2 + sigma2)
        })
        .collect()
}

fn posterior_vars(stats: &GroupStats, tau2: f64, sigma2: f64) -> Vec<f64> {
    stats
        .counts
        .iter()
        .map(|&m| tau2 * sigma2 / (m as f64 * tau2 + sigma2))
        .collect()
}

/// Fit the random-intercept model by EM.
///
/// Hitting `max_iter` is not an error: the last iterate is returned with
/// `converged = false`. The returned effects are always the posterior means
/// at the returned `(μ, τ², σ²)`.
pub fn fit_glmm<S: AsRef<str>>(
    column: &[S],
    target: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(GlmmFit, FittedEncoder)> {
    let stats = compute_group_stats(column, target)?;
    let c = stats.cardinality();
    let m = stats.total as f64;
    let var_y = target
        .iter()
        .map(|y| (y - stats.prior).powi(2))
        .sum::<f64>()
        / m;
    let sigma2_floor = (1e-12 * var_y).max(f64::MIN_POSITIVE);
    if c == 1 {
        // A lone level carries no between-level variance: complete pooling.
        let fit = GlmmFit {
            intercept: stats.prior,
            effects: vec![0.0],
            tau2: 0.0,
            sigma2: var_y.max(sigma2_floor),
            iterations: 0,
            converged: true,
        };
        let encoder = FittedEncoder::from_parts(
            EncoderKind::Glmm,
            stats.levels.clone(),
            vec![vec![0.0]],
            UnseenPolicy::Constant(vec![0.0]),
        );
        return Ok((fit, encoder));
    }

    let mut mu = stats.prior;
    let mean_of_means = stats.means.iter().sum::<f64>() / c as f64;
    let var_means = stats
        .means
        .iter()
        .map(|x| (x - mean_of_means).powi(2))
        .sum::<f64>()
        / c as f64;
    let mut tau2 = var_means.max(1e-8 * var_y);
    let mut sigma2 = stats
        .pooled_variance()
        .filter(|&v| v > 0.0)
        .unwrap_or(var_y)
        .max(sigma2_floor);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let w = posterior_means(&stats, mu, tau2, sigma2);
        let v = posterior_vars(&stats, tau2, sigma2);

        let new_mu = stats
            .counts
            .iter()
            .zip(&stats.means)
            .zip(&w)
            .map(|((&mk, &ybar), &wk)| mk as f64 * (ybar - wk))
            .sum::<f64>()
            / m;
        let new_tau2 = w.iter().zip(&v).map(|(wk, vk)| wk * wk + vk).sum::<f64>() / c as f64;
        let new_sigma2 = (stats
            .counts
            .iter()
            .zip(&stats.means)
            .zip(&stats.within_ss)
            .zip(w.iter().zip(&v))
            .map(|(((&mk, &ybar), &ss), (&wk, &vk))| {
                let mk = mk as f64;
                ss + mk * (ybar - new_mu - wk).powi(2) + mk * vk
            })
            .sum::<f64>()
            / m)
            .max(sigma2_floor);

        if !(new_tau2.is_finite() && new_sigma2.is_finite() && new_mu.is_finite()) {
            return Err(Error::Numerical(
                "EM produced non-finite variance components".into(),
            ));
        }
        let change = (new_tau2 - tau2).abs() + (new_sigma2 - sigma2).abs();
        mu = new_mu;
        tau2 = new_tau2;
        sigma2 = new_sigma2;
        if change < tol {
            converged = true;
            break;
        }
    }

    let effects = posterior_means(&stats, mu, tau2, sigma2);
    let codes = effects.iter().map(|&w| vec![w]).collect();
    let encoder = FittedEncoder::from_parts(
        EncoderKind::Glmm,
        stats.levels.clone(),
        codes,
        UnseenPolicy::Constant(vec![0.0]),
    );
    Ok((
        GlmmFit {
            intercept: mu,
            effects,
            tau2,
            sigma2,
            iterations,
            converged,
        },
        encoder,
    ))
}
