//! Empirical-Bayes target encoders: `φ(v_k) = B_k·μ̂_k + (1 − B_k)·μ`.

use super::{fit_levels, EncoderKind, EncoderSpec, FittedEncoder, LevelTable, UnseenPolicy};
use crate::{Error, Result};

/// Per-level target summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub levels: LevelTable,
    /// `m_k`: rows per level.
    pub counts: Vec<usize>,
    /// `μ̂_k`: target mean per level.
    pub means: Vec<f64>,
    /// Within-level sum of squared deviations from `μ̂_k`.
    pub within_ss: Vec<f64>,
    /// `m`: total rows.
    pub total: usize,
    /// `μ`: global target mean.
    pub prior: f64,
}

impl GroupStats {
    pub fn cardinality(&self) -> usize {
        self.counts.len()
    }

    /// Pooled within-level variance `Σ SS_k / (m − c)`; `None` when every
    /// level has a single row.
    pub fn pooled_variance(&self) -> Option<f64> {
        let dof = self.total.checked_sub(self.cardinality())?;
        (dof > 0).then(|| self.within_ss.iter().sum::<f64>() / dof as f64)
    }
}

pub fn compute_group_stats<S: AsRef<str>>(column: &[S], target: &[f64]) -> Result<GroupStats> {
    if column.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: column.len(),
            got: target.len(),
        });
    }
    let levels = fit_levels(column)?;
    let c = levels.cardinality();
    let mut counts = vec![0usize; c];
    let mut sums = vec![0.0; c];
    let idx: Vec<usize> = column
        .iter()
        .map(|v| {
            levels
                .index_of(v.as_ref())
                .expect("level table covers the column")
        })
        .collect();
    for (&k, &y) in idx.iter().zip(target) {
        counts[k] += 1;
        sums[k] += y;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &m)| s / m as f64)
        .collect();
    let mut within_ss = vec![0.0; c];
    for (&k, &y) in idx.iter().zip(target) {
        within_ss[k] += (y - means[k]).powi(2);
    }
    let total = target.len();
    let prior = target.iter().sum::<f64>() / total as f64;
    Ok(GroupStats {
        levels,
        counts,
        means,
        within_ss,
        total,
        prior,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmpiricalBayes {
    Mean,
    SShrink,
    MEstimate,
    JamesStein,
}

impl EmpiricalBayes {
    fn kind(self) -> EncoderKind {
        match self {
            EmpiricalBayes::Mean => EncoderKind::Mean,
            EmpiricalBayes::SShrink => EncoderKind::SShrink,
            EmpiricalBayes::MEstimate => EncoderKind::MEstimate,
            EmpiricalBayes::JamesStein => EncoderKind::JamesStein,
        }
    }
}

/// `B = 1 / (1 + exp(−(m − s1)/s2))`.
pub fn sshrink_factor(count: usize, s1: f64, s2: f64) -> f64 {
    1.0 / (1.0 + (-(count as f64 - s1) / s2).exp())
}

/// `B = m / (m + M)`.
pub fn mestimate_factor(count: usize, m: f64) -> f64 {
    let count = count as f64;
    if count + m == 0.0 {
        return 1.0;
    }
    count / (count + m)
}

/// James–Stein shrinkage factors.
///
/// `1 − B_k = ((c−3)/(c−1)) · σ̂_k² / (σ̂_k² + τ̂²)` with `σ̂_k² = s²/m_k`
/// (pooled within-level variance `s²`) and `τ̂²` the sample variance of the
/// level means. Fewer than four levels, or no within-level degrees of
/// freedom, fall back to `B_k = 1`.
pub fn james_stein_factors(stats: &GroupStats) -> Vec<f64> {
    let c = stats.cardinality();
    let Some(s2) = stats.pooled_variance().filter(|_| c >= 4) else {
        return vec![1.0; c];
    };
    let mean_of_means = stats.means.iter().sum::<f64>() / c as f64;
    let tau2 = stats
        .means
        .iter()
        .map(|m| (m - mean_of_means).powi(2))
        .sum::<f64>()
        / (c - 1) as f64;
    let ratio = (c as f64 - 3.0) / (c as f64 - 1.0);
    stats
        .counts
        .iter()
        .map(|&mk| {
            let sigma2 = s2 / mk as f64;
            if sigma2 + tau2 <= 0.0 {
                return 1.0;
            }
            (1.0 - ratio * sigma2 / (sigma2 + tau2)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Fit one of the Empirical-Bayes encoders. Unseen levels map to `μ`.
pub fn fit_empirical_bayes(
    stats: &GroupStats,
    scheme: EmpiricalBayes,
    spec: &EncoderSpec,
) -> FittedEncoder {
    let factors: Vec<f64> = match scheme {
        EmpiricalBayes::Mean => vec![1.0; stats.cardinality()],
        EmpiricalBayes::SShrink => stats
            .counts
            .iter()
            .map(|&m| sshrink_factor(m, spec.s1, spec.s2))
            .collect(),
        EmpiricalBayes::MEstimate => stats
            .counts
            .iter()
            .map(|&m| mestimate_factor(m, spec.m))
            .collect(),
        EmpiricalBayes::JamesStein => james_stein_factors(stats),
    };
    let codes = factors
        .iter()
        .zip(&stats.means)
        .map(|(&b, &mu_k)| {
            if b == 1.0 {
                vec![mu_k]
            } else {
                vec![b * mu_k + (1.0 - b) * stats.prior]
            }
        })
        .collect();
    FittedEncoder::from_parts(
        scheme.kind(),
        stats.levels.clone(),
        codes,
        UnseenPolicy::Constant(vec![stats.prior]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_stats_basic() {
        let s = compute_group_stats(&["a", "a", "b"], &[1.0, 3.0, 5.0]).unwrap();
        assert_eq!(s.counts, vec![2, 1]);
        assert_eq!(s.means, vec![2.0, 5.0]);
        assert_eq!(s.within_ss, vec![2.0, 0.0]);
        assert_eq!(s.prior, 3.0);
        assert!(compute_group_stats(&["a"], &[1.0, 2.0]).is_err());
        let single = compute_group_stats(&["x", "x"], &[1.0, 2.0]).unwrap();
        assert_eq!(single.means[0], single.prior);
    }

    #[test]
    fn mean_encoder_is_group_average() {
        let s = compute_group_stats(&["a", "a", "b"], &[1.0, 3.0, 5.0]).unwrap();
        let enc = fit_empirical_bayes(&s, EmpiricalBayes::Mean, &EncoderSpec::default());
        assert_eq!(enc.encode("a"), vec![2.0]);
        assert_eq!(enc.encode("b"), vec![5.0]);
    }

    #[test]
    fn shrinkage_factor_values() {
        assert_eq!(sshrink_factor(20, 20.0, 10.0), 0.5);
        assert_eq!(mestimate_factor(1, 1.0), 0.5);
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((sshrink_factor(30, 20.0, 10.0) - expected).abs() < 1e-15);
        assert!((sshrink_factor(30, 20.0, 10.0) - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn sshrink_at_threshold_averages_level_and_prior() {
        let mut col = vec!["a"; 20];
        col.extend(["b"; 20]);
        let mut y = vec![1.0; 20];
        y.extend([3.0; 20]);
        let s = compute_group_stats(&col, &y).unwrap();
        let enc = fit_empirical_bayes(&s, EmpiricalBayes::SShrink, &EncoderSpec::default());
        assert!((enc.encode("a")[0] - 1.5).abs() < 1e-15);
        assert!((enc.encode("b")[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn james_stein_with_equal_means_is_constant() {
        let col = ["a", "a", "b", "b", "c", "c", "d", "d"];
        let y = [1.0, 3.0, 0.0, 4.0, 2.0, 2.0, 1.5, 2.5];
        let s = compute_group_stats(&col, &y).unwrap();
        let enc = fit_empirical_bayes(&s, EmpiricalBayes::JamesStein, &EncoderSpec::default());
        for l in ["a", "b", "c", "d"] {
            assert!((enc.encode(l)[0] - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn james_stein_falls_back_below_four_levels() {
        let s = compute_group_stats(&["a", "a", "b", "c"], &[0.0, 1.0, 5.0, 9.0]).unwrap();
        assert_eq!(james_stein_factors(&s), vec![1.0; 3]);
    }

    #[test]
    fn james_stein_factor_formula() {
        let col = ["a", "a", "b", "b", "b", "c", "c", "d", "d", "d", "d"];
        let y = [1.0, 2.0, 4.0, 5.0, 3.0, 0.0, 1.0, 7.0, 6.0, 8.0, 7.0];
        let s = compute_group_stats(&col, &y).unwrap();
        let b = james_stein_factors(&s);
        // s² = Σ SS_k / (11 − 4); τ̂² from the four level means
        let ss: f64 = s.within_ss.iter().sum();
        let s2 = ss / 7.0;
        let mm: f64 = s.means.iter().sum::<f64>() / 4.0;
        let tau2: f64 = s.means.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / 3.0;
        for (bk, &mk) in b.iter().zip(&s.counts) {
            let sig = s2 / mk as f64;
            let expected = 1.0 - (1.0 / 3.0) * sig / (sig + tau2);
            assert!((bk - expected).abs() < 1e-12);
        }
    }
}
