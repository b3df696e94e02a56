//! Scores, data-sufficiency measures and relative performance differences.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Column, DataTable};
use crate::{Error, Result};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("cannot score empty vectors".into()));
    }
    Ok(())
}

/// Binary F1 with class 1 as positive; 0 when precision + recall is 0.
pub fn f1_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let (mut tp, mut fp, mut fne) = (0.0, 0.0, 0.0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == 1.0, p == 1.0) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fne += 1.0,
            (false, false) => {}
        }
    }
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fne > 0.0 { tp / (tp + fne) } else { 0.0 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

pub fn accuracy(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / y_true.len() as f64)
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let sse: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(sse / y_true.len() as f64)
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    Ok(mse(y_true, y_pred)?.sqrt())
}

/// Average samples per level, `n / c`.
pub fn aspl(n_samples: usize, cardinality: usize) -> Result<f64> {
    if cardinality == 0 {
        return Err(Error::InvalidArgument(
            "cardinality must be at least 1".into(),
        ));
    }
    Ok(n_samples as f64 / cardinality as f64)
}

/// Distinct non-missing levels of a categorical column.
pub fn cardinality(values: &[Option<String>]) -> usize {
    let mut seen: Vec<&str> = values.iter().flatten().map(String::as_str).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// `n` over the largest categorical cardinality in the table.
pub fn minaspl(table: &DataTable) -> Result<f64> {
    let max_c = table
        .features()
        .filter_map(|(_, col)| match col {
            Column::Categorical(v) => Some(cardinality(v)),
            Column::Numeric(_) => None,
        })
        .max()
        .ok_or_else(|| {
            Error::InvalidArgument("minASPL is undefined without categorical columns".into())
        })?;
    aspl(table.row_count(), max_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    F1,
    Rmse,
    Mse,
    Accuracy,
}

impl MetricName {
    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricName::F1 | MetricName::Accuracy)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::F1 => "f1",
            MetricName::Rmse => "rmse",
            MetricName::Mse => "mse",
            MetricName::Accuracy => "accuracy",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(MetricName::F1),
            "rmse" => Ok(MetricName::Rmse),
            "mse" => Ok(MetricName::Mse),
            "accuracy" | "acc" => Ok(MetricName::Accuracy),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }
}

/// One benchmark cell for one seed. Failed cells carry no value and a
/// non-`ok` status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub dataset: String,
    pub encoder: String,
    pub model: String,
    pub seed: u64,
    pub metric: MetricName,
    pub value: Option<f64>,
    /// Seconds spent fitting encoders and transforming both splits.
    pub encode_time: f64,
    /// Seconds spent fitting the model.
    pub train_time: f64,
    /// Width of the encoded design matrix.
    pub dim: Option<usize>,
    pub min_aspl: Option<f64>,
    pub status: String,
}

impl MetricRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok" && self.value.is_some_and(f64::is_finite)
    }

    pub fn total_time(&self) -> f64 {
        self.encode_time + self.train_time
    }
}

pub fn write_records<W: Write>(records: &[MetricRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<records csv>", e))?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|rec| rec.map_err(Error::from))
        .collect()
}

/// Relative performance difference of each encoder to the best one for a
/// single dataset × model cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RelPerfRow {
    pub dataset: String,
    pub model: String,
    pub metric: MetricName,
    pub best_encoder: String,
    /// Per-encoder mean metric across seeds.
    pub means: BTreeMap<String, f64>,
    /// `|m − m_best| / |m_best|`; NaN where undefined.
    pub diffs: BTreeMap<String, f64>,
    /// Set when the best value is 0 while some other encoder differs, which
    /// leaves the ratio undefined.
    pub undefined: bool,
}

/// Build the relative-difference row for records of one dataset × model.
/// Failed records are ignored; seeds are averaged per encoder before the
/// best encoder is picked, and ties go to the lexicographically first name.
pub fn relative_perf_diff(records: &[MetricRecord]) -> Result<RelPerfRow> {
    let ok: Vec<&MetricRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let first = ok
        .first()
        .ok_or_else(|| Error::InvalidArgument("no successful records in cell".into()))?;
    if ok
        .iter()
        .any(|r| r.dataset != first.dataset || r.model != first.model || r.metric != first.metric)
    {
        return Err(Error::InvalidArgument(
            "records span more than one dataset, model or metric".into(),
        ));
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in &ok {
        let e = sums.entry(r.encoder.clone()).or_default();
        e.0 += r.value.expect("ok records carry a value");
        e.1 += 1;
    }
    let means: BTreeMap<String, f64> = sums
        .into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect();
    let metric = first.metric;
    let mut best: Option<(&str, f64)> = None;
    for (name, &m) in &means {
        let improves = match best {
            None => true,
            Some((_, b)) if metric.higher_is_better() => m > b,
            Some((_, b)) => m < b,
        };
        if improves {
            best = Some((name, m));
        }
    }
    let (best_name, best_value) = best.expect("at least one encoder");
    let mut undefined = false;
    let diffs = means
        .iter()
        .map(|(name, &m)| {
            let d = if m == best_value {
                0.0
            } else if best_value == 0.0 {
                undefined = true;
                f64::NAN
            } else {
                (m - best_value).abs() / best_value.abs()
            };
            (name.clone(), d)
        })
        .collect();
    Ok(RelPerfRow {
        dataset: first.dataset.clone(),
        model: first.model.clone(),
        metric,
        best_encoder: best_name.to_owned(),
        means: means.clone(),
        diffs,
        undefined,
    })
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
