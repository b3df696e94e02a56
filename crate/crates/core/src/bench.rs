//! Dataset × encoder × model × seed grid runner and its reports.
//!
//! Config files are TOML:
//!
//! ```toml
//! out = "bench_out"
//! seed = 42
//! n_seeds = 3            # or: seeds = [0, 1, 2]
//! split_ratio = 0.8
//!
//! [[dataset]]
//! id = "eq3"
//! path = "eq3.csv"
//! schema = "eq3.schema"
//!
//! [[encoder]]
//! kind = "sshrink"
//! s1 = 10.0
//!
//! [[model]]
//! kind = "rf"
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::data::{load_csv, split_train_test, DataTable, Pipeline, Schema, TargetKind};
use crate::encoders::EncoderSpec;
use crate::metrics::{
    f1_score, mean_sd, minaspl, relative_perf_diff, rmse, write_records, MetricName, MetricRecord,
};
use crate::models::{threshold, ModelSpec, Task};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Datasets with `minASPL` at or above this are data-sufficient.
pub const SUFFICIENCY_CUTOFF: f64 = 100.0;
pub const DEFAULT_SEEDS: u64 = 10;
pub const DEFAULT_SPLIT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub id: String,
    pub path: PathBuf,
    pub schema: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub datasets: Vec<DatasetSpec>,
    pub encoders: Vec<EncoderSpec>,
    pub models: Vec<ModelSpec>,
    pub seeds: Vec<u64>,
    pub split_ratio: f64,
    /// Root seed mixed into every split and model seed.
    pub seed: u64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    id: String,
    path: PathBuf,
    schema: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    out: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
    n_seeds: Option<u64>,
    seeds: Option<Vec<u64>>,
    split_ratio: Option<f64>,
    #[serde(default)]
    dataset: Vec<RawDataset>,
    #[serde(default)]
    encoder: Vec<EncoderSpec>,
    #[serde(default)]
    model: Vec<ModelSpec>,
}

impl ExperimentGrid {
    /// Parse a config; relative paths are joined onto `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let seeds = match (raw.seeds, raw.n_seeds) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `seeds` or `n_seeds`, not both".into(),
                ))
            }
            (Some(s), None) => s,
            (None, n) => (0..n.unwrap_or(DEFAULT_SEEDS)).collect(),
        };
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let grid = ExperimentGrid {
            datasets: raw
                .dataset
                .into_iter()
                .map(|d| DatasetSpec {
                    id: d.id,
                    path: resolve(d.path),
                    schema: resolve(d.schema),
                })
                .collect(),
            encoders: raw.encoder,
            models: raw.model,
            seeds,
            split_ratio: raw.split_ratio.unwrap_or(DEFAULT_SPLIT),
            seed: raw.seed,
            out: raw.out.map(resolve),
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.encoders.is_empty() || self.models.is_empty() {
            return Err(Error::Config(
                "datasets, encoders and models must be nonempty".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        for e in &self.encoders {
            e.validate()?;
        }
        let unique = |names: Vec<&str>, what: &str| -> Result<()> {
            let set: BTreeSet<&str> = names.iter().copied().collect();
            if set.len() != names.len() {
                return Err(Error::Config(format!("duplicate {what} names in config")));
            }
            Ok(())
        };
        unique(
            self.datasets.iter().map(|d| d.id.as_str()).collect(),
            "dataset",
        )?;
        unique(
            self.encoders.iter().map(|e| e.kind.name()).collect(),
            "encoder",
        )?;
        unique(self.models.iter().map(|m| m.name()).collect(), "model")?;
        Ok(())
    }

    /// Records a full run produces, failures included.
    pub fn cell_count(&self) -> usize {
        self.datasets.len() * self.encoders.len() * self.models.len() * self.seeds.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 1 runs cells one after another.
    pub workers: usize,
    /// When false, recorded times are zero so outputs are reproducible.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 1,
            timing: true,
        }
    }
}

/// Bounded thread pool; parallel work started inside [`WorkerPool::install`]
/// uses at most `workers` threads.
pub struct WorkerPool(rayon::ThreadPool);

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map(WorkerPool)
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.0.install(f)
    }
}

struct LoadedDataset {
    id: String,
    table: DataTable,
    min_aspl: Option<f64>,
}

pub fn task_for(table: &DataTable) -> (Task, MetricName) {
    match table.target_kind() {
        TargetKind::Binary => (Task::Classification, MetricName::F1),
        TargetKind::Numeric => (Task::Regression, MetricName::Rmse),
    }
}

/// Run every cell. Cells that fail are recorded with an error status and
/// the rest of the grid carries on; only unreadable datasets abort.
pub fn run_grid(grid: &ExperimentGrid, options: RunOptions) -> Result<Vec<MetricRecord>> {
    grid.validate()?;
    let datasets = grid
        .datasets
        .iter()
        .map(|d| {
            let schema = Schema::from_file(&d.schema)?;
            let table = load_csv(&d.path, &schema)?.drop_missing_target();
            Ok(LoadedDataset {
                id: d.id.clone(),
                min_aspl: minaspl(&table).ok(),
                table,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(grid.cell_count());
    for d in &datasets {
        for e in &grid.encoders {
            for m in &grid.models {
                for &s in &grid.seeds {
                    cells.push((d, e, m, s));
                }
            }
        }
    }
    let pool = WorkerPool::new(options.workers)?;
    let records = pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, e, m, s)| run_cell(d, e, m, s, grid, options.timing))
            .collect()
    });
    Ok(records)
}

fn run_cell(
    data: &LoadedDataset,
    encoder: &EncoderSpec,
    model: &ModelSpec,
    seed: u64,
    grid: &ExperimentGrid,
    timing: bool,
) -> MetricRecord {
    let (task, metric) = task_for(&data.table);
    let mut rec = MetricRecord {
        dataset: data.id.clone(),
        encoder: encoder.kind.name().to_string(),
        model: model.name().to_string(),
        seed,
        metric,
        value: None,
        encode_time: 0.0,
        train_time: 0.0,
        dim: None,
        min_aspl: data.min_aspl,
        status: "ok".into(),
    };
    if let Err(e) = fill_cell(&mut rec, data, encoder, model, task, grid, timing) {
        rec.value = None;
        rec.status = format!("error: {e}");
    }
    rec
}

fn fill_cell(
    rec: &mut MetricRecord,
    data: &LoadedDataset,
    encoder: &EncoderSpec,
    model: &ModelSpec,
    task: Task,
    grid: &ExperimentGrid,
    timing: bool,
) -> Result<()> {
    if !model.kind.supports(task) {
        return Err(Error::InvalidArgument(format!(
            "model `{}` does not support {task:?}",
            model.kind
        )));
    }
    // The split depends on the seed only, so every encoder and model sees
    // the same partition.
    let split_seed = derive_seed(grid.seed, rec.seed);
    let split = split_train_test(&data.table, grid.split_ratio, split_seed)?;
    let t0 = Instant::now();
    let pipeline = Pipeline::fit(&split.train, encoder)?;
    let xtr = pipeline.transform(&split.train)?;
    let xte = pipeline.transform(&split.test)?;
    let encode_time = t0.elapsed().as_secs_f64();
    rec.dim = Some(xtr.ncols());

    let ytr = split.train.target_values()?;
    let t1 = Instant::now();
    let fitted = model.fit(&xtr, &ytr, task, derive_seed(split_seed, 1))?;
    let train_time = t1.elapsed().as_secs_f64();

    let truth = split.test.target_values()?;
    let pred = fitted.predict(&xte)?;
    let value = match task {
        Task::Classification => f1_score(&truth, &threshold(&pred))?,
        Task::Regression => rmse(&truth, &pred)?,
    };
    if !value.is_finite() {
        return Err(Error::Numerical(format!("non-finite {} score", rec.metric)));
    }
    rec.value = Some(value);
    if timing {
        rec.encode_time = encode_time;
        rec.train_time = train_time;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Insufficient,
    Sufficient,
    All,
}

impl Bucket {
    pub fn of(min_aspl: f64) -> Self {
        if min_aspl >= SUFFICIENCY_CUTOFF {
            Bucket::Sufficient
        } else {
            Bucket::Insufficient
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Insufficient => "insufficient",
            Bucket::Sufficient => "sufficient",
            Bucket::All => "all",
        }
    }
}

/// Mean ± sd of one encoder's relative difference over the cells of a
/// model × bucket group.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    /// Model name, or `all` for the pooled row.
    pub model: String,
    pub bucket: Bucket,
    pub encoder: String,
    pub mean: f64,
    pub sd: f64,
    /// Number of dataset × model cells contributing.
    pub cells: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankReport {
    pub rows: Vec<RankRow>,
    pub warnings: Vec<String>,
}

/// Aggregate relative performance differences per model and data
/// sufficiency bucket. The pooled `all` model row weights every model by its
/// number of datasets. Cells missing an encoder, lacking minASPL, or with an
/// undefined ratio are left out with a warning.
pub fn rank_encoders(records: &[MetricRecord]) -> RankReport {
    let mut report = RankReport::default();
    let mut by_cell: BTreeMap<(&str, &str), Vec<MetricRecord>> = BTreeMap::new();
    let mut encoders_per_model: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        by_cell
            .entry((r.dataset.as_str(), r.model.as_str()))
            .or_default()
            .push(r.clone());
        encoders_per_model
            .entry(r.model.as_str())
            .or_default()
            .insert(r.encoder.as_str());
    }
    // (model, bucket, encoder) -> relative differences, one per cell.
    let mut groups: BTreeMap<(String, Bucket, String), Vec<f64>> = BTreeMap::new();
    for ((dataset, model), recs) in &by_cell {
        let present: BTreeSet<&str> = recs
            .iter()
            .filter(|r| r.is_ok())
            .map(|r| r.encoder.as_str())
            .collect();
        let missing: Vec<&str> = encoders_per_model[model]
            .difference(&present)
            .copied()
            .collect();
        if !missing.is_empty() {
            report.warnings.push(format!(
                "skipping {dataset} × {model}: no successful runs for {}",
                missing.join(", ")
            ));
            continue;
        }
        let Some(min_aspl) = recs.iter().find_map(|r| r.min_aspl) else {
            report
                .warnings
                .push(format!("skipping {dataset} × {model}: minASPL unknown"));
            continue;
        };
        let row = match relative_perf_diff(recs) {
            Ok(row) => row,
            Err(e) => {
                report
                    .warnings
                    .push(format!("skipping {dataset} × {model}: {e}"));
                continue;
            }
        };
        if row.undefined {
            report.warnings.push(format!(
                "skipping {dataset} × {model}: best score is 0, relative difference undefined"
            ));
            continue;
        }
        for (enc, d) in row.diffs {
            for m in [model.to_string(), "all".to_string()] {
                for b in [Bucket::of(min_aspl), Bucket::All] {
                    groups
                        .entry((m.clone(), b, enc.clone()))
                        .or_default()
                        .push(d);
                }
            }
        }
    }
    let mut rows: Vec<RankRow> = groups
        .into_iter()
        .map(|((model, bucket, encoder), diffs)| {
            let (mean, sd) = mean_sd(&diffs);
            RankRow {
                model,
                bucket,
                encoder,
                mean,
                sd,
                cells: diffs.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.model == "all")
            .cmp(&(b.model == "all"))
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.bucket.cmp(&b.bucket))
            .then_with(|| a.mean.total_cmp(&b.mean))
            .then_with(|| a.encoder.cmp(&b.encoder))
    });
    report.rows = rows;
    report
}

impl RankReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "bucket", "encoder", "mean", "sd", "cells"])?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.bucket.as_str().to_string(),
                r.encoder.clone(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.cells.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<rank report>", e))?;
        Ok(())
    }

    /// Aligned text tables, differences in percent.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut last: Option<(&str, Bucket)> = None;
        for r in &self.rows {
            if last != Some((r.model.as_str(), r.bucket)) {
                let _ = writeln!(out, "\n[{} / {}]", r.model, r.bucket.as_str());
                last = Some((r.model.as_str(), r.bucket));
            }
            let _ = writeln!(
                out,
                "  {:<12} {:>8.2} ± {:>6.2} %  (cells: {})",
                r.encoder,
                100.0 * r.mean,
                100.0 * r.sd,
                r.cells
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeRow {
    pub encoder: String,
    /// Mean post-encoding width.
    pub dim: f64,
    pub encode_time: f64,
    pub train_time: f64,
    pub total_time: f64,
    pub runs: usize,
}

/// Mean encode, train and total seconds per encoder over successful
/// records, ordered by post-encoding width, then name.
pub fn time_report(records: &[MetricRecord]) -> Vec<TimeRow> {
    let mut acc: BTreeMap<&str, (f64, f64, f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let e = acc.entry(r.encoder.as_str()).or_default();
        e.0 += r.dim.unwrap_or(0) as f64;
        e.1 += r.encode_time;
        e.2 += r.train_time;
        e.3 += 1;
    }
    let mut rows: Vec<TimeRow> = acc
        .into_iter()
        .map(|(enc, (d, et, tt, n))| {
            let n_f = n as f64;
            TimeRow {
                encoder: enc.to_string(),
                dim: d / n_f,
                encode_time: et / n_f,
                train_time: tt / n_f,
                total_time: (et + tt) / n_f,
                runs: n,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.dim
            .total_cmp(&b.dim)
            .then_with(|| a.encoder.cmp(&b.encoder))
    });
    rows
}

pub fn write_time_report<W: Write>(rows: &[TimeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "encoder",
        "dim",
        "encode_time",
        "train_time",
        "total_time",
        "runs",
    ])?;
    for r in rows {
        w.write_record([
            r.encoder.clone(),
            r.dim.to_string(),
            r.encode_time.to_string(),
            r.train_time.to_string(),
            r.total_time.to_string(),
            r.runs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<time report>", e))?;
    Ok(())
}

/// Plain-text overview of a run.
pub fn summary_text(records: &[MetricRecord], rank: &RankReport, times: &[TimeRow]) -> String {
    let failed: Vec<&MetricRecord> = records.iter().filter(|r| !r.is_ok()).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "records: {} ({} ok, {} failed)",
        records.len(),
        records.len() - failed.len(),
        failed.len()
    );
    let mut reasons: BTreeMap<(&str, &str, &str), &str> = BTreeMap::new();
    for r in &failed {
        reasons
            .entry((r.dataset.as_str(), r.encoder.as_str(), r.model.as_str()))
            .or_insert(r.status.as_str());
    }
    for ((d, e, m), why) in reasons {
        let _ = writeln!(out, "  failed {d} / {e} / {m}: {why}");
    }
    let _ = writeln!(
        out,
        "\nrelative performance difference to the best encoder:"
    );
    out.push_str(&rank.to_text());
    let _ = writeln!(out, "\ntime per run (sorted by encoded width):");
    let _ = writeln!(
        out,
        "  {:<12} {:>8} {:>12} {:>12} {:>12}",
        "encoder", "dim", "encode_s", "train_s", "total_s"
    );
    for t in times {
        let _ = writeln!(
            out,
            "  {:<12} {:>8.1} {:>12.6} {:>12.6} {:>12.6}",
            t.encoder, t.dim, t.encode_time, t.train_time, t.total_time
        );
    }
    out
}

/// Write `records.csv` plus the reports of [`write_reports`] into `dir`.
pub fn write_outputs(dir: &Path, records: &[MetricRecord]) -> Result<String> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join("records.csv");
    write_records(
        records,
        std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?,
    )?;
    write_reports(dir, records)
}

/// Write `rank_report.csv`, `time_report.csv` and `summary.txt` into `dir`
/// and return the summary.
pub fn write_reports(dir: &Path, records: &[MetricRecord]) -> Result<String> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p).map_err(|e| Error::io(&p, e))
    };
    let rank = rank_encoders(records);
    rank.write_csv(create("rank_report.csv")?)?;
    let times = time_report(records);
    write_time_report(&times, create("time_report.csv")?)?;
    let summary = summary_text(records, &rank, &times);
    let p = dir.join("summary.txt");
    std::fs::write(&p, &summary).map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}
