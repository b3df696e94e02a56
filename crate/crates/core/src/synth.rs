//! Synthetic season datasets and the ASPL sweep.
//!
//! * `eq3`: `y = φ(season) + ε`, φ = (0, 1, 2, 3), ε ~ N(0, σ²).
//! * `eq5`: `y = φ(season) · sgn(sin(π x₂))`, φ = (1, −1, 1, −1),
//!   x₂ ~ U[−2, 3], stored as a 0/1 class.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{Column, DataTable, EncoderSet, Pipeline, TargetKind};
use crate::encoders::{fit_levels, EncoderSpec, FittedEncoder};
use crate::metrics::{accuracy, mean_sd, mse, MetricName};
use crate::models::{threshold, ModelSpec, Task};
use crate::rng::{child_rng, derive_seed};
use crate::{Error, Result};

pub const SEASONS: [&str; 4] = ["spring", "summer", "autumn", "winter"];
pub const SEASON_COLUMN: &str = "season";
pub const EQ3_PHI: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
pub const EQ5_PHI: [f64; 4] = [1.0, -1.0, 1.0, -1.0];
/// Name the ground-truth encoder runs under.
pub const TRUTH: &str = "truth";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Equation {
    Eq3,
    Eq5,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::Eq3 => "eq3",
            Equation::Eq5 => "eq5",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Equation::Eq3 => Task::Regression,
            Equation::Eq5 => Task::Classification,
        }
    }

    pub fn metric(self) -> MetricName {
        match self {
            Equation::Eq3 => MetricName::Mse,
            Equation::Eq5 => MetricName::Accuracy,
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Equation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eq3" | "3" => Ok(Equation::Eq3),
            "eq5" | "5" => Ok(Equation::Eq5),
            _ => Err(Error::InvalidArgument(format!("unknown equation `{s}`"))),
        }
    }
}

/// A generated table plus the encoding that produced its target.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub table: DataTable,
    pub truth: FittedEncoder,
}

impl SyntheticData {
    /// Encoder set holding only the ground-truth map.
    pub fn truth_encoders(&self) -> EncoderSet {
        let mut set = EncoderSet::default();
        set.insert(SEASON_COLUMN, self.truth.clone());
        set
    }
}

fn truth_encoder(phi: &[f64; 4]) -> FittedEncoder {
    let levels = fit_levels(&SEASONS).expect("seasons are distinct");
    let codes = phi.iter().map(|&v| vec![v]).collect();
    let prior = phi.iter().sum::<f64>() / 4.0;
    FittedEncoder::custom(TRUTH, levels, codes, vec![prior]).expect("valid truth encoder")
}

fn draw_seasons(n: usize, rng: &mut crate::rng::Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..4)).collect()
}

/// Sign with `sgn(0) = −1`.
pub fn sgn_nonpositive_negative(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn eq3_target(season: usize, noise: f64) -> f64 {
    EQ3_PHI[season] + noise
}

/// Signed eq5 target in {−1, +1}.
pub fn eq5_target(season: usize, x2: f64) -> f64 {
    EQ5_PHI[season] * sgn_nonpositive_negative((x2 * std::f64::consts::PI).sin())
}

pub fn generate_eq3(n: usize, sigma: f64, seed: u64) -> Result<SyntheticData> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one row".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sd must be >= 0, got {sigma}"
        )));
    }
    let mut rng = child_rng(seed, 3);
    let seasons = draw_seasons(n, &mut rng);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let y: Vec<f64> = seasons
        .iter()
        .map(|&s| eq3_target(s, normal.sample(&mut rng)))
        .collect();
    let names: Vec<&str> = seasons.iter().map(|&s| SEASONS[s]).collect();
    let table = DataTable::new(
        vec![
            (SEASON_COLUMN.into(), Column::categorical(&names)),
            ("y".into(), Column::numeric(&y)),
        ],
        "y",
    )?
    .with_target_kind(TargetKind::Numeric)?;
    Ok(SyntheticData {
        table,
        truth: truth_encoder(&EQ3_PHI),
    })
}

pub fn generate_eq5(n: usize, seed: u64) -> Result<SyntheticData> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one row".into()));
    }
    let mut rng = child_rng(seed, 5);
    let seasons = draw_seasons(n, &mut rng);
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
    let y: Vec<f64> = seasons
        .iter()
        .zip(&x2)
        .map(|(&s, &x)| if eq5_target(s, x) > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let names: Vec<&str> = seasons.iter().map(|&s| SEASONS[s]).collect();
    let table = DataTable::new(
        vec![
            (SEASON_COLUMN.into(), Column::categorical(&names)),
            ("x2".into(), Column::numeric(&x2)),
            ("y".into(), Column::numeric(&y)),
        ],
        "y",
    )?
    .with_target_kind(TargetKind::Binary)?;
    Ok(SyntheticData {
        table,
        truth: truth_encoder(&EQ5_PHI),
    })
}

pub fn generate(equation: Equation, n: usize, sigma: f64, seed: u64) -> Result<SyntheticData> {
    match equation {
        Equation::Eq3 => generate_eq3(n, sigma, seed),
        Equation::Eq5 => generate_eq5(n, seed),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub equation: Equation,
    pub aspl_values: Vec<usize>,
    pub seeds_per_aspl: usize,
    pub test_size: usize,
    /// Noise sd for eq3.
    pub noise_sigma: f64,
    /// Root of every seed in the sweep.
    pub seed: u64,
}

impl SynthConfig {
    /// ASPL 5, 10, …, 100 with 30 seeds and a 1000-row test set.
    pub fn new(equation: Equation) -> Self {
        SynthConfig {
            equation,
            aspl_values: (1..=20).map(|k| 5 * k).collect(),
            seeds_per_aspl: 30,
            test_size: 1000,
            noise_sigma: 1.0,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.aspl_values.is_empty() || self.aspl_values.contains(&0) {
            return Err(Error::InvalidArgument(
                "ASPL values must be positive".into(),
            ));
        }
        if self.test_size == 0 || self.seeds_per_aspl == 0 {
            return Err(Error::InvalidArgument(
                "test size and seed count must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Training rows for an ASPL value: four levels times the ASPL.
    pub fn train_size(aspl: usize) -> usize {
        4 * aspl
    }
}

/// One encoder × ASPL × seed result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub equation: Equation,
    pub encoder: String,
    pub model: String,
    pub aspl: usize,
    pub seed: u64,
    pub metric: MetricName,
    pub value: f64,
}

/// Per encoder × ASPL summary over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub encoder: String,
    pub aspl: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// Mean paired shortfall against the ground-truth encoder; positive is
    /// worse for both metrics.
    pub gap_to_best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub aggregate: Vec<SweepAggregate>,
}

impl SweepTable {
    pub fn get(&self, encoder: &str, aspl: usize) -> Option<&SweepAggregate> {
        self.aggregate
            .iter()
            .find(|a| a.encoder == encoder && a.aspl == aspl)
    }

    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "equation", "encoder", "model", "aspl", "seed", "metric", "value",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.equation.name().to_string(),
                r.encoder.clone(),
                r.model.clone(),
                r.aspl.to_string(),
                r.seed.to_string(),
                r.metric.to_string(),
                r.value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }

    pub fn write_aggregate<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "encoder",
            "aspl",
            "mean",
            "sd",
            "ci95_low",
            "ci95_high",
            "gap_to_best",
        ])?;
        for a in &self.aggregate {
            w.write_record([
                a.encoder.clone(),
                a.aspl.to_string(),
                a.mean.to_string(),
                a.sd.to_string(),
                a.ci95_low.to_string(),
                a.ci95_high.to_string(),
                a.gap_to_best.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }
}

fn score(
    pipeline: &Pipeline,
    model: &ModelSpec,
    train: &DataTable,
    test: &DataTable,
    task: Task,
    seed: u64,
) -> Result<f64> {
    let xtr = pipeline.transform(train)?;
    let xte = pipeline.transform(test)?;
    let fitted = model.fit(&xtr, &train.target_values()?, task, seed)?;
    let truth = test.target_values()?;
    let pred = fitted.predict(&xte)?;
    match task {
        Task::Regression => mse(&truth, &pred),
        Task::Classification => accuracy(&truth, &threshold(&pred)),
    }
}

/// Run `encoder` and the ground-truth encoder side by side on fresh training
/// sets for every ASPL and seed, scoring on one shared test set.
pub fn run_aspl_sweep(
    config: &SynthConfig,
    model: &ModelSpec,
    encoder: &EncoderSpec,
) -> Result<SweepTable> {
    config.validate()?;
    encoder.validate()?;
    let eq = config.equation;
    let task = eq.task();
    if !model.kind.supports(task) {
        return Err(Error::InvalidArgument(format!(
            "model `{}` cannot fit the {} task",
            model.kind,
            eq.name()
        )));
    }
    let test = generate(
        eq,
        config.test_size,
        config.noise_sigma,
        derive_seed(config.seed, u64::MAX),
    )?;
    let cells: Vec<(usize, u64)> = config
        .aspl_values
        .iter()
        .flat_map(|&a| (0..config.seeds_per_aspl as u64).map(move |s| (a, s)))
        .collect();
    let results: Vec<(usize, u64, f64, f64)> = cells
        .par_iter()
        .map(|&(aspl, s)| {
            let cell_seed = derive_seed(derive_seed(config.seed, aspl as u64), s);
            let data = generate(
                eq,
                SynthConfig::train_size(aspl),
                config.noise_sigma,
                cell_seed,
            )?;
            let model_seed = derive_seed(cell_seed, 7);
            let enc_pipe = Pipeline::fit(&data.table, encoder)?;
            let enc_score = score(&enc_pipe, model, &data.table, &test.table, task, model_seed)?;
            let truth_pipe = Pipeline::fit_with_encoders(&data.table, data.truth_encoders())?;
            let truth_score = score(
                &truth_pipe,
                model,
                &data.table,
                &test.table,
                task,
                model_seed,
            )?;
            Ok((aspl, s, enc_score, truth_score))
        })
        .collect::<Result<_>>()?;

    let name = encoder.kind.name().to_string();
    let mut rows = Vec::with_capacity(results.len() * 2);
    for who in [name.as_str(), TRUTH] {
        for &(aspl, seed, e, t) in &results {
            rows.push(SweepRow {
                equation: eq,
                encoder: who.to_string(),
                model: model.name().to_string(),
                aspl,
                seed,
                metric: eq.metric(),
                value: if who == TRUTH { t } else { e },
            });
        }
    }
    let mut aggregate = Vec::new();
    for &aspl in &config.aspl_values {
        let cell: Vec<&(usize, u64, f64, f64)> = results.iter().filter(|r| r.0 == aspl).collect();
        let enc: Vec<f64> = cell.iter().map(|r| r.2).collect();
        let truth: Vec<f64> = cell.iter().map(|r| r.3).collect();
        let gap = {
            let (me, _) = mean_sd(&enc);
            let (mt, _) = mean_sd(&truth);
            if eq.metric().higher_is_better() {
                mt - me
            } else {
                me - mt
            }
        };
        aggregate.push(summarize(&name, aspl, &enc, gap));
        aggregate.push(summarize(TRUTH, aspl, &truth, 0.0));
    }
    Ok(SweepTable { rows, aggregate })
}

fn summarize(encoder: &str, aspl: usize, values: &[f64], gap: f64) -> SweepAggregate {
    let (mean, sd) = mean_sd(values);
    let half = 1.96 * sd / (values.len() as f64).sqrt();
    SweepAggregate {
        encoder: encoder.to_string(),
        aspl,
        mean,
        sd,
        ci95_low: mean - half,
        ci95_high: mean + half,
        gap_to_best: gap,
    }
}
