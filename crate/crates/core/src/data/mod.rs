//! Tables, CSV ingestion and train/test splitting.
//!
//! A [`DataTable`] is column-major. Missing cells are `None`, never a
//! reserved string or NaN, so a literal level such as `"NA"` that survived
//! cleaning cannot be confused with a missing marker.

mod csv_io;
mod preprocess;

use rand::seq::SliceRandom;

pub use csv_io::{load_csv, load_raw_columns, Schema};
pub use preprocess::{
    apply_pipeline, encode_table, fit_preprocessor, EncoderSet, FillValue, FittedPreprocessor,
    Pipeline, Standardization,
};

use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
        }
    }
}

impl std::str::FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" | "num" | "numerical" => Ok(ColumnKind::Numeric),
            "categorical" | "cat" | "category" => Ok(ColumnKind::Categorical),
            other => Err(Error::Schema(format!("unknown column kind `{other}`"))),
        }
    }
}

/// Kind of the designated target column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    /// Real-valued regression target.
    Numeric,
    /// Binary classification target with values in {0, 1}.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Numeric(_) => ColumnKind::Numeric,
            Column::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn missing_count(&self) -> usize {
        match self {
            Column::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            Column::Categorical(v) => v.iter().filter(|c| c.is_none()).count(),
        }
    }

    /// Build a categorical column with no missing cells.
    pub fn categorical<S: AsRef<str>>(values: &[S]) -> Self {
        Column::Categorical(values.iter().map(|s| Some(s.as_ref().to_owned())).collect())
    }

    /// Build a numeric column with no missing cells.
    pub fn numeric(values: &[f64]) -> Self {
        Column::Numeric(values.iter().map(|&v| Some(v)).collect())
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(v) => {
                Column::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

/// Column-major table with a designated numeric target column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    names: Vec<String>,
    columns: Vec<Column>,
    target: usize,
    target_kind: TargetKind,
    row_count: usize,
}

impl DataTable {
    /// Assemble a table. The target must name a numeric column; it is
    /// flagged [`TargetKind::Binary`] when every observed value is 0 or 1.
    pub fn new(columns: Vec<(String, Column)>, target: &str) -> Result<Self> {
        let row_count = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        for (name, col) in &columns {
            if col.len() != row_count {
                return Err(Error::Schema(format!(
                    "column `{name}` has {} rows, expected {row_count}",
                    col.len()
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (name, _) in &columns {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
        }
        let target_idx = columns
            .iter()
            .position(|(n, _)| n == target)
            .ok_or_else(|| Error::MissingColumn(target.to_owned()))?;
        let target_kind = match &columns[target_idx].1 {
            Column::Numeric(v) => {
                let observed: Vec<f64> = v.iter().flatten().copied().collect();
                if !observed.is_empty() && observed.iter().all(|&y| y == 0.0 || y == 1.0) {
                    TargetKind::Binary
                } else {
                    TargetKind::Numeric
                }
            }
            Column::Categorical(_) => {
                return Err(Error::Schema(format!(
                    "target `{target}` must be numeric (binary targets as 0/1)"
                )))
            }
        };
        let (names, columns) = columns.into_iter().unzip();
        Ok(DataTable {
            names,
            columns,
            target: target_idx,
            target_kind,
            row_count,
        })
    }

    /// Override target kind detection, e.g. to treat a 0/1 column as a
    /// regression target.
    pub fn with_target_kind(mut self, kind: TargetKind) -> Result<Self> {
        if kind == TargetKind::Binary {
            if let Column::Numeric(v) = &self.columns[self.target] {
                if v.iter().flatten().any(|&y| y != 0.0 && y != 1.0) {
                    return Err(Error::Schema(
                        "binary target must only contain 0 and 1".to_owned(),
                    ));
                }
            }
        }
        self.target_kind = kind;
        Ok(self)
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn target_name(&self) -> &str {
        &self.names[self.target]
    }

    pub fn target_kind(&self) -> TargetKind {
        self.target_kind
    }

    /// Ordered `(name, kind)` pairs for every column, target included.
    pub fn schema(&self) -> Vec<(&str, ColumnKind)> {
        self.names
            .iter()
            .zip(&self.columns)
            .map(|(n, c)| (n.as_str(), c.kind()))
            .collect()
    }

    /// Feature columns (all but the target) in schema order.
    pub fn features(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.names
            .iter()
            .zip(&self.columns)
            .enumerate()
            .filter(move |(i, _)| *i != self.target)
            .map(|(_, (n, c))| (n.as_str(), c))
    }

    pub fn categorical_features(&self) -> impl Iterator<Item = (&str, &[Option<String>])> {
        self.features().filter_map(|(n, c)| match c {
            Column::Categorical(v) => Some((n, v.as_slice())),
            Column::Numeric(_) => None,
        })
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    }

    pub(crate) fn columns_mut(&mut self) -> impl Iterator<Item = (&str, &mut Column)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.columns.iter_mut())
    }

    pub(crate) fn target_index(&self) -> usize {
        self.target
    }

    /// Target values; fails if any target cell is missing.
    pub fn target_values(&self) -> Result<Vec<f64>> {
        match &self.columns[self.target] {
            Column::Numeric(v) => v
                .iter()
                .map(|c| {
                    c.ok_or_else(|| {
                        Error::Schema(format!(
                            "target `{}` has missing values",
                            self.target_name()
                        ))
                    })
                })
                .collect(),
            Column::Categorical(_) => unreachable!("target is numeric by construction"),
        }
    }

    /// Copy of the table restricted to `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        DataTable {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            target: self.target,
            target_kind: self.target_kind,
            row_count: rows.len(),
        }
    }

    /// Drop rows whose target is missing.
    pub fn drop_missing_target(&self) -> DataTable {
        let rows: Vec<usize> = match &self.columns[self.target] {
            Column::Numeric(v) => (0..self.row_count).filter(|&r| v[r].is_some()).collect(),
            Column::Categorical(_) => unreachable!("target is numeric by construction"),
        };
        if rows.len() == self.row_count {
            return self.clone();
        }
        self.select_rows(&rows)
    }
}

/// A train/test partition of a source table.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: DataTable,
    pub test: DataTable,
    /// Source row indices that went to `train`, in train order.
    pub train_rows: Vec<usize>,
    /// Source row indices that went to `test`, in test order.
    pub test_rows: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

/// Seeded shuffle followed by a prefix cut of `round(ratio * n)` rows.
///
/// The train size is clamped to `1..=n-1` so both sides are nonempty.
pub fn split_train_test(table: &DataTable, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = table.row_count();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split a table with {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let test_rows = order.split_off(n_train);
    let train_rows = order;
    Ok(SplitPair {
        train: table.select_rows(&train_rows),
        test: table.select_rows(&test_rows),
        train_rows,
        test_rows,
        ratio,
        seed,
    })
}
