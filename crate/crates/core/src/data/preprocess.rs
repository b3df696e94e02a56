//! Impute → encode → standardize, with every parameter estimated on the
//! training table only.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use super::{Column, ColumnKind, DataTable};
use crate::encoders::{fit_encoder, EncoderSpec, FittedEncoder};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FillValue {
    Numeric(f64),
    Level(String),
}

/// Per-column `(mean, sd)` of the encoded training matrix. Columns with no
/// spread keep `sd = 1`, so they standardize to all zeros on the training data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone)]
pub struct FittedPreprocessor {
    features: Vec<(String, ColumnKind)>,
    fills: Vec<FillValue>,
    standardize: Option<Vec<Standardization>>,
}

/// Estimate fill values from the training table: numeric columns take the
/// mean of observed cells, categorical columns their most frequent level
/// (ties go to the level seen first).
///
/// Standardization is estimated later, after encoding, with
/// [`FittedPreprocessor::fit_standardization`].
pub fn fit_preprocessor(train: &DataTable) -> Result<FittedPreprocessor> {
    if train.row_count() == 0 {
        return Err(Error::InvalidArgument(
            "cannot fit preprocessing on an empty table".into(),
        ));
    }
    let mut features = Vec::new();
    let mut fills = Vec::new();
    for (name, col) in train.features() {
        let fill = match col {
            Column::Numeric(v) => {
                let observed: Vec<f64> = v.iter().flatten().copied().collect();
                if observed.is_empty() {
                    return Err(Error::AllMissing(name.to_owned()));
                }
                FillValue::Numeric(observed.iter().sum::<f64>() / observed.len() as f64)
            }
            Column::Categorical(v) => {
                let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
                for (pos, level) in v.iter().flatten().enumerate() {
                    counts.entry(level.as_str()).or_insert((0, pos)).0 += 1;
                }
                let (level, _) = counts
                    .into_iter()
                    .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
                    .ok_or_else(|| Error::AllMissing(name.to_owned()))?;
                FillValue::Level(level.to_owned())
            }
        };
        features.push((name.to_owned(), col.kind()));
        fills.push(fill);
    }
    Ok(FittedPreprocessor {
        features,
        fills,
        standardize: None,
    })
}

impl FittedPreprocessor {
    pub fn fill_values(&self) -> impl Iterator<Item = (&str, &FillValue)> {
        self.features
            .iter()
            .map(|(n, _)| n.as_str())
            .zip(&self.fills)
    }

    pub fn standardization(&self) -> Option<&[Standardization]> {
        self.standardize.as_deref()
    }

    fn check_schema(&self, table: &DataTable) -> Result<()> {
        let got: Vec<(&str, ColumnKind)> = table.features().map(|(n, c)| (n, c.kind())).collect();
        let expected: Vec<(&str, ColumnKind)> = self
            .features
            .iter()
            .map(|(n, k)| (n.as_str(), *k))
            .collect();
        if got != expected {
            return Err(Error::Schema(format!(
                "table features {got:?} do not match fitted features {expected:?}"
            )));
        }
        Ok(())
    }

    /// Replace missing feature cells with the fitted fill values.
    pub fn impute(&self, table: &DataTable) -> Result<DataTable> {
        self.check_schema(table)?;
        let mut out = table.clone();
        let target = out.target_index();
        let mut fills = self.fills.iter();
        for (i, (_, col)) in out.columns_mut().enumerate() {
            if i == target {
                continue;
            }
            match (col, fills.next().expect("schema checked")) {
                (Column::Numeric(v), FillValue::Numeric(f)) => {
                    v.iter_mut()
                        .filter(|c| c.is_none())
                        .for_each(|c| *c = Some(*f));
                }
                (Column::Categorical(v), FillValue::Level(f)) => {
                    v.iter_mut()
                        .filter(|c| c.is_none())
                        .for_each(|c| *c = Some(f.clone()));
                }
                _ => unreachable!("fill kind follows column kind"),
            }
        }
        Ok(out)
    }

    /// Estimate per-column standardization on the encoded training table.
    pub fn fit_standardization(&mut self, encoders: &EncoderSet, train: &DataTable) -> Result<()> {
        let x = encode_table(&self.impute(train)?, encoders)?;
        let n = x.nrows() as f64;
        let params = x
            .column_iter()
            .map(|col| {
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                let sd = if sd <= 1e-12 * mean.abs().max(1.0) {
                    1.0
                } else {
                    sd
                };
                Standardization { mean, sd }
            })
            .collect();
        self.standardize = Some(params);
        Ok(())
    }
}

/// One fitted encoder per categorical feature column.
#[derive(Debug, Clone, Default)]
pub struct EncoderSet {
    encoders: BTreeMap<String, FittedEncoder>,
}

impl EncoderSet {
    /// Fit `spec` on every categorical feature of an imputed table.
    pub fn fit(train: &DataTable, spec: &EncoderSpec) -> Result<Self> {
        let target = if spec.kind.needs_target() {
            Some(train.target_values()?)
        } else {
            None
        };
        let mut encoders = BTreeMap::new();
        for (name, values) in train.categorical_features() {
            let values = observed(name, values)?;
            let enc = fit_encoder(spec, &values, target.as_deref())
                .map_err(|e| Error::InvalidArgument(format!("column `{name}`: {e}")))?;
            encoders.insert(name.to_owned(), enc);
        }
        Ok(EncoderSet { encoders })
    }

    pub fn insert(&mut self, column: impl Into<String>, encoder: FittedEncoder) {
        self.encoders.insert(column.into(), encoder);
    }

    pub fn get(&self, column: &str) -> Option<&FittedEncoder> {
        self.encoders.get(column)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FittedEncoder)> {
        self.encoders.iter().map(|(k, v)| (k.as_str(), v))
    }
}

fn observed<'a>(name: &str, values: &'a [Option<String>]) -> Result<Vec<&'a str>> {
    values
        .iter()
        .map(|v| {
            v.as_deref().ok_or_else(|| {
                Error::Schema(format!(
                    "column `{name}` still has missing cells; impute first"
                ))
            })
        })
        .collect()
}

/// Encode an imputed table, features in schema order: categorical columns
/// expand to their encoder's width, numeric columns pass through.
pub fn encode_table(table: &DataTable, encoders: &EncoderSet) -> Result<DMatrix<f64>> {
    let mut width = 0;
    for (name, col) in table.features() {
        width += match col {
            Column::Numeric(_) => 1,
            Column::Categorical(_) => encoders
                .get(name)
                .ok_or_else(|| Error::Schema(format!("no fitted encoder for column `{name}`")))?
                .output_dim(),
        };
    }
    let n = table.row_count();
    let mut x = DMatrix::zeros(n, width);
    let mut offset = 0;
    for (name, col) in table.features() {
        match col {
            Column::Numeric(v) => {
                for (i, cell) in v.iter().enumerate() {
                    x[(i, offset)] = cell.ok_or_else(|| {
                        Error::Schema(format!("column `{name}` still has missing cells"))
                    })?;
                }
                offset += 1;
            }
            Column::Categorical(v) => {
                let enc = encoders.get(name).expect("checked above");
                let l = enc.output_dim();
                let mut buf = vec![0.0; l];
                for (i, level) in observed(name, v)?.into_iter().enumerate() {
                    enc.encode_into(level, &mut buf);
                    for (j, &b) in buf.iter().enumerate() {
                        x[(i, offset + j)] = b;
                    }
                }
                offset += l;
            }
        }
    }
    Ok(x)
}

/// Impute, encode and standardize a table with train-fitted parameters.
pub fn apply_pipeline(
    pre: &FittedPreprocessor,
    encoders: &EncoderSet,
    table: &DataTable,
) -> Result<DMatrix<f64>> {
    let params = pre
        .standardize
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("standardization has not been fitted".into()))?;
    let mut x = encode_table(&pre.impute(table)?, encoders)?;
    if x.ncols() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: x.ncols(),
        });
    }
    for (mut col, p) in x.column_iter_mut().zip(params) {
        col.iter_mut().for_each(|v| *v = (*v - p.mean) / p.sd);
    }
    Ok(x)
}

/// A fully fitted preprocessing pipeline.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub preprocessor: FittedPreprocessor,
    pub encoders: EncoderSet,
}

impl Pipeline {
    pub fn fit(train: &DataTable, spec: &EncoderSpec) -> Result<Self> {
        let mut pre = fit_preprocessor(train)?;
        let encoders = EncoderSet::fit(&pre.impute(train)?, spec)?;
        pre.fit_standardization(&encoders, train)?;
        Ok(Pipeline {
            preprocessor: pre,
            encoders,
        })
    }

    /// Fit with caller-supplied encoders, e.g. a known ground-truth map.
    pub fn fit_with_encoders(train: &DataTable, encoders: EncoderSet) -> Result<Self> {
        let mut pre = fit_preprocessor(train)?;
        pre.fit_standardization(&encoders, train)?;
        Ok(Pipeline {
            preprocessor: pre,
            encoders,
        })
    }

    pub fn transform(&self, table: &DataTable) -> Result<DMatrix<f64>> {
        apply_pipeline(&self.preprocessor, &self.encoders, table)
    }

    /// Width of the transformed matrix.
    pub fn width(&self) -> usize {
        self.preprocessor.standardize.as_ref().map_or(0, Vec::len)
    }
}
