//! The encoder catalog.
//!
//! Every encoder maps a level of a categorical column to a real vector of a
//! fixed width `l`. Fitting produces a [`FittedEncoder`], an immutable
//! level → vector table plus a policy for levels not seen at fit time.
//!
//! | family   | encoders                                    | width            |
//! |----------|---------------------------------------------|------------------|
//! | grouping | OneHot, BaseN, BackDiff, Helmert, Sum       | c, ⌈log_b(c+1)⌉, c−1 |
//! | ordering | Ordinal, Count                              | 1                |
//! | semantic | Similarity, MinHash                         | c, n_components  |
//! | target   | Mean, SShrink, MEstimate, JamesStein, GLMM  | 1                |

mod glmm;
mod grouping;
mod ordering;
mod semantic;
mod target;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use glmm::{fit_glmm, GlmmFit};
pub use grouping::{
    basen_width, contrast_matrix, fit_basen, fit_contrast, fit_onehot, ContrastScheme,
};
pub use ordering::{fit_count, fit_ordinal};
pub use semantic::{
    fit_minhash, fit_similarity, ngram_overlap, ngram_set, MinHasher, SimilarityIndex,
};
pub use target::{
    compute_group_stats, fit_empirical_bayes, james_stein_factors, mestimate_factor,
    sshrink_factor, EmpiricalBayes, GroupStats,
};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    OneHot,
    BaseN,
    BackDiff,
    Helmert,
    Sum,
    Ordinal,
    Count,
    Similarity,
    MinHash,
    Mean,
    SShrink,
    MEstimate,
    JamesStein,
    Glmm,
}

/// What kind of information an encoder carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderFamily {
    Grouping,
    Ordering,
    Semantic,
    Target,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 14] = [
        EncoderKind::OneHot,
        EncoderKind::BaseN,
        EncoderKind::BackDiff,
        EncoderKind::Helmert,
        EncoderKind::Sum,
        EncoderKind::Ordinal,
        EncoderKind::Count,
        EncoderKind::Similarity,
        EncoderKind::MinHash,
        EncoderKind::Mean,
        EncoderKind::SShrink,
        EncoderKind::MEstimate,
        EncoderKind::JamesStein,
        EncoderKind::Glmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::OneHot => "onehot",
            EncoderKind::BaseN => "basen",
            EncoderKind::BackDiff => "backdiff",
            EncoderKind::Helmert => "helmert",
            EncoderKind::Sum => "sum",
            EncoderKind::Ordinal => "ordinal",
            EncoderKind::Count => "count",
            EncoderKind::Similarity => "similarity",
            EncoderKind::MinHash => "minhash",
            EncoderKind::Mean => "mean",
            EncoderKind::SShrink => "sshrink",
            EncoderKind::MEstimate => "mestimate",
            EncoderKind::JamesStein => "jamesstein",
            EncoderKind::Glmm => "glmm",
        }
    }

    pub fn family(self) -> EncoderFamily {
        use EncoderKind::*;
        match self {
            OneHot | BaseN | BackDiff | Helmert | Sum => EncoderFamily::Grouping,
            Ordinal | Count => EncoderFamily::Ordering,
            Similarity | MinHash => EncoderFamily::Semantic,
            Mean | SShrink | MEstimate | JamesStein | Glmm => EncoderFamily::Target,
        }
    }

    pub fn needs_target(self) -> bool {
        self.family() == EncoderFamily::Target
    }

    /// Output width for a column of cardinality `c`; `None` for `c = 0`.
    pub fn output_dim(self, c: usize, spec: &EncoderSpec) -> Option<usize> {
        use EncoderKind::*;
        if c == 0 {
            return None;
        }
        match self {
            OneHot | Similarity => Some(c),
            BackDiff | Helmert | Sum => Some(c - 1),
            BaseN => Some(basen_width(c, spec.base)),
            MinHash => Some(spec.n_components),
            Ordinal | Count | Mean | SShrink | MEstimate | JamesStein | Glmm => Some(1),
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        let kind = match key.as_str() {
            "onehot" | "oh" => EncoderKind::OneHot,
            "basen" | "binary" => EncoderKind::BaseN,
            "backdiff" | "backwarddifference" => EncoderKind::BackDiff,
            "helmert" => EncoderKind::Helmert,
            "sum" => EncoderKind::Sum,
            "ordinal" => EncoderKind::Ordinal,
            "count" => EncoderKind::Count,
            "similarity" => EncoderKind::Similarity,
            "minhash" => EncoderKind::MinHash,
            "mean" | "target" => EncoderKind::Mean,
            "sshrink" => EncoderKind::SShrink,
            "mestimate" => EncoderKind::MEstimate,
            "jamesstein" => EncoderKind::JamesStein,
            "glmm" => EncoderKind::Glmm,
            _ => return Err(Error::InvalidArgument(format!("unknown encoder `{s}`"))),
        };
        Ok(kind)
    }
}

/// Encoder variant plus hyperparameters.
///
/// Serialises to a small TOML document, e.g. `kind = "sshrink"` followed by
/// any overridden hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    /// SShrink threshold.
    pub s1: f64,
    /// SShrink steepness.
    pub s2: f64,
    /// MEstimate prior weight.
    pub m: f64,
    pub base: u32,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub n_components: usize,
    pub hash_seed: u64,
    pub glmm_max_iter: usize,
    pub glmm_tol: f64,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec {
            kind: EncoderKind::OneHot,
            s1: 20.0,
            s2: 10.0,
            m: 1.0,
            base: 2,
            ngram_min: 2,
            ngram_max: 4,
            n_components: 30,
            hash_seed: 0,
            glmm_max_iter: 2000,
            glmm_tol: 1e-10,
        }
    }
}

impl EncoderSpec {
    pub fn new(kind: EncoderKind) -> Self {
        EncoderSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.s2 > 0.0) {
            return bad(format!("s2 must be positive, got {}", self.s2));
        }
        if !(self.m >= 0.0) {
            return bad(format!("m must be nonnegative, got {}", self.m));
        }
        if self.base < 2 {
            return bad(format!("base must be at least 2, got {}", self.base));
        }
        if self.n_components == 0 {
            return bad("n_components must be at least 1".into());
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return bad(format!(
                "invalid ngram range {}..={}",
                self.ngram_min, self.ngram_max
            ));
        }
        if !(self.glmm_tol > 0.0) || self.glmm_max_iter == 0 {
            return bad("glmm tolerance and iteration limit must be positive".into());
        }
        Ok(())
    }

    pub fn ngram_range(&self) -> std::ops::RangeInclusive<usize> {
        self.ngram_min..=self.ngram_max
    }

    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("encoder spec serialises")
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let spec: EncoderSpec =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_owned()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Distinct levels of a column in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelTable {
    levels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LevelTable {
    pub fn from_levels<S: AsRef<str>>(levels: &[S]) -> Result<Self> {
        let mut table = LevelTable {
            levels: Vec::with_capacity(levels.len()),
            index: HashMap::with_capacity(levels.len()),
        };
        for l in levels {
            let l = l.as_ref();
            if table.index.contains_key(l) {
                return Err(Error::InvalidArgument(format!("duplicate level `{l}`")));
            }
            table.index.insert(l.to_owned(), table.levels.len());
            table.levels.push(l.to_owned());
        }
        if table.levels.is_empty() {
            return Err(Error::InvalidArgument(
                "a level table needs at least one level".into(),
            ));
        }
        Ok(table)
    }

    pub fn cardinality(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn index_of(&self, level: &str) -> Option<usize> {
        self.index.get(level).copied()
    }

    /// Per-row level index for a column; `None` marks an unseen level.
    pub fn indices<S: AsRef<str>>(&self, column: &[S]) -> Vec<Option<usize>> {
        column.iter().map(|v| self.index_of(v.as_ref())).collect()
    }
}

/// Levels of a fully observed column in first-appearance order.
pub fn fit_levels<S: AsRef<str>>(column: &[S]) -> Result<LevelTable> {
    if column.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot fit levels of an empty column".into(),
        ));
    }
    let mut levels: Vec<&str> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in column {
        let v = v.as_ref();
        if seen.insert(v) {
            levels.push(v);
        }
    }
    LevelTable::from_levels(&levels)
}

/// How a fitted encoder treats a level it did not see at fit time.
#[derive(Debug, Clone)]
pub enum UnseenPolicy {
    /// Emit this fixed vector.
    Constant(Vec<f64>),
    /// Compute n-gram similarities to the fitted levels from the string.
    Similarity(SimilarityIndex),
    /// Compute the MinHash signature from the string.
    MinHash(MinHasher),
}

/// An immutable level → vector table of fixed width.
#[derive(Debug, Clone)]
pub struct FittedEncoder {
    name: String,
    kind: Option<EncoderKind>,
    levels: LevelTable,
    codes: Vec<Vec<f64>>,
    dim: usize,
    unseen: UnseenPolicy,
}

impl FittedEncoder {
    pub(crate) fn from_parts(
        kind: EncoderKind,
        levels: LevelTable,
        codes: Vec<Vec<f64>>,
        unseen: UnseenPolicy,
    ) -> Self {
        Self::build(kind.name().to_owned(), Some(kind), levels, codes, unseen)
            .expect("encoder invariants hold by construction")
    }

    /// A hand-specified encoding, e.g. the ground-truth map of a synthetic
    /// dataset. Unseen levels map to `unseen`.
    pub fn custom(
        name: impl Into<String>,
        levels: LevelTable,
        codes: Vec<Vec<f64>>,
        unseen: Vec<f64>,
    ) -> Result<Self> {
        Self::build(
            name.into(),
            None,
            levels,
            codes,
            UnseenPolicy::Constant(unseen),
        )
    }

    fn build(
        name: String,
        kind: Option<EncoderKind>,
        levels: LevelTable,
        codes: Vec<Vec<f64>>,
        unseen: UnseenPolicy,
    ) -> Result<Self> {
        if codes.len() != levels.cardinality() {
            return Err(Error::DimensionMismatch {
                expected: levels.cardinality(),
                got: codes.len(),
            });
        }
        // Width 0 is legal: a contrast code over a single level.
        let dim = codes[0].len();
        if let Some(bad) = codes.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if let UnseenPolicy::Constant(v) = &unseen {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        Ok(FittedEncoder {
            name,
            kind,
            levels,
            codes,
            dim,
            unseen,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> Option<EncoderKind> {
        self.kind
    }

    pub fn output_dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> &LevelTable {
        &self.levels
    }

    /// Code of the `k`-th fitted level.
    pub fn code(&self, k: usize) -> &[f64] {
        &self.codes[k]
    }

    pub fn unseen_policy(&self) -> &UnseenPolicy {
        &self.unseen
    }

    /// Encode a single level, seen or not.
    pub fn encode(&self, level: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.encode_into(level, &mut out);
        out
    }

    pub fn encode_into(&self, level: &str, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        if let Some(k) = self.levels.index_of(level) {
            out.copy_from_slice(&self.codes[k]);
            return;
        }
        match &self.unseen {
            UnseenPolicy::Constant(v) => out.copy_from_slice(v),
            UnseenPolicy::Similarity(index) => index.row_into(level, out),
            UnseenPolicy::MinHash(h) => h.signature_into(level, out),
        }
    }

    /// Encode a column into an `n × l` matrix.
    pub fn transform<S: AsRef<str>>(&self, column: &[S]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(column.len(), self.dim);
        let mut buf = vec![0.0; self.dim];
        for (i, v) in column.iter().enumerate() {
            self.encode_into(v.as_ref(), &mut buf);
            for (j, &x) in buf.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }

    /// Write the level → code table as CSV: `level,component_1,…,component_l`.
    pub fn write_audit_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["level".to_owned()];
        header.extend((1..=self.dim).map(|j| format!("component_{j}")));
        w.write_record(&header)?;
        for (level, code) in self.levels.levels().iter().zip(&self.codes) {
            let mut row = vec![level.clone()];
            row.extend(code.iter().map(|x| format!("{x}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<audit output>", e))?;
        Ok(())
    }
}

/// Fit any encoder of the catalog on a fully observed column.
///
/// `target` is required for the target family and ignored otherwise.
pub fn fit_encoder<S: AsRef<str>>(
    spec: &EncoderSpec,
    column: &[S],
    target: Option<&[f64]>,
) -> Result<FittedEncoder> {
    spec.validate()?;
    let need_target = || {
        target.ok_or_else(|| {
            Error::InvalidArgument(format!("encoder `{}` needs a target", spec.kind))
        })
    };
    match spec.kind {
        EncoderKind::OneHot => fit_onehot(&fit_levels(column)?),
        EncoderKind::BaseN => fit_basen(&fit_levels(column)?, spec.base),
        EncoderKind::BackDiff => fit_contrast(&fit_levels(column)?, ContrastScheme::BackDiff),
        EncoderKind::Helmert => fit_contrast(&fit_levels(column)?, ContrastScheme::Helmert),
        EncoderKind::Sum => fit_contrast(&fit_levels(column)?, ContrastScheme::Sum),
        EncoderKind::Ordinal => fit_ordinal(&fit_levels(column)?),
        EncoderKind::Count => fit_count(column),
        EncoderKind::Similarity => fit_similarity(&fit_levels(column)?, spec.ngram_range()),
        EncoderKind::MinHash => fit_minhash(
            &fit_levels(column)?,
            spec.n_components,
            spec.ngram_range(),
            spec.hash_seed,
        ),
        EncoderKind::Mean => {
            let stats = compute_group_stats(column, need_target()?)?;
            Ok(fit_empirical_bayes(&stats, EmpiricalBayes::Mean, spec))
        }
        EncoderKind::SShrink => {
            let stats = compute_group_stats(column, need_target()?)?;
            Ok(fit_empirical_bayes(&stats, EmpiricalBayes::SShrink, spec))
        }
        EncoderKind::MEstimate => {
            let stats = compute_group_stats(column, need_target()?)?;
            Ok(fit_empirical_bayes(&stats, EmpiricalBayes::MEstimate, spec))
        }
        EncoderKind::JamesStein => {
            let stats = compute_group_stats(column, need_target()?)?;
            Ok(fit_empirical_bayes(
                &stats,
                EmpiricalBayes::JamesStein,
                spec,
            ))
        }
        EncoderKind::Glmm => {
            let (_, enc) = fit_glmm(column, need_target()?, spec.glmm_max_iter, spec.glmm_tol)?;
            Ok(enc)
        }
    }
}
