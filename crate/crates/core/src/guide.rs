//! Encoder selection rules keyed on model family, minASPL and whether
//! encoding time matters.

use std::fmt;
use std::str::FromStr;

use crate::bench::SUFFICIENCY_CUTOFF;
use crate::encoders::EncoderKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    /// Models whose first step is an affine map of the inputs (linear and
    /// logistic regression, MLPs, linear SVMs).
    Ati,
    Tree,
    Other,
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ati" | "affine" | "linear" => Ok(ModelFamily::Ati),
            "tree" | "trees" => Ok(ModelFamily::Tree),
            "other" => Ok(ModelFamily::Other),
            _ => Err(Error::InvalidArgument(format!(
                "unknown model family `{s}`"
            ))),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Ati => "ati",
            ModelFamily::Tree => "tree",
            ModelFamily::Other => "other",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceQuery {
    pub model_family: ModelFamily,
    pub min_aspl: f64,
    pub time_sensitive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    /// Encoders to try, most preferred first. Empty means no guidance.
    pub encoders: Vec<EncoderKind>,
    /// Short identifier of the rule that fired.
    pub rule: &'static str,
    pub rationale: Vec<String>,
}

impl Recommendation {
    pub fn is_guidance(&self) -> bool {
        !self.encoders.is_empty()
    }

    pub fn first(&self) -> Option<EncoderKind> {
        self.encoders.first().copied()
    }
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.encoders.is_empty() {
            writeln!(f, "no guidance")?;
        } else {
            let names: Vec<&str> = self.encoders.iter().map(|e| e.name()).collect();
            writeln!(f, "recommended: {}", names.join(", "))?;
        }
        writeln!(f, "rule: {}", self.rule)?;
        for r in &self.rationale {
            writeln!(f, "  - {r}")?;
        }
        Ok(())
    }
}

/// Apply the selection rules. Data is sufficient when `min_aspl >= 100`.
pub fn recommend(query: &GuidanceQuery) -> Result<Recommendation> {
    use EncoderKind::*;
    if !(query.min_aspl > 0.0) || !query.min_aspl.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "minASPL must be a positive number, got {}",
            query.min_aspl
        )));
    }
    let sufficient = query.min_aspl >= SUFFICIENCY_CUTOFF;
    let data_note = format!(
        "minASPL {} {} {SUFFICIENCY_CUTOFF}: data is {}",
        query.min_aspl,
        if sufficient { ">=" } else { "<" },
        if sufficient {
            "sufficient"
        } else {
            "insufficient"
        }
    );
    let (encoders, rule, why): (Vec<EncoderKind>, &str, &str) =
        match (query.model_family, sufficient, query.time_sensitive) {
            (ModelFamily::Ati, true, false) => (
                vec![OneHot],
                "ati-sufficient",
                "with enough samples per level one-hot loses nothing for affine-input models",
            ),
            (ModelFamily::Ati, true, true) => (
                vec![MEstimate, OneHot],
                "ati-sufficient-fast",
                "MEstimate keeps the width at one column and stays close to one-hot",
            ),
            (ModelFamily::Ati, false, false) => (
                vec![Glmm],
                "ati-insufficient",
                "GLMM shrinks sparse levels and is the strongest start for affine-input models",
            ),
            (ModelFamily::Ati, false, true) => (
                vec![MEstimate],
                "ati-insufficient-fast",
                "MEstimate balances accuracy and encoding cost when GLMM is too slow",
            ),
            (ModelFamily::Tree, true, false) => (
                vec![Glmm, JamesStein, Mean, SShrink, MEstimate],
                "tree-sufficient",
                "mean-type target encoders preserve the optimal root split when levels are well sampled",
            ),
            (ModelFamily::Tree, true, true) => (
                vec![JamesStein, Mean, SShrink, MEstimate],
                "tree-sufficient-fast",
                "target encoders other than the costly GLMM fit are fast and near-optimal",
            ),
            (ModelFamily::Tree, false, false) => (
                vec![MinHash],
                "tree-insufficient",
                "MinHash is the best initial choice for trees when levels are sparse",
            ),
            (ModelFamily::Tree, false, true) => (
                vec![Ordinal],
                "tree-insufficient-fast",
                "Ordinal is cheap and competitive when samples per level are few",
            ),
            (ModelFamily::Other, _, _) => (
                Vec::new(),
                "other",
                "no rule covers this model family; benchmark the catalog instead",
            ),
        };
    Ok(Recommendation {
        encoders,
        rule,
        rationale: vec![data_note, why.to_string()],
    })
}
