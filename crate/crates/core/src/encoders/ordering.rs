use super::{fit_levels, EncoderKind, FittedEncoder, LevelTable, UnseenPolicy};
use crate::Result;

/// The `k`-th level in order of appearance → `k` (1-based).
pub fn fit_ordinal(levels: &LevelTable) -> Result<FittedEncoder> {
    let codes = (1..=levels.cardinality()).map(|k| vec![k as f64]).collect();
    Ok(FittedEncoder::from_parts(
        EncoderKind::Ordinal,
        levels.clone(),
        codes,
        UnseenPolicy::Constant(vec![0.0]),
    ))
}

/// Level → number of training rows carrying it.
pub fn fit_count<S: AsRef<str>>(column: &[S]) -> Result<FittedEncoder> {
    let levels = fit_levels(column)?;
    let mut counts = vec![0.0; levels.cardinality()];
    for v in column {
        let k = levels
            .index_of(v.as_ref())
            .expect("level table covers the column");
        counts[k] += 1.0;
    }
    Ok(FittedEncoder::from_parts(
        EncoderKind::Count,
        levels,
        counts.into_iter().map(|m| vec![m]).collect(),
        UnseenPolicy::Constant(vec![0.0]),
    ))
}
