use super::{EncoderKind, FittedEncoder, LevelTable, UnseenPolicy};
use crate::{Error, Result};

/// Level `k` → the `k`-th standard basis vector of ℝ^c.
pub fn fit_onehot(levels: &LevelTable) -> Result<FittedEncoder> {
    let c = levels.cardinality();
    let codes = (0..c)
        .map(|k| {
            let mut v = vec![0.0; c];
            v[k] = 1.0;
            v
        })
        .collect();
    Ok(FittedEncoder::from_parts(
        EncoderKind::OneHot,
        levels.clone(),
        codes,
        UnseenPolicy::Constant(vec![0.0; c]),
    ))
}

/// Smallest `l` with `base^l ≥ c + 1`, i.e. ⌈log_base(c+1)⌉.
pub fn basen_width(c: usize, base: u32) -> usize {
    let base = base.max(2) as u128;
    let target = c as u128 + 1;
    let mut width = 0;
    let mut reach: u128 = 1;
    while reach < target {
        reach *= base;
        width += 1;
    }
    width.max(1)
}

/// Level `k` (1-indexed) → base-`base` digits of `k`, most significant first.
pub fn fit_basen(levels: &LevelTable, base: u32) -> Result<FittedEncoder> {
    if base < 2 {
        return Err(Error::InvalidArgument(format!(
            "base must be at least 2, got {base}"
        )));
    }
    let c = levels.cardinality();
    let width = basen_width(c, base);
    let codes = (1..=c)
        .map(|k| {
            let mut digits = vec![0.0; width];
            let mut rest = k;
            for slot in digits.iter_mut().rev() {
                *slot = (rest % base as usize) as f64;
                rest /= base as usize;
            }
            digits
        })
        .collect();
    Ok(FittedEncoder::from_parts(
        EncoderKind::BaseN,
        levels.clone(),
        codes,
        UnseenPolicy::Constant(vec![0.0; width]),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContrastScheme {
    BackDiff,
    Helmert,
    Sum,
}

impl ContrastScheme {
    fn kind(self) -> EncoderKind {
        match self {
            ContrastScheme::BackDiff => EncoderKind::BackDiff,
            ContrastScheme::Helmert => EncoderKind::Helmert,
            ContrastScheme::Sum => EncoderKind::Sum,
        }
    }
}

/// The `c × (c−1)` contrast matrix of a scheme, one row per level. A single
/// level gives one empty row.
///
/// * sum: identity rows followed by a row of −1.
/// * helmert: column `j` is −1 on rows `0..=j`, `j+1` on row `j+1`, 0 below.
/// * backdiff: column `j` is −(c−1−j)/c on rows `0..=j` and (j+1)/c below,
///   so adjacent rows differ by exactly 1 in column `j` at the `j → j+1` step.
pub fn contrast_matrix(c: usize, scheme: ContrastScheme) -> Result<Vec<Vec<f64>>> {
    if c == 0 {
        return Err(Error::InvalidArgument(
            "contrast coding needs at least 1 level".into(),
        ));
    }
    let cf = c as f64;
    let rows = (0..c)
        .map(|k| {
            (0..c - 1)
                .map(|j| match scheme {
                    ContrastScheme::Sum => {
                        if k == c - 1 {
                            -1.0
                        } else if k == j {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    ContrastScheme::Helmert => {
                        if k <= j {
                            -1.0
                        } else if k == j + 1 {
                            (j + 1) as f64
                        } else {
                            0.0
                        }
                    }
                    ContrastScheme::BackDiff => {
                        if k <= j {
                            -((c - 1 - j) as f64) / cf
                        } else {
                            (j + 1) as f64 / cf
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows)
}

pub fn fit_contrast(levels: &LevelTable, scheme: ContrastScheme) -> Result<FittedEncoder> {
    let c = levels.cardinality();
    let codes = contrast_matrix(c, scheme)?;
    Ok(FittedEncoder::from_parts(
        scheme.kind(),
        levels.clone(),
        codes,
        UnseenPolicy::Constant(vec![0.0; c - 1]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::fit_levels;

    fn seasons() -> LevelTable {
        fit_levels(&["spring", "summer", "autumn", "winter"]).unwrap()
    }

    #[test]
    fn onehot_is_identity() {
        let enc = fit_onehot(&seasons()).unwrap();
        assert_eq!(enc.encode("spring"), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(enc.encode("summer"), vec![0.0, 1.0, 0.0, 0.0]);
        for k in 0..4 {
            for j in 0..4 {
                assert_eq!(enc.code(k)[j], if j == k { 1.0 } else { 0.0 });
            }
        }
        let single = fit_onehot(&fit_levels(&["x"]).unwrap()).unwrap();
        assert_eq!(single.encode("x"), vec![1.0]);
    }

    #[test]
    fn binary_codes_for_four_levels() {
        let enc = fit_basen(&seasons(), 2).unwrap();
        assert_eq!(enc.output_dim(), 3);
        assert_eq!(enc.code(0), &[0.0, 0.0, 1.0]);
        assert_eq!(enc.code(1), &[0.0, 1.0, 0.0]);
        assert_eq!(enc.code(2), &[0.0, 1.0, 1.0]);
        assert_eq!(enc.code(3), &[1.0, 0.0, 0.0]);
        let single = fit_basen(&fit_levels(&["x"]).unwrap(), 2).unwrap();
        assert_eq!(single.code(0), &[1.0]);
    }

    #[test]
    fn basen_width_matches_log_formula() {
        for c in 1..=20usize {
            let expected = ((c + 1) as f64).log2().ceil() as usize;
            assert_eq!(basen_width(c, 2), expected, "c={c}");
        }
        assert_eq!(basen_width(8, 3), 2);
        assert_eq!(basen_width(9, 3), 3);
    }

    #[test]
    fn ternary_digits() {
        let levels = fit_levels(&["a", "b", "c", "d", "e"]).unwrap();
        let enc = fit_basen(&levels, 3).unwrap();
        assert_eq!(enc.output_dim(), 2);
        assert_eq!(enc.code(4), &[1.0, 2.0]); // 5 = 12₃
    }

    #[test]
    fn contrast_matrices_for_four_levels() {
        let sum = contrast_matrix(4, ContrastScheme::Sum).unwrap();
        assert_eq!(
            sum,
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![-1.0, -1.0, -1.0]
            ]
        );
        let helmert = contrast_matrix(4, ContrastScheme::Helmert).unwrap();
        assert_eq!(
            helmert,
            vec![
                vec![-1.0, -1.0, -1.0],
                vec![1.0, -1.0, -1.0],
                vec![0.0, 2.0, -1.0],
                vec![0.0, 0.0, 3.0]
            ]
        );
        let backdiff = contrast_matrix(4, ContrastScheme::BackDiff).unwrap();
        assert_eq!(
            backdiff,
            vec![
                vec![-0.75, -0.5, -0.25],
                vec![0.25, -0.5, -0.25],
                vec![0.25, 0.5, -0.25],
                vec![0.25, 0.5, 0.75]
            ]
        );
    }

    #[test]
    fn contrast_column_sums() {
        for c in 2..12 {
            for scheme in [
                ContrastScheme::Sum,
                ContrastScheme::Helmert,
                ContrastScheme::BackDiff,
            ] {
                let m = contrast_matrix(c, scheme).unwrap();
                for j in 0..c - 1 {
                    let s: f64 = m.iter().map(|r| r[j]).sum();
                    assert!(s.abs() < 1e-12, "{scheme:?} c={c} col={j}");
                }
            }
            // backdiff: only column k−1 changes between rows k−1 and k, by exactly 1
            let m = contrast_matrix(c, ContrastScheme::BackDiff).unwrap();
            for k in 1..c {
                for (j, (hi, lo)) in m[k].iter().zip(&m[k - 1]).enumerate() {
                    let step = hi - lo;
                    let expected = if j == k - 1 { 1.0 } else { 0.0 };
                    assert!((step - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_level_contrast_is_empty() {
        for scheme in [
            ContrastScheme::Sum,
            ContrastScheme::Helmert,
            ContrastScheme::BackDiff,
        ] {
            let enc = fit_contrast(&fit_levels(&["x"]).unwrap(), scheme).unwrap();
            assert_eq!(enc.output_dim(), 0);
            assert!(enc.encode("x").is_empty());
            assert!(enc.encode("unseen").is_empty());
        }
    }
}
