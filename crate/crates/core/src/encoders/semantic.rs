use std::collections::HashSet;
use std::ops::RangeInclusive;

use super::{EncoderKind, FittedEncoder, LevelTable, UnseenPolicy};
use crate::rng::mix64;
use crate::{Error, Result};

/// Set of character `n`-grams of `s`. Strings shorter than `n` have none.
pub fn ngram_set(s: &str, n: usize) -> HashSet<String> {
    let chars: Vec<char> = s.chars().collect();
    if n == 0 || chars.len() < n {
        return HashSet::new();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Number of distinct `n`-grams shared by `a` and `b`.
pub fn ngram_overlap(a: &str, b: &str, n: usize) -> usize {
    let sa = ngram_set(a, n);
    let sb = ngram_set(b, n);
    sa.intersection(&sb).count()
}

/// Per-level n-gram sets, kept so unseen strings can be scored against the
/// fitted levels without refitting.
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    ngram_min: usize,
    ngram_max: usize,
    /// `grams[k][n - ngram_min]` is the n-gram set of level k.
    grams: Vec<Vec<HashSet<String>>>,
}

impl SimilarityIndex {
    fn new(levels: &LevelTable, range: RangeInclusive<usize>) -> Self {
        let grams = levels
            .levels()
            .iter()
            .map(|l| range.clone().map(|n| ngram_set(l, n)).collect())
            .collect();
        SimilarityIndex {
            ngram_min: *range.start(),
            ngram_max: *range.end(),
            grams,
        }
    }

    /// Entry `j` is Σ_n |grams_n(s) ∩ grams_n(level_j)|.
    pub fn row_into(&self, s: &str, out: &mut [f64]) {
        let own: Vec<HashSet<String>> = (self.ngram_min..=self.ngram_max)
            .map(|n| ngram_set(s, n))
            .collect();
        for (slot, level_grams) in out.iter_mut().zip(&self.grams) {
            *slot = own
                .iter()
                .zip(level_grams)
                .map(|(a, b)| a.intersection(b).count())
                .sum::<usize>() as f64;
        }
    }
}

/// Level → raw shared-n-gram counts against every fitted level.
pub fn fit_similarity(
    levels: &LevelTable,
    ngram_range: RangeInclusive<usize>,
) -> Result<FittedEncoder> {
    if *ngram_range.start() == 0 || ngram_range.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "invalid ngram range {ngram_range:?}"
        )));
    }
    let index = SimilarityIndex::new(levels, ngram_range);
    let c = levels.cardinality();
    let codes = levels
        .levels()
        .iter()
        .map(|l| {
            let mut row = vec![0.0; c];
            index.row_into(l, &mut row);
            row
        })
        .collect();
    Ok(FittedEncoder::from_parts(
        EncoderKind::Similarity,
        levels.clone(),
        codes,
        UnseenPolicy::Similarity(index),
    ))
}

/// Seeded MinHash over the character n-grams of a string.
///
/// Component `j` uses the hash `h_j(g) = mix64(hash(g) ^ mix64(seed + j))`
/// and reports `min_g h_j(g) · 2⁻⁶⁴`, truncated to 53 bits so the value is an
/// exact double in `[0, 1)`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    ngram_min: usize,
    ngram_max: usize,
    keys: Vec<u64>,
}

impl MinHasher {
    pub fn new(n_components: usize, ngram_range: RangeInclusive<usize>, seed: u64) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::InvalidArgument(
                "n_components must be at least 1".into(),
            ));
        }
        if *ngram_range.start() == 0 || ngram_range.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "invalid ngram range {ngram_range:?}"
            )));
        }
        let keys = (0..n_components as u64)
            .map(|j| mix64(seed.wrapping_add(j)))
            .collect();
        Ok(MinHasher {
            ngram_min: *ngram_range.start(),
            ngram_max: *ngram_range.end(),
            keys,
        })
    }

    pub fn n_components(&self) -> usize {
        self.keys.len()
    }

    /// Distinct grams of every length in the range; a string shorter than
    /// the smallest length is its own single gram.
    pub fn grams(&self, s: &str) -> HashSet<String> {
        let mut grams = HashSet::new();
        for n in self.ngram_min..=self.ngram_max {
            grams.extend(ngram_set(s, n));
        }
        if grams.is_empty() {
            grams.insert(s.to_owned());
        }
        grams
    }

    /// Raw 64-bit minimum per component.
    pub fn raw_signature(&self, s: &str) -> Vec<u64> {
        let mut mins = vec![u64::MAX; self.keys.len()];
        for g in self.grams(s) {
            let base = hash_bytes(g.as_bytes());
            for (m, &key) in mins.iter_mut().zip(&self.keys) {
                let h = mix64(base ^ key);
                if h < *m {
                    *m = h;
                }
            }
        }
        mins
    }

    pub fn signature_into(&self, s: &str, out: &mut [f64]) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        for (slot, h) in out.iter_mut().zip(self.raw_signature(s)) {
            *slot = (h >> 11) as f64 * SCALE;
        }
    }
}

fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h = mix64(bytes.len() as u64 ^ 0x5851_F42D_4C95_7F2D);
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        h = mix64(h ^ u64::from_le_bytes(word));
    }
    h
}

pub fn fit_minhash(
    levels: &LevelTable,
    n_components: usize,
    ngram_range: RangeInclusive<usize>,
    hash_seed: u64,
) -> Result<FittedEncoder> {
    let hasher = MinHasher::new(n_components, ngram_range, hash_seed)?;
    let codes = levels
        .levels()
        .iter()
        .map(|l| {
            let mut row = vec![0.0; n_components];
            hasher.signature_into(l, &mut row);
            row
        })
        .collect();
    Ok(FittedEncoder::from_parts(
        EncoderKind::MinHash,
        levels.clone(),
        codes,
        UnseenPolicy::MinHash(hasher),
    ))
}
