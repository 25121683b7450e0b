//! Symbolic Aggregate approXimation: sliding-window PAA, Gaussian-breakpoint
//! symbolisation and numerosity-reduced bag-of-words features.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{z_normalize_values, LabeledDataset, TimeSeries};
use crate::error::CoreError;
use crate::features::FeatureMatrix;

/// Bags are capped at this dimension; longer words are hashed down (see
/// [`word_to_bag_index`]).
pub const BAG_CAP: usize = 4096;

const FLAT_WINDOW_SIGMA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SaxConfig {
    /// Symbols per word.
    pub word_length: usize,
    /// PAA segment length in samples; window length is `word_length * frame`.
    pub frame: usize,
    /// Alphabet size.
    pub alphabet: usize,
}

impl SaxConfig {
    pub fn new(word_length: usize, frame: usize) -> Self {
        Self {
            word_length,
            frame,
            alphabet: 4,
        }
    }

    pub fn window_len(&self) -> usize {
        self.word_length * self.frame
    }

    pub fn bag_dim(&self) -> usize {
        bag_dim(self.alphabet, self.word_length)
    }
}

/// `min(a^w, 4096)`.
pub fn bag_dim(alphabet: usize, word_length: usize) -> usize {
    let mut dim: usize = 1;
    for _ in 0..word_length {
        dim = dim.saturating_mul(alphabet);
        if dim >= BAG_CAP {
            return BAG_CAP;
        }
    }
    dim
}

/// Numerosity-reduced word counts over a series' sliding windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaxBag {
    pub counts: Vec<u32>,
}

/// Piecewise aggregate approximation with fractional segment boundaries:
/// segment `j` covers the real span `[j*n/s, (j+1)*n/s)` and boundary samples
/// contribute proportionally to their overlap.
pub fn paa(values: &[f64], num_segments: usize) -> Result<Vec<f64>, CoreError> {
    if num_segments == 0 {
        return Err(CoreError::Param("paa: num_segments must be positive".into()));
    }
    let n = values.len();
    if num_segments > n {
        return Err(CoreError::Param(format!(
            "paa: num_segments {num_segments} exceeds series length {n}"
        )));
    }
    let span = n as f64 / num_segments as f64;
    let mut out = Vec::with_capacity(num_segments);
    for j in 0..num_segments {
        let lo = j as f64 * span;
        let hi = (j + 1) as f64 * span;
        let mut acc = 0.0;
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(n);
        for (t, &v) in values.iter().enumerate().take(last).skip(first) {
            let overlap = (hi.min((t + 1) as f64) - lo.max(t as f64)).max(0.0);
            acc += overlap * v;
        }
        out.push(acc / span);
    }
    Ok(out)
}

/// Standard-normal quantile breakpoints at `i/a`, `i = 1..a-1`.
pub fn gaussian_breakpoints(alphabet: usize) -> Vec<f64> {
    assert!(alphabet >= 2);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (1..alphabet)
        .map(|i| normal.inverse_cdf(i as f64 / alphabet as f64))
        .collect()
}

/// Symbol of a value under increasing breakpoints: the count of breakpoints
/// strictly below the value (monotone nondecreasing in the value).
pub fn symbolize(value: f64, breakpoints: &[f64]) -> usize {
    breakpoints.iter().take_while(|&&b| b < value).count()
}

/// Map a symbol word to its bag index. Direct positional index when
/// `a^w <= 4096`; otherwise the positional index is folded into 4096 bins by
/// a fixed multiplicative (Fibonacci) hash, keeping the head input dimension
/// comparable across configs.
pub fn word_to_bag_index(word: &[usize], alphabet: usize) -> usize {
    let mut index: u64 = 0;
    for &s in word {
        index = index * alphabet as u64 + s as u64;
    }
    if bag_dim(alphabet, word.len()) < BAG_CAP {
        index as usize
    } else if (alphabet as u64).pow(word.len() as u32) == BAG_CAP as u64 {
        index as usize
    } else {
        (index.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 52) as usize
    }
}

/// Slide a window of `w * frame` samples with stride 1, z-normalise each
/// window, PAA it into `w` segments, symbolise via Gaussian breakpoints and
/// count the resulting words with numerosity reduction (consecutive identical
/// words counted once). Flat windows emit the all-middle-symbol word.
pub fn sax_transform(series: &TimeSeries, cfg: &SaxConfig) -> Result<SaxBag, CoreError> {
    let window = cfg.window_len();
    let n = series.len();
    if window > n {
        return Err(CoreError::Param(format!(
            "sax: window {window} exceeds series length {n}"
        )));
    }
    let breakpoints = gaussian_breakpoints(cfg.alphabet);
    let mut counts = vec![0u32; cfg.bag_dim()];
    let mut prev_word: Option<Vec<usize>> = None;
    for start in 0..=(n - window) {
        let raw = &series.values[start..start + window];
        let word = window_word(raw, cfg, &breakpoints)?;
        if prev_word.as_deref() != Some(word.as_slice()) {
            counts[word_to_bag_index(&word, cfg.alphabet)] += 1;
            prev_word = Some(word);
        }
    }
    Ok(SaxBag { counts })
}

fn window_word(
    raw: &[f64],
    cfg: &SaxConfig,
    breakpoints: &[f64],
) -> Result<Vec<usize>, CoreError> {
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let sigma = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sigma < FLAT_WINDOW_SIGMA {
        return Ok(vec![cfg.alphabet / 2; cfg.word_length]);
    }
    let normed = z_normalize_values(raw);
    let segments = paa(&normed, cfg.word_length)?;
    Ok(segments
        .iter()
        .map(|&v| symbolize(v, breakpoints))
        .collect())
}

/// Batch [`sax_transform`] over a dataset, with per-row L2 normalisation.
pub fn sax_feature_matrix(
    dataset: &LabeledDataset,
    cfg: &SaxConfig,
) -> Result<FeatureMatrix, CoreError> {
    let mut rows = Vec::with_capacity(dataset.len());
    for ts in &dataset.series {
        let bag = sax_transform(ts, cfg).map_err(|e| match e {
            CoreError::Param(msg) => CoreError::Param(format!("{}: {msg}", dataset.name)),
            other => other,
        })?;
        rows.push(bag.counts.iter().map(|&c| c as f64).collect());
    }
    let mut matrix = FeatureMatrix::from_rows(
        rows,
        format!(
            "sax(w={},frame={},a={})",
            cfg.word_length, cfg.frame, cfg.alphabet
        ),
    );
    matrix.l2_normalize_rows();
    Ok(matrix)
}
