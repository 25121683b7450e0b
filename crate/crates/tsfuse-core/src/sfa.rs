//! Symbolic Fourier Approximation: windowed truncated DFT, Multiple
//! Coefficient Binning and numerosity-reduced bag-of-words features.

use crate::data::{z_normalize_values, LabeledDataset};
use crate::error::CoreError;
use crate::features::FeatureMatrix;
use crate::sax::{bag_dim, symbolize, word_to_bag_index};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SfaConfig {
    /// Number of real-valued coefficient components kept per window.
    pub word_length: usize,
    /// Sliding window length in samples.
    pub window: usize,
    /// Alphabet size.
    pub alphabet: usize,
}

impl SfaConfig {
    pub fn new(word_length: usize, window: usize) -> Self {
        Self {
            word_length,
            window,
            alphabet: 4,
        }
    }

    pub fn bag_dim(&self) -> usize {
        bag_dim(self.alphabet, self.word_length)
    }
}

/// Per-coefficient equi-depth breakpoints fitted on training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct McbBins {
    /// `word_length` rows of `alphabet - 1` breakpoints each.
    pub breakpoints: Vec<Vec<f64>>,
    pub alphabet: usize,
}

/// First `w` entries of the interleaved `[Re(c1), Im(c1), Re(c2), Im(c2), ...]`
/// DFT coefficient sequence, forward convention `e^{-2πi kt/n}`. `c0` is
/// skipped: windows are z-normalised so it carries no information.
pub fn truncated_dft(window_values: &[f64], w: usize) -> Vec<f64> {
    let n = window_values.len();
    assert!(w <= n, "word length exceeds window length");
    let num_coeffs = w.div_ceil(2);
    let mut out = Vec::with_capacity(w);
    for k in 1..=num_coeffs {
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, &v) in window_values.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            re += v * angle.cos();
            im += v * angle.sin();
        }
        out.push(re);
        if out.len() < w {
            out.push(im);
        }
    }
    out
}

/// Full complex DFT magnitudes squared, used internally for sanity checks.
#[cfg(test)]
fn full_dft_power(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in values.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * angle.cos();
                im += v * angle.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Fit per-coefficient equi-depth quantile breakpoints (at `i/a`, linear
/// interpolation between order statistics) over training-window coefficients.
/// A degenerate all-equal column collapses its breakpoints to that value, so
/// every value symbolises to the lowest symbol.
pub fn fit_mcb(training_coefficients: &[Vec<f64>], alphabet: usize) -> Result<McbBins, CoreError> {
    let rows = training_coefficients.len();
    if rows < alphabet {
        return Err(CoreError::Param(format!(
            "fit_mcb: {rows} training rows, need at least {alphabet}"
        )));
    }
    let w = training_coefficients[0].len();
    let mut breakpoints = Vec::with_capacity(w);
    for col in 0..w {
        let mut values: Vec<f64> = training_coefficients.iter().map(|r| r[col]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let bps: Vec<f64> = (1..alphabet)
            .map(|i| interpolated_quantile(&values, i as f64 / alphabet as f64))
            .collect();
        breakpoints.push(bps);
    }
    Ok(McbBins {
        breakpoints,
        alphabet,
    })
}

/// Linear-interpolated quantile of sorted values at fraction `q`.
fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// All z-normalised sliding windows of a series transformed by the truncated
/// DFT; the rows MCB is fitted on (training folds) and symbolised from.
pub fn window_coefficients(values: &[f64], cfg: &SfaConfig) -> Result<Vec<Vec<f64>>, CoreError> {
    let n = values.len();
    if cfg.window > n {
        return Err(CoreError::Param(format!(
            "sfa: window {} exceeds series length {n}",
            cfg.window
        )));
    }
    Ok((0..=(n - cfg.window))
        .map(|start| {
            let normed = z_normalize_values(&values[start..start + cfg.window]);
            truncated_dft(&normed, cfg.word_length)
        })
        .collect())
}

/// Transform one series into a numerosity-reduced word bag using fitted bins.
pub fn sfa_transform(
    values: &[f64],
    cfg: &SfaConfig,
    bins: &McbBins,
) -> Result<Vec<u32>, CoreError> {
    assert_eq!(bins.breakpoints.len(), cfg.word_length, "bins/config mismatch");
    assert_eq!(bins.alphabet, cfg.alphabet, "bins/config mismatch");
    let coeff_rows = window_coefficients(values, cfg)?;
    let mut counts = vec![0u32; cfg.bag_dim()];
    let mut prev_word: Option<Vec<usize>> = None;
    for row in coeff_rows {
        let word: Vec<usize> = row
            .iter()
            .zip(&bins.breakpoints)
            .map(|(&v, bps)| symbolize(v, bps))
            .collect();
        if prev_word.as_deref() != Some(word.as_slice()) {
            counts[word_to_bag_index(&word, cfg.alphabet)] += 1;
            prev_word = Some(word);
        }
    }
    Ok(counts)
}

/// Batch SFA features for a dataset. MCB bins are fitted on the windows of
/// `fold_train_indices` only (no leakage) and reused for held-out samples.
/// Rows are L2-normalised.
pub fn sfa_feature_matrix(
    dataset: &LabeledDataset,
    fold_train_indices: &[usize],
    cfg: &SfaConfig,
) -> Result<FeatureMatrix, CoreError> {
    let mut training_rows = Vec::new();
    for &i in fold_train_indices {
        training_rows.extend(window_coefficients(&dataset.series[i].values, cfg)?);
    }
    let bins = fit_mcb(&training_rows, cfg.alphabet)?;
    let mut rows = Vec::with_capacity(dataset.len());
    for ts in &dataset.series {
        let counts = sfa_transform(&ts.values, cfg, &bins)?;
        rows.push(counts.iter().map(|&c| c as f64).collect());
    }
    let mut matrix = FeatureMatrix::from_rows(
        rows,
        format!(
            "sfa(w={},window={},a={})",
            cfg.word_length, cfg.window, cfg.alphabet
        ),
    );
    matrix.l2_normalize_rows();
    Ok(matrix)
}
