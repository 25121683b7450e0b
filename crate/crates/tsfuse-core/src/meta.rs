//! The 13 dataset-level meta-features: global complexity descriptors
//! (spectral entropy, turning points, kurtosis, autocorrelation, permutation
//! entropy, series length, spectral KL diversity) and class-separability
//! descriptors (DTW separability in time and frequency, Kruskal-Wallis on PSD
//! energies, imbalance index).

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::{z_normalize, LabeledDataset};
use crate::rng::rng_from_seed;

/// KL smoothing for zero PSD bins.
const KL_EPS: f64 = 1e-12;

/// Default pair-budget for DTW separability.
pub const DTW_BUDGET: usize = 80;

/// One-sided Welch power spectral density estimate.
#[derive(Debug, Clone)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

/// The 13 dataset descriptors, in the canonical column order of
/// [`MetaFeatureVector::COLUMNS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFeatureVector {
    pub spectral_entropy: f64,
    pub spectral_entropy_var: f64,
    pub turning_points: f64,
    pub turning_points_var: f64,
    pub kurtosis: f64,
    pub autocorr_lag1: f64,
    pub permutation_entropy: f64,
    pub ts_length: f64,
    pub kl_psd: f64,
    pub dtw_separability_time: f64,
    pub dtw_separability_freq: f64,
    pub kruskal_psd: f64,
    pub imbalance_index: f64,
}

impl MetaFeatureVector {
    pub const COLUMNS: [&'static str; 13] = [
        "spectral_entropy",
        "spectral_entropy_var",
        "turning_points",
        "turning_points_var",
        "kurtosis",
        "autocorr_lag1",
        "permutation_entropy",
        "ts_length",
        "kl_psd",
        "dtw_separability_time",
        "dtw_separability_freq",
        "kruskal_psd",
        "imbalance_index",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.spectral_entropy,
            self.spectral_entropy_var,
            self.turning_points,
            self.turning_points_var,
            self.kurtosis,
            self.autocorr_lag1,
            self.permutation_entropy,
            self.ts_length,
            self.kl_psd,
            self.dtw_separability_time,
            self.dtw_separability_freq,
            self.kruskal_psd,
            self.imbalance_index,
        ]
    }
}

/// Welch's method: segment length `min(256, n)`, 50% overlap, periodic Hann
/// window, per-segment mean removal, averaged one-sided periodograms.
pub fn welch_psd(x: &[f64]) -> Psd {
    let n = x.len();
    assert!(n >= 8, "welch_psd needs at least 8 samples");
    let nperseg = n.min(256);
    let step = (nperseg / 2).max(1);
    let window: Vec<f64> = (0..nperseg)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / nperseg as f64).cos()))
        .collect();
    let win_norm: f64 = window.iter().map(|w| w * w).sum();
    let n_bins = nperseg / 2 + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nperseg);
    let mut acc = vec![0.0; n_bins];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + nperseg <= n {
        let seg = &x[start..start + nperseg];
        let mean = seg.iter().sum::<f64>() / nperseg as f64;
        let mut buf: Vec<Complex<f64>> = seg
            .iter()
            .zip(&window)
            .map(|(&v, &w)| Complex::new((v - mean) * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (k, bin) in buf.iter().take(n_bins).enumerate() {
            let mut p = bin.norm_sqr() / win_norm;
            if k != 0 && !(nperseg % 2 == 0 && k == n_bins - 1) {
                p *= 2.0; // one-sided doubling except DC and Nyquist
            }
            acc[k] += p;
        }
        segments += 1;
        start += step;
    }
    for p in &mut acc {
        *p /= segments as f64;
    }
    let frequencies = (0..n_bins).map(|k| k as f64 / nperseg as f64).collect();
    Psd {
        frequencies,
        power: acc,
    }
}

/// Natural-log Shannon entropy of the normalised PSD; zero total power
/// defines H = 0 and zero bins contribute nothing.
pub fn spectral_entropy(x: &[f64]) -> f64 {
    entropy_of_distribution(&welch_psd(x).power)
}

fn entropy_of_distribution(power: &[f64]) -> f64 {
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            q * q.ln()
        })
        .sum::<f64>()
}

/// Fraction of interior points where the sign of the difference changes
/// (divisor n, zero differences count as sign 0).
pub fn turning_points(x: &[f64]) -> f64 {
    let n = x.len();
    assert!(n >= 3);
    let sign = |d: f64| -> i8 {
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut turns = 0usize;
    for t in 1..n - 1 {
        if sign(x[t + 1] - x[t]) != sign(x[t] - x[t - 1]) {
            turns += 1;
        }
    }
    turns as f64 / n as f64
}

/// Population excess kurtosis; constant series defined as 0 with a warning.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if m2 < 1e-24 {
        warn!("excess_kurtosis of constant series defined as 0");
        return 0.0;
    }
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Lag-1 autocorrelation `sum (x_t - m)(x_{t+1} - m) / ((n-1) Var)` with the
/// sample variance; constant series defined as 0 with a warning.
pub fn autocorr_lag1(x: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var < 1e-24 {
        warn!("autocorr_lag1 of constant series defined as 0");
        return 0.0;
    }
    let num: f64 = (0..n - 1).map(|t| (x[t] - mean) * (x[t + 1] - mean)).sum();
    num / ((n - 1) as f64 * var)
}

/// Permutation entropy of order 3, delay 1, natural log. Ties within a triple
/// rank by position (earlier index ranks lower).
pub fn permutation_entropy(x: &[f64]) -> f64 {
    assert!(x.len() >= 5);
    let mut counts = [0usize; 6];
    for w in x.windows(3) {
        let mut order = [0usize, 1, 2];
        // stable sort: equal values keep index order
        order.sort_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap());
        let idx = match order {
            [0, 1, 2] => 0,
            [0, 2, 1] => 1,
            [1, 0, 2] => 2,
            [1, 2, 0] => 3,
            [2, 0, 1] => 4,
            [2, 1, 0] => 5,
            _ => unreachable!(),
        };
        counts[idx] += 1;
    }
    let total: f64 = counts.iter().sum::<usize>() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Mean symmetric KL divergence between each series' normalised PSD and the
/// dataset-mean spectrum, with epsilon smoothing on zero bins.
pub fn kl_psd_global(dataset: &LabeledDataset) -> f64 {
    assert!(dataset.len() >= 2, "kl_psd_global needs at least 2 series");
    let spectra: Vec<Vec<f64>> = dataset
        .series
        .par_iter()
        .map(|ts| normalize_distribution(&welch_psd(&ts.values).power))
        .collect();
    let bins = spectra[0].len();
    let mut mean = vec![0.0; bins];
    for p in &spectra {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= spectra.len() as f64;
    }
    spectra
        .iter()
        .map(|p| 0.5 * (kl_divergence(p, &mean) + kl_divergence(&mean, p)))
        .sum::<f64>()
        / spectra.len() as f64
}

fn normalize_distribution(power: &[f64]) -> Vec<f64> {
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        // uniform fallback keeps degenerate all-zero spectra comparable
        return vec![1.0 / power.len() as f64; power.len()];
    }
    power.iter().map(|&p| p / total).collect()
}

fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let a = a + KL_EPS;
            let b = b + KL_EPS;
            a * (a / b).ln()
        })
        .sum()
}

/// Classic unconstrained DTW with pointwise squared difference; returns the
/// square root of the accumulated cost.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &av in a {
        curr[0] = f64::INFINITY;
        for (j, &bv) in b.iter().enumerate() {
            let cost = (av - bv).powi(2);
            curr[j + 1] = cost + prev[j + 1].min(curr[j]).min(prev[j]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m].sqrt()
}

/// Domain the separability ratio is computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtwDomain {
    Time,
    /// Each series is replaced by its Welch-PSD power sequence first.
    Frequency,
}

/// Effective subsample budget: `min(B, max(50, B * 300 / max(300, L)))`.
pub fn effective_budget(budget: usize, series_len: usize) -> usize {
    let scaled = budget as f64 * 300.0 / 300.0f64.max(series_len as f64);
    budget.min((scaled.max(50.0)) as usize)
}

/// Ratio of mean between-class to mean within-class DTW distance on an
/// approximately class-balanced seeded subsample. A zero within-class mean
/// (all duplicates) yields an infinite sentinel with a warning.
pub fn dtw_separability(
    dataset: &LabeledDataset,
    domain: DtwDomain,
    budget: usize,
    seed: u64,
) -> f64 {
    let b_eff = effective_budget(budget, dataset.series_len());
    let mut rng = rng_from_seed(seed);
    // round-robin draw per class until the budget is reached
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    for (i, &label) in dataset.labels.iter().enumerate() {
        per_class[label].push(i);
    }
    for members in &mut per_class {
        members.shuffle(&mut rng);
    }
    let mut chosen = Vec::new();
    let mut round = 0usize;
    while chosen.len() < b_eff.min(dataset.len()) {
        let mut advanced = false;
        for members in &per_class {
            if let Some(&idx) = members.get(round) {
                chosen.push(idx);
                advanced = true;
                if chosen.len() == b_eff.min(dataset.len()) {
                    break;
                }
            }
        }
        if !advanced {
            break;
        }
        round += 1;
    }

    let sequences: Vec<Vec<f64>> = chosen
        .par_iter()
        .map(|&i| match domain {
            DtwDomain::Time => dataset.series[i].values.clone(),
            DtwDomain::Frequency => welch_psd(&dataset.series[i].values).power,
        })
        .collect();

    let pairs: Vec<(usize, usize)> = (0..chosen.len())
        .flat_map(|i| ((i + 1)..chosen.len()).map(move |j| (i, j)))
        .collect();
    let distances: Vec<(bool, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let same = dataset.labels[chosen[i]] == dataset.labels[chosen[j]];
            (same, dtw_distance(&sequences[i], &sequences[j]))
        })
        .collect();

    let (mut within_sum, mut within_n, mut between_sum, mut between_n) = (0.0, 0usize, 0.0, 0usize);
    for (same, d) in distances {
        if same {
            within_sum += d;
            within_n += 1;
        } else {
            between_sum += d;
            between_n += 1;
        }
    }
    if within_n == 0 || between_n == 0 {
        warn!("{}: dtw_separability lacks within/between pairs", dataset.name);
        return f64::INFINITY;
    }
    let within = within_sum / within_n as f64;
    let between = between_sum / between_n as f64;
    if within == 0.0 {
        warn!("{}: zero within-class DTW mean, separability is infinite", dataset.name);
        return f64::INFINITY;
    }
    between / within
}

/// Kruskal-Wallis H on total PSD energies grouped by class, with average-rank
/// tie correction.
pub fn kruskal_psd(dataset: &LabeledDataset) -> f64 {
    let energies: Vec<f64> = dataset
        .series
        .par_iter()
        .map(|ts| welch_psd(&ts.values).power.iter().sum())
        .collect();
    kruskal_wallis(&energies, &dataset.labels, dataset.num_classes)
}

/// Tie-corrected Kruskal-Wallis H statistic.
pub fn kruskal_wallis(values: &[f64], groups: &[usize], num_groups: usize) -> f64 {
    let n = values.len();
    assert_eq!(groups.len(), n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0usize;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mut group_sum = vec![0.0; num_groups];
    let mut group_n = vec![0usize; num_groups];
    for (&g, &r) in groups.iter().zip(&ranks) {
        group_sum[g] += r;
        group_n[g] += 1;
    }
    let nf = n as f64;
    let mut h = 0.0;
    for g in 0..num_groups {
        if group_n[g] > 0 {
            h += group_sum[g] * group_sum[g] / group_n[g] as f64;
        }
    }
    h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);
    let correction = 1.0 - tie_term / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return 0.0; // every value tied
    }
    h / correction
}

/// `max_c n_c / N` — the accuracy of always predicting the majority class.
pub fn imbalance_index(dataset: &LabeledDataset) -> f64 {
    let counts = dataset.class_counts();
    let max = counts.iter().max().copied().unwrap_or(0);
    max as f64 / dataset.len() as f64
}

fn mean_and_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Assemble all 13 meta-features. Per-series features are computed on
/// z-normalised series and averaged across samples; `_var` features take the
/// across-sample variance.
pub fn compute_meta_features(dataset: &LabeledDataset, seed: u64) -> MetaFeatureVector {
    let normalized = z_normalize(dataset);
    let per_series: Vec<(f64, f64, f64, f64, f64)> = normalized
        .series
        .par_iter()
        .map(|ts| {
            let v = &ts.values;
            (
                spectral_entropy(v),
                turning_points(v),
                excess_kurtosis(v),
                autocorr_lag1(v),
                permutation_entropy(v),
            )
        })
        .collect();
    let col = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| -> Vec<f64> {
        per_series.iter().map(f).collect()
    };
    let (se_mean, se_var) = mean_and_var(&col(|t| t.0));
    let (tp_mean, tp_var) = mean_and_var(&col(|t| t.1));
    let (kurt_mean, _) = mean_and_var(&col(|t| t.2));
    let (ac_mean, _) = mean_and_var(&col(|t| t.3));
    let (pe_mean, _) = mean_and_var(&col(|t| t.4));

    MetaFeatureVector {
        spectral_entropy: se_mean,
        spectral_entropy_var: se_var,
        turning_points: tp_mean,
        turning_points_var: tp_var,
        kurtosis: kurt_mean,
        autocorr_lag1: ac_mean,
        permutation_entropy: pe_mean,
        ts_length: normalized.series_len() as f64,
        kl_psd: kl_psd_global(&normalized),
        dtw_separability_time: dtw_separability(
            &normalized,
            DtwDomain::Time,
            DTW_BUDGET,
            crate::rng::derive_seed(seed, "dtw/time"),
        ),
        dtw_separability_freq: dtw_separability(
            &normalized,
            DtwDomain::Frequency,
            DTW_BUDGET,
            crate::rng::derive_seed(seed, "dtw/freq"),
        ),
        kruskal_psd: kruskal_psd(&normalized),
        imbalance_index: imbalance_index(&normalized),
    }
}
