//! Loading, normalising and splitting univariate time series datasets in the
//! UCR text format (`label<TAB or ,>v1 ... vL`, one series per line).

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::CoreError;
use crate::rng::rng_from_seed;

/// A single univariate series. Values are dimensionless after normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A named dataset of equal-length series with contiguous integer class labels.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub name: String,
    pub series: Vec<TimeSeries>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Length shared by every series in the dataset.
    pub fn series_len(&self) -> usize {
        self.series.first().map_or(0, TimeSeries::len)
    }

    /// Count of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &label in &self.labels {
            counts[label] += 1;
        }
        counts
    }
}

/// Per-sample fold assignment for stratified k-fold cross-validation.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold_assignments: Vec<usize>,
    pub k: usize,
}

impl FoldSplit {
    /// Indices belonging to fold `fold` (the held-out test portion).
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_assignments.len())
            .filter(|&i| self.fold_assignments[i] == fold)
            .collect()
    }

    /// Indices outside fold `fold` (the training portion).
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_assignments.len())
            .filter(|&i| self.fold_assignments[i] != fold)
            .collect()
    }
}

/// Load a dataset from a UCR-format text file.
///
/// Each line is `label<sep>v1<sep>...<sep>vL` where `<sep>` is a tab, comma or
/// run of spaces (the archive ships both tab- and comma-delimited files).
/// Labels are remapped to contiguous integers in first-seen order. Rows
/// containing a non-finite value (the archive encodes missing values as NaN)
/// are dropped with a warning.
pub fn load_ucr_text(path: &Path) -> Result<LabeledDataset, CoreError> {
    let file = std::fs::File::open(path)?;
    let name = dataset_name_from_path(path);
    let reader = BufReader::new(file);

    let mut label_order: Vec<String> = Vec::new();
    let mut series = Vec::new();
    let mut labels = Vec::new();
    let mut expected_len: Option<usize> = None;

    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let normalized = line.replace([',', '\t'], " ");
        let mut tokens = normalized.split_whitespace();
        let label_token = tokens
            .next()
            .ok_or_else(|| CoreError::Format(format!("line {}: empty row", line_no + 1)))?
            .to_string();
        let mut values = Vec::new();
        for token in tokens {
            let v: f64 = token.parse().map_err(|_| {
                CoreError::Format(format!(
                    "line {}: unparseable token {token:?}",
                    line_no + 1
                ))
            })?;
            values.push(v);
        }
        match expected_len {
            None => expected_len = Some(values.len()),
            Some(l) if l != values.len() => {
                return Err(CoreError::Format(format!(
                    "line {}: row has {} values, expected {}",
                    line_no + 1,
                    values.len(),
                    l
                )));
            }
            _ => {}
        }
        if values.iter().any(|v| !v.is_finite()) {
            warn!("{name}: dropping line {} with non-finite values", line_no + 1);
            continue;
        }
        let label_id = match label_order.iter().position(|l| *l == label_token) {
            Some(i) => i,
            None => {
                label_order.push(label_token);
                label_order.len() - 1
            }
        };
        labels.push(label_id);
        series.push(TimeSeries { values });
    }

    if label_order.len() < 2 {
        return Err(CoreError::Data(format!(
            "{name}: found {} classes, need at least 2",
            label_order.len()
        )));
    }
    Ok(LabeledDataset {
        name,
        series,
        labels,
        num_classes: label_order.len(),
    })
}

fn dataset_name_from_path(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    // Strip the archive's _TRAIN/_TEST suffixes.
    stem.trim_end_matches("_TRAIN")
        .trim_end_matches("_TEST")
        .to_string()
}

/// Write a dataset back in tab-delimited UCR format (the symmetric inverse of
/// [`load_ucr_text`], used for round-trip tests and canonical persistence).
pub fn write_ucr_text(dataset: &LabeledDataset, path: &Path) -> Result<(), CoreError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (ts, &label) in dataset.series.iter().zip(&dataset.labels) {
        write!(out, "{label}")?;
        for v in &ts.values {
            write!(out, "\t{v:.9}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

const CONSTANT_SIGMA_EPS: f64 = 1e-12;

/// Z-normalise every series per instance using the population standard
/// deviation. Constant series map to all-zeros.
pub fn z_normalize(dataset: &LabeledDataset) -> LabeledDataset {
    let series = dataset
        .series
        .iter()
        .map(|ts| TimeSeries {
            values: z_normalize_values(&ts.values),
        })
        .collect();
    LabeledDataset {
        name: dataset.name.clone(),
        series,
        labels: dataset.labels.clone(),
        num_classes: dataset.num_classes,
    }
}

/// Z-normalise a raw value slice (population sigma; constant input -> zeros).
pub fn z_normalize_values(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma < CONSTANT_SIGMA_EPS {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sigma).collect()
}

/// Concatenate a train/test pair and assign deterministic stratified k-folds.
///
/// Per class, sample order is shuffled under the seed and folds are dealt
/// round-robin from a per-class starting offset, so per-class fold counts
/// differ by at most one.
pub fn merge_and_fold(
    train: &LabeledDataset,
    test: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<(LabeledDataset, FoldSplit), CoreError> {
    if train.series_len() != test.series_len() {
        return Err(CoreError::Data(format!(
            "{}: train length {} != test length {}",
            train.name,
            train.series_len(),
            test.series_len()
        )));
    }
    if train.num_classes != test.num_classes {
        return Err(CoreError::Data(format!(
            "{}: train has {} classes, test has {}",
            train.name, train.num_classes, test.num_classes
        )));
    }
    let mut series = train.series.clone();
    series.extend(test.series.iter().cloned());
    let mut labels = train.labels.clone();
    labels.extend(test.labels.iter().cloned());
    let merged = LabeledDataset {
        name: train.name.clone(),
        series,
        labels,
        num_classes: train.num_classes,
    };
    let split = stratified_folds(&merged, k, seed);
    Ok((merged, split))
}

/// Stratified fold assignment for an already-merged dataset.
pub fn stratified_folds(dataset: &LabeledDataset, k: usize, seed: u64) -> FoldSplit {
    assert!(k >= 2, "need at least 2 folds");
    let mut rng = rng_from_seed(seed);
    let mut assignments = vec![0usize; dataset.len()];
    for class in 0..dataset.num_classes {
        let mut members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.labels[i] == class)
            .collect();
        if members.len() < k {
            warn!(
                "{}: class {} has {} members (< {} folds), stratification degrades",
                dataset.name,
                class,
                members.len(),
                k
            );
        }
        members.shuffle(&mut rng);
        let start: usize = rng.gen_range(0..k);
        for (pos, &idx) in members.iter().enumerate() {
            assignments[idx] = (start + pos) % k;
        }
    }
    let mut fold_sizes = vec![0usize; k];
    for &f in &assignments {
        fold_sizes[f] += 1;
    }
    if fold_sizes.iter().any(|&s| s == 0) {
        warn!("{}: some folds are empty (N={} < k={k})", dataset.name, dataset.len());
    }
    FoldSplit {
        fold_assignments: assignments,
        k,
    }
}
