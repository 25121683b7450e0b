//! Grid definitions and the nested cross-validated grid search.

use std::collections::HashMap;

use anyhow::{bail, Context, Result};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tsfuse_core::data::{FoldSplit, LabeledDataset};
use tsfuse_core::features::FeatureMatrix;
use tsfuse_core::fusion::{FusionConfig, GatedFusionModel};
use tsfuse_core::rng::{derive_seed, rng_from_seed};
use tsfuse_core::rocket::{rocket_feature_matrix, RocketConfig};
use tsfuse_core::sax::{sax_feature_matrix, SaxConfig};
use tsfuse_core::sfa::{sfa_feature_matrix, SfaConfig};
use tsfuse_core::CoreError;

use rand::seq::SliceRandom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum ModelFamily {
    F3,
    F2Sr,
    F2Sfr,
    F2Ss,
    SoloSax,
    SoloSfa,
    SoloRocket,
}

impl ModelFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelFamily::F3 => "F3",
            ModelFamily::F2Sr => "F2_SR",
            ModelFamily::F2Sfr => "F2_SFR",
            ModelFamily::F2Ss => "F2_SS",
            ModelFamily::SoloSax => "solo_SAX",
            ModelFamily::SoloSfa => "solo_SFA",
            ModelFamily::SoloRocket => "solo_ROCKET",
        }
    }

    pub fn uses_sax(&self) -> bool {
        matches!(self, ModelFamily::F3 | ModelFamily::F2Sr | ModelFamily::F2Ss | ModelFamily::SoloSax)
    }
    pub fn uses_sfa(&self) -> bool {
        matches!(self, ModelFamily::F3 | ModelFamily::F2Sfr | ModelFamily::F2Ss | ModelFamily::SoloSfa)
    }
    pub fn uses_rocket(&self) -> bool {
        matches!(
            self,
            ModelFamily::F3 | ModelFamily::F2Sr | ModelFamily::F2Sfr | ModelFamily::SoloRocket
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Selection {
    /// Pick the config with the best mean inner-validation accuracy.
    Nested,
    /// Pick the config with the best mean outer test accuracy (optimistic).
    OuterMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum GridKind {
    Full,
    /// One config per axis midpoint, for desk-scale runs.
    Reduced,
}

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sax: Option<SaxConfig>,
    pub sfa: Option<SfaConfig>,
    pub rocket_kernels: Option<usize>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl GridPoint {
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(s) = &self.sax {
            parts.push(format!("sax_w={} sax_frame={}", s.word_length, s.frame));
        }
        if let Some(s) = &self.sfa {
            parts.push(format!("sfa_w={} sfa_win={}", s.word_length, s.window));
        }
        if let Some(k) = self.rocket_kernels {
            parts.push(format!("kernels={k}"));
        }
        parts.push(format!("embed={} hidden={}", self.embed_dim, self.hidden_dim));
        parts.join(" ")
    }
}

/// ROCKET kernel banks are always seeded with 42, independent of the master
/// seed, so the feature space is identical across experiments.
pub const ROCKET_SEED: u64 = 42;

const SAX_WORDS: [usize; 2] = [6, 8];
const SAX_FRAMES: [usize; 3] = [10, 15, 20];
const SFA_WORDS: [usize; 2] = [6, 8];
const SFA_WINDOWS: [usize; 3] = [10, 15, 20];
const ROCKET_KERNELS: [usize; 2] = [1500, 2000];
const HEAD_DIMS: [usize; 2] = [64, 128];

/// Enumerate the full grid for a family. Cardinalities: F3 288, F2_SR/F2_SFR
/// 48, F2_SS 144, SAX/SFA solo 24, ROCKET solo 8.
pub fn enumerate_grid(family: ModelFamily, kind: GridKind) -> Vec<GridPoint> {
    let (sax_axis, sfa_axis, rocket_axis, head_axis): (
        Vec<Option<SaxConfig>>,
        Vec<Option<SfaConfig>>,
        Vec<Option<usize>>,
        Vec<(usize, usize)>,
    ) = match kind {
        GridKind::Full => (
            if family.uses_sax() {
                SAX_WORDS
                    .iter()
                    .flat_map(|&w| SAX_FRAMES.iter().map(move |&f| Some(SaxConfig::new(w, f))))
                    .collect()
            } else {
                vec![None]
            },
            if family.uses_sfa() {
                SFA_WORDS
                    .iter()
                    .flat_map(|&w| SFA_WINDOWS.iter().map(move |&win| Some(SfaConfig::new(w, win))))
                    .collect()
            } else {
                vec![None]
            },
            if family.uses_rocket() {
                ROCKET_KERNELS.iter().map(|&k| Some(k)).collect()
            } else {
                vec![None]
            },
            HEAD_DIMS
                .iter()
                .flat_map(|&e| HEAD_DIMS.iter().map(move |&h| (e, h)))
                .collect(),
        ),
        GridKind::Reduced => (
            vec![if family.uses_sax() {
                Some(SaxConfig::new(8, 15))
            } else {
                None
            }],
            vec![if family.uses_sfa() {
                Some(SfaConfig::new(8, 15))
            } else {
                None
            }],
            vec![if family.uses_rocket() { Some(1500) } else { None }],
            vec![(64, 64)],
        ),
    };
    let mut grid = Vec::new();
    for sax in &sax_axis {
        for sfa in &sfa_axis {
            for rocket in &rocket_axis {
                for &(embed_dim, hidden_dim) in &head_axis {
                    grid.push(GridPoint {
                        sax: sax.clone(),
                        sfa: sfa.clone(),
                        rocket_kernels: *rocket,
                        embed_dim,
                        hidden_dim,
                    });
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub seed: u64,
    pub grid: GridKind,
    pub selection: Selection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 42,
            grid: GridKind::Full,
            selection: Selection::Nested,
        }
    }
}

/// Per-sample test prediction of the winning config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub index: usize,
    pub fold: usize,
    pub label: usize,
    pub prediction: usize,
    pub gates: Vec<f64>,
}

/// Outcome of one (dataset, family) grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub family: String,
    pub config_index: usize,
    pub config: GridPoint,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub predictions: Vec<SamplePrediction>,
    pub grid_size: usize,
    pub failed_configs: usize,
}

struct ConfigOutcome {
    inner_val_acc: Vec<f64>,
    test_acc: Vec<f64>,
    predictions: Vec<SamplePrediction>,
}

/// Stratified 80/20 split of the outer-train indices for early stopping.
fn inner_split(
    labels: &[usize],
    train_idx: &[usize],
    num_classes: usize,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let mut tr = Vec::new();
    let mut val = Vec::new();
    for class in 0..num_classes {
        let mut members: Vec<usize> = train_idx
            .iter()
            .copied()
            .filter(|&i| labels[i] == class)
            .collect();
        members.shuffle(&mut rng);
        let n_val = ((members.len() as f64 * 0.2).round() as usize)
            .max(if members.len() >= 2 { 1 } else { 0 })
            .min(members.len().saturating_sub(1));
        val.extend(members.iter().take(n_val));
        tr.extend(members.iter().skip(n_val));
    }
    if val.is_empty() && tr.len() >= 2 {
        val.push(tr.pop().unwrap());
    }
    tr.sort_unstable();
    val.sort_unstable();
    (tr, val)
}

fn accuracy_mean_sd(fold_accs: &[f64]) -> (f64, f64) {
    let n = fold_accs.len() as f64;
    let mean = fold_accs.iter().sum::<f64>() / n;
    let var = fold_accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Feature caches shared across grid configs. SAX and raw ROCKET matrices are
/// fold-independent; SFA bins are fitted per (config, fold) on the outer
/// training portion only.
struct FeatureCache<'a> {
    dataset: &'a LabeledDataset,
    split: &'a FoldSplit,
    sax: HashMap<(usize, usize), FeatureMatrix>,
    sfa: HashMap<(usize, usize, usize), FeatureMatrix>,
    rocket_raw: HashMap<usize, FeatureMatrix>,
}

impl<'a> FeatureCache<'a> {
    fn new(dataset: &'a LabeledDataset, split: &'a FoldSplit) -> Self {
        Self {
            dataset,
            split,
            sax: HashMap::new(),
            sfa: HashMap::new(),
            rocket_raw: HashMap::new(),
        }
    }

    fn sax(&mut self, cfg: &SaxConfig) -> Result<&FeatureMatrix, CoreError> {
        let key = (cfg.word_length, cfg.frame);
        if !self.sax.contains_key(&key) {
            let m = sax_feature_matrix(self.dataset, cfg)?;
            self.sax.insert(key, m);
        }
        Ok(&self.sax[&key])
    }

    fn sfa(&mut self, cfg: &SfaConfig, fold: usize) -> Result<&FeatureMatrix, CoreError> {
        let key = (cfg.word_length, cfg.window, fold);
        if !self.sfa.contains_key(&key) {
            let train = self.split.train_indices(fold);
            let m = sfa_feature_matrix(self.dataset, &train, cfg)?;
            self.sfa.insert(key, m);
        }
        Ok(&self.sfa[&key])
    }

    /// Raw (unstandardised) ROCKET matrix; per-fold standardisation happens at
    /// the call site with training-fold statistics.
    fn rocket_raw(&mut self, n_kernels: usize) -> Result<&FeatureMatrix, CoreError> {
        if !self.rocket_raw.contains_key(&n_kernels) {
            let m = rocket_feature_matrix(self.dataset, &RocketConfig::new(n_kernels, ROCKET_SEED))?;
            self.rocket_raw.insert(n_kernels, m);
        }
        Ok(&self.rocket_raw[&n_kernels])
    }
}

fn evaluate_config(
    dataset: &LabeledDataset,
    split: &FoldSplit,
    family: ModelFamily,
    point: &GridPoint,
    config_index: usize,
    cfg: &ExperimentConfig,
    sax_matrix: Option<&FeatureMatrix>,
    sfa_by_fold: &[Option<FeatureMatrix>],
    rocket_raw: Option<&FeatureMatrix>,
) -> Result<ConfigOutcome, CoreError> {
    let mut inner_val_acc = Vec::with_capacity(cfg.folds);
    let mut test_acc = Vec::with_capacity(cfg.folds);
    let mut predictions = Vec::new();
    for fold in 0..cfg.folds {
        let fold_seed = derive_seed(
            cfg.seed,
            &format!("{}/{}/{}/{}", dataset.name, family.tag(), config_index, fold),
        );
        let train_idx = split.train_indices(fold);
        let test_idx = split.test_indices(fold);

        // assemble representation blocks in SAX, SFA, ROCKET order
        let mut blocks: Vec<FeatureMatrix> = Vec::new();
        if let Some(m) = sax_matrix {
            blocks.push(m.clone());
        }
        if let Some(m) = &sfa_by_fold[fold] {
            blocks.push(m.clone());
        }
        if let Some(raw) = rocket_raw {
            let mut m = raw.clone();
            let (means, sigmas) = m.column_stats(&train_idx);
            m.standardize_with(&means, &sigmas);
            blocks.push(m);
        }
        let dims: Vec<usize> = blocks.iter().map(|b| b.n_cols).collect();

        let gather = |idx: &[usize]| -> Vec<(Vec<&[f64]>, usize)> {
            idx.iter()
                .map(|&i| {
                    (
                        blocks.iter().map(|b| b.row(i)).collect::<Vec<&[f64]>>(),
                        dataset.labels[i],
                    )
                })
                .collect()
        };
        let (inner_tr, inner_val) = inner_split(
            &dataset.labels,
            &train_idx,
            dataset.num_classes,
            derive_seed(fold_seed, "inner"),
        );
        let fusion_cfg = FusionConfig {
            embed_dim: point.embed_dim,
            hidden_dim: point.hidden_dim,
            seed: fold_seed,
            ..FusionConfig::default()
        };
        let mut model = GatedFusionModel::new(dims, dataset.num_classes, &fusion_cfg);
        model.train(&gather(&inner_tr), &gather(&inner_val), &fusion_cfg)?;
        let (_, val_acc) = model.evaluate_loss(&gather(&inner_val))?;
        inner_val_acc.push(val_acc);

        let mut correct = 0usize;
        for &i in &test_idx {
            let features: Vec<&[f64]> = blocks.iter().map(|b| b.row(i)).collect();
            let (pred, gates) = model.predict(&features)?;
            if pred == dataset.labels[i] {
                correct += 1;
            }
            predictions.push(SamplePrediction {
                index: i,
                fold,
                label: dataset.labels[i],
                prediction: pred,
                gates,
            });
        }
        test_acc.push(correct as f64 / test_idx.len() as f64);
    }
    predictions.sort_by_key(|p| p.index);
    Ok(ConfigOutcome {
        inner_val_acc,
        test_acc,
        predictions,
    })
}

/// Grid search one (dataset, family) pair. Failed configs (training
/// divergence, infeasible window sizes, ...) are excluded from selection;
/// if every config fails the run errors out.
pub fn run_grid(
    dataset: &LabeledDataset,
    split: &FoldSplit,
    family: ModelFamily,
    cfg: &ExperimentConfig,
) -> Result<RunResult> {
    let grid = enumerate_grid(family, cfg.grid);
    let grid_size = grid.len();

    // precompute shared matrices sequentially (they are cached by key),
    // then evaluate configs in parallel
    let mut cache = FeatureCache::new(dataset, split);
    let mut sax_matrices: HashMap<(usize, usize), FeatureMatrix> = HashMap::new();
    let mut sfa_matrices: HashMap<(usize, usize), Vec<Option<FeatureMatrix>>> = HashMap::new();
    let mut rocket_matrices: HashMap<usize, FeatureMatrix> = HashMap::new();
    let mut feasible: Vec<(usize, &GridPoint)> = Vec::new();
    for (ci, point) in grid.iter().enumerate() {
        let mut ok = true;
        if let Some(s) = &point.sax {
            let key = (s.word_length, s.frame);
            if !sax_matrices.contains_key(&key) {
                match cache.sax(s) {
                    Ok(m) => {
                        sax_matrices.insert(key, m.clone());
                    }
                    Err(e) => {
                        warn!("{}: config {ci} SAX failed: {e}", dataset.name);
                        ok = false;
                    }
                }
            }
            if ok && !sax_matrices.contains_key(&key) {
                ok = false;
            }
        }
        if ok {
            if let Some(s) = &point.sfa {
                let key = (s.word_length, s.window);
                if !sfa_matrices.contains_key(&key) {
                    let mut per_fold = Vec::with_capacity(cfg.folds);
                    let mut fold_ok = true;
                    for fold in 0..cfg.folds {
                        match cache.sfa(s, fold) {
                            Ok(m) => per_fold.push(Some(m.clone())),
                            Err(e) => {
                                warn!("{}: config {ci} SFA fold {fold} failed: {e}", dataset.name);
                                fold_ok = false;
                                break;
                            }
                        }
                    }
                    if fold_ok {
                        sfa_matrices.insert(key, per_fold);
                    } else {
                        ok = false;
                    }
                }
            }
        }
        if ok {
            if let Some(k) = point.rocket_kernels {
                if !rocket_matrices.contains_key(&k) {
                    match cache.rocket_raw(k) {
                        Ok(m) => {
                            rocket_matrices.insert(k, m.clone());
                        }
                        Err(e) => {
                            warn!("{}: config {ci} ROCKET failed: {e}", dataset.name);
                            ok = false;
                        }
                    }
                }
            }
        }
        if ok {
            feasible.push((ci, point));
        }
    }

    let empty_sfa: Vec<Option<FeatureMatrix>> = (0..cfg.folds).map(|_| None).collect();
    let outcomes: Vec<(usize, Result<ConfigOutcome, CoreError>)> = feasible
        .par_iter()
        .map(|&(ci, point)| {
            let sax_m = point
                .sax
                .as_ref()
                .map(|s| &sax_matrices[&(s.word_length, s.frame)]);
            let sfa_m = point
                .sfa
                .as_ref()
                .map(|s| &sfa_matrices[&(s.word_length, s.window)])
                .unwrap_or(&empty_sfa);
            let rocket_m = point.rocket_kernels.map(|k| &rocket_matrices[&k]);
            (
                ci,
                evaluate_config(dataset, split, family, point, ci, cfg, sax_m, sfa_m, rocket_m),
            )
        })
        .collect();

    let mut succeeded: Vec<(usize, ConfigOutcome)> = Vec::new();
    let mut failed = grid_size - feasible.len();
    for (ci, outcome) in outcomes {
        match outcome {
            Ok(o) => succeeded.push((ci, o)),
            Err(e) => {
                warn!("{}: config {ci} failed: {e}", dataset.name);
                failed += 1;
            }
        }
    }
    if succeeded.is_empty() {
        bail!(
            "{}/{}: all {grid_size} grid configs failed",
            dataset.name,
            family.tag()
        );
    }
    succeeded.sort_by_key(|(ci, _)| *ci);
    let score = |o: &ConfigOutcome| -> f64 {
        let accs = match cfg.selection {
            Selection::Nested => &o.inner_val_acc,
            Selection::OuterMax => &o.test_acc,
        };
        accs.iter().sum::<f64>() / accs.len() as f64
    };
    let (best_ci, best) = succeeded
        .iter()
        .max_by(|a, b| score(&a.1).partial_cmp(&score(&b.1)).unwrap())
        .map(|(ci, o)| (*ci, o))
        .context("non-empty grid")?;
    let (mean, sd) = accuracy_mean_sd(&best.test_acc);
    Ok(RunResult {
        dataset: dataset.name.clone(),
        family: family.tag().to_string(),
        config_index: best_ci,
        config: grid[best_ci].clone(),
        fold_accuracies: best.test_acc.clone(),
        mean_accuracy: mean,
        sd_accuracy: sd,
        predictions: best.predictions.clone(),
        grid_size,
        failed_configs: failed,
    })
}
