//! Subcommand implementations: dataset discovery, training orchestration and
//! the analysis/report stages built on the stored results.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};

use tsfuse_core::attribution::{fit_surrogate, linear_shap, shap_summary};
use tsfuse_core::case_study::{
    classify_samples, confusion_delta, count_statuses, gate_bin_profile, gate_shift,
};
use tsfuse_core::data::{
    load_ucr_text, merge_and_fold, stratified_folds, z_normalize, FoldSplit, LabeledDataset,
};
use tsfuse_core::meta::{compute_meta_features, imbalance_index, MetaFeatureVector};
use tsfuse_core::regimes::{
    adjusted_rand_index, bootstrap_stability, davies_bouldin, silhouette, standardize_columns,
    ward_linkage,
};
use tsfuse_core::rng::derive_seed;
use tsfuse_core::stats::{paired_comparison_report, PairedDeltas};

use crate::experiment::{run_grid, ExperimentConfig, ModelFamily, RunResult};
use crate::plots;
use crate::report;
use crate::store;

/// Resolved invocation context shared by all subcommands.
pub struct Ctx {
    pub data_root: Option<PathBuf>,
    pub datasets: Vec<String>,
    pub families: Vec<ModelFamily>,
    pub out: PathBuf,
    pub cfg: ExperimentConfig,
    pub resume: bool,
}

const NAME_SUFFIXES: [&str; 3] = ["tsv", "txt", "csv"];

fn find_split_file(root: &Path, name: &str, split: &str) -> Option<PathBuf> {
    for dir in [root.join(name), root.to_path_buf()] {
        for ext in NAME_SUFFIXES {
            let p = dir.join(format!("{name}_{split}.{ext}"));
            if p.exists() {
                return Some(p);
            }
        }
    }
    None
}

/// Discover dataset names under the data root (`<name>/<name>_TRAIN.*` or
/// flat `<name>_TRAIN.*` layout).
pub fn discover_datasets(root: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(root).with_context(|| format!("reading {}", root.display()))? {
        let entry = entry?;
        let file_name = entry.file_name().to_string_lossy().to_string();
        if entry.path().is_dir() {
            if find_split_file(root, &file_name, "TRAIN").is_some() {
                names.push(file_name);
            }
        } else if let Some(stem) = file_name
            .rsplit_once('.')
            .map(|(s, _)| s)
            .and_then(|s| s.strip_suffix("_TRAIN"))
        {
            names.push(stem.to_string());
        }
    }
    names.sort();
    names.dedup();
    Ok(names)
}

/// Load, merge train+test, z-normalise per instance and assign stratified
/// folds seeded from the master seed and the dataset name.
pub fn load_dataset(ctx: &Ctx, name: &str) -> Result<(LabeledDataset, FoldSplit)> {
    let root = ctx
        .data_root
        .as_ref()
        .context("no data root: pass --data-root or set TSFUSE_DATA")?;
    let train_path = find_split_file(root, name, "TRAIN")
        .with_context(|| format!("{name}: no *_TRAIN file under {}", root.display()))?;
    let train = load_ucr_text(&train_path)?;
    let fold_seed = derive_seed(ctx.cfg.seed, &format!("folds/{name}"));
    let (merged, _) = match find_split_file(root, name, "TEST") {
        Some(test_path) => {
            let test = load_ucr_text(&test_path)?;
            merge_and_fold(&train, &test, ctx.cfg.folds, fold_seed)?
        }
        None => {
            warn!("{name}: no TEST split found, cross-validating the TRAIN file alone");
            let split = stratified_folds(&train, ctx.cfg.folds, fold_seed);
            (train, split)
        }
    };
    let normalized = z_normalize(&merged);
    let split = stratified_folds(&normalized, ctx.cfg.folds, fold_seed);
    Ok((normalized, split))
}

pub fn resolve_datasets(ctx: &Ctx) -> Result<Vec<String>> {
    if !ctx.datasets.is_empty() {
        return Ok(ctx.datasets.clone());
    }
    let root = ctx
        .data_root
        .as_ref()
        .context("no data root: pass --data-root or set TSFUSE_DATA")?;
    let names = discover_datasets(root)?;
    if names.is_empty() {
        bail!("no datasets found under {}", root.display());
    }
    Ok(names)
}

pub fn cmd_ingest(ctx: &Ctx) -> Result<()> {
    let names = resolve_datasets(ctx)?;
    let mut csv = String::from("dataset,n_samples,series_len,n_classes,imbalance_index\n");
    for name in &names {
        let (dataset, _) = load_dataset(ctx, name)?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            dataset.name,
            dataset.len(),
            dataset.series_len(),
            dataset.num_classes,
            imbalance_index(&dataset)
        ));
        info!(
            "{}: {} samples, length {}, {} classes",
            dataset.name,
            dataset.len(),
            dataset.series_len(),
            dataset.num_classes
        );
    }
    fs::create_dir_all(&ctx.out)?;
    fs::write(ctx.out.join("ingest.csv"), csv)?;
    Ok(())
}

pub fn cmd_features(ctx: &Ctx) -> Result<()> {
    use tsfuse_core::rocket::{rocket_feature_matrix, RocketConfig};
    use tsfuse_core::sax::{sax_feature_matrix, SaxConfig};
    use tsfuse_core::sfa::{sfa_feature_matrix, SfaConfig};
    let names = resolve_datasets(ctx)?;
    let mut csv = String::from("dataset,representation,rows,cols\n");
    for name in &names {
        let (dataset, split) = load_dataset(ctx, name)?;
        match sax_feature_matrix(&dataset, &SaxConfig::new(8, 15)) {
            Ok(m) => csv.push_str(&format!("{name},sax,{},{}\n", m.n_rows, m.n_cols)),
            Err(e) => warn!("{name}: SAX features failed: {e}"),
        }
        match sfa_feature_matrix(&dataset, &split.train_indices(0), &SfaConfig::new(8, 15)) {
            Ok(m) => csv.push_str(&format!("{name},sfa,{},{}\n", m.n_rows, m.n_cols)),
            Err(e) => warn!("{name}: SFA features failed: {e}"),
        }
        match rocket_feature_matrix(&dataset, &RocketConfig::new(1500, crate::experiment::ROCKET_SEED)) {
            Ok(m) => csv.push_str(&format!("{name},rocket,{},{}\n", m.n_rows, m.n_cols)),
            Err(e) => warn!("{name}: ROCKET features failed: {e}"),
        }
    }
    fs::create_dir_all(&ctx.out)?;
    fs::write(ctx.out.join("features.csv"), csv)?;
    Ok(())
}

pub fn cmd_train(ctx: &Ctx) -> Result<()> {
    let names = resolve_datasets(ctx)?;
    for name in &names {
        let (dataset, split) = load_dataset(ctx, name)?;
        for &family in &ctx.families {
            if ctx.resume && store::is_complete(&ctx.out, &dataset.name, family.tag()) {
                info!("{}/{}: already complete, skipped", dataset.name, family.tag());
                continue;
            }
            let started = Instant::now();
            let run = run_grid(&dataset, &split, family, &ctx.cfg)?;
            let secs = started.elapsed().as_secs_f64();
            info!(
                "{}/{}: mean acc {:.2}% with [{}] ({} configs, {} failed, {:.1}s)",
                run.dataset,
                run.family,
                run.mean_accuracy * 100.0,
                run.config.describe(),
                run.grid_size,
                run.failed_configs,
                secs
            );
            store::save_run(&ctx.out, &run, secs)?;
        }
    }
    Ok(())
}

pub fn load_all_results(out: &Path) -> Result<Vec<RunResult>> {
    let mut results = Vec::new();
    for (dataset, family) in store::stored_keys(out)? {
        results.push(store::load_run(out, &dataset, &family)?);
    }
    Ok(results)
}

pub fn cmd_evaluate(ctx: &Ctx) -> Result<()> {
    let results = load_all_results(&ctx.out)?;
    if results.is_empty() {
        warn!("no stored results under {}", ctx.out.display());
        return Ok(());
    }
    println!("{:<24} {:<12} {:>14} {:>8}", "dataset", "family", "acc (mean+-sd)", "config");
    for r in &results {
        println!(
            "{:<24} {:<12} {:>7.2}+-{:>5.2} {:>8}",
            r.dataset,
            r.family,
            r.mean_accuracy * 100.0,
            r.sd_accuracy * 100.0,
            r.config_index
        );
    }
    Ok(())
}

fn metafeatures_path(out: &Path) -> PathBuf {
    out.join("metafeatures.csv")
}

pub fn cmd_metafeatures(ctx: &Ctx) -> Result<()> {
    let names = resolve_datasets(ctx)?;
    let mut csv = String::from("dataset");
    for col in MetaFeatureVector::COLUMNS {
        csv.push_str(&format!(",{col}"));
    }
    csv.push('\n');
    for name in &names {
        let (dataset, _) = load_dataset(ctx, name)?;
        let seed = derive_seed(ctx.cfg.seed, &format!("meta/{name}"));
        let mf = compute_meta_features(&dataset, seed);
        csv.push_str(&dataset.name);
        for v in mf.to_vec() {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
        info!("{name}: meta-features computed");
    }
    fs::create_dir_all(&ctx.out)?;
    fs::write(metafeatures_path(&ctx.out), csv)?;
    Ok(())
}

pub fn read_metafeatures(out: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = metafeatures_path(out);
    let text = fs::read_to_string(&path)
        .with_context(|| format!("{} missing; run `tsfuse metafeatures` first", path.display()))?;
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let mut cols = line.split(',');
        names.push(cols.next().context("empty metafeature row")?.to_string());
        let row: Vec<f64> = cols.map(|c| c.parse::<f64>()).collect::<Result<_, _>>()?;
        // infinite separability sentinels would poison standardisation
        rows.push(row.into_iter().map(|v| if v.is_finite() { v } else { 0.0 }).collect());
    }
    Ok((names, rows))
}

fn regimes_path(out: &Path) -> PathBuf {
    out.join("regimes.json")
}

#[derive(serde::Serialize, serde::Deserialize)]
pub struct RegimeAssignment {
    pub k: usize,
    pub datasets: BTreeMap<String, usize>,
    pub silhouette: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub stability: Option<f64>,
}

pub fn cmd_cluster(ctx: &Ctx) -> Result<()> {
    let (names, rows) = read_metafeatures(&ctx.out)?;
    if names.len() < 2 {
        bail!("clustering needs at least 2 datasets, found {}", names.len());
    }
    let z = standardize_columns(&rows);
    let k = 6.min(names.len());
    let tree = ward_linkage(&z).map_err(anyhow::Error::from)?;
    let labels = tree.cut(k).map_err(anyhow::Error::from)?;
    let sil = silhouette(&z, &labels).ok();
    let dbi = davies_bouldin(&z, &labels).ok();
    let stability = if names.len() > k + 1 {
        bootstrap_stability(&z, &labels, k, 200, derive_seed(ctx.cfg.seed, "stability")).ok()
    } else {
        warn!("too few datasets for bootstrap stability, skipped");
        None
    };
    // self-agreement sanity: ARI of the labels with themselves is exactly 1
    debug_assert_eq!(adjusted_rand_index(&labels, &labels), 1.0);
    let assignment = RegimeAssignment {
        k,
        datasets: names.iter().cloned().zip(labels.iter().copied()).collect(),
        silhouette: sil,
        davies_bouldin: dbi,
        stability,
    };
    fs::write(
        regimes_path(&ctx.out),
        serde_json::to_string_pretty(&assignment)?,
    )?;
    info!(
        "clustered {} datasets into {k} regimes (silhouette {:?})",
        names.len(),
        sil
    );
    Ok(())
}

pub fn read_regimes(out: &Path) -> Result<RegimeAssignment> {
    let path = regimes_path(out);
    let text = fs::read_to_string(&path)
        .with_context(|| format!("{} missing; run `tsfuse cluster` first", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Deltas of the first non-baseline requested family against ROCKET solo.
fn comparison_family(ctx: &Ctx) -> ModelFamily {
    ctx.families
        .iter()
        .copied()
        .find(|f| *f != ModelFamily::SoloRocket)
        .unwrap_or(ModelFamily::F3)
}

pub fn cmd_compare(ctx: &Ctx) -> Result<()> {
    let results = load_all_results(&ctx.out)?;
    let family = comparison_family(ctx);
    let pairs = report::paired_deltas_pp(&results, family.tag(), report::BASELINE_FAMILY);
    if pairs.is_empty() {
        bail!(
            "no paired {}/{} results to compare",
            family.tag(),
            report::BASELINE_FAMILY
        );
    }
    let regimes = read_regimes(&ctx.out)
        .map(|r| r.datasets)
        .unwrap_or_else(|e| {
            warn!("{e:#}; treating all datasets as one regime");
            BTreeMap::new()
        });
    let deltas: Vec<f64> = pairs.iter().map(|(_, d, _)| *d).collect();
    let accs: Vec<f64> = pairs.iter().map(|(_, _, a)| *a).collect();
    let regime_ids: Vec<usize> = pairs
        .iter()
        .map(|(name, _, _)| regimes.get(name).copied().unwrap_or(0))
        .collect();
    let paired = PairedDeltas::new(deltas, accs, regime_ids).map_err(anyhow::Error::from)?;
    let comparison = paired_comparison_report(
        &paired,
        tsfuse_core::stats::N_BOOT,
        derive_seed(ctx.cfg.seed, "compare"),
    )
    .map_err(anyhow::Error::from)?;
    fs::write(
        ctx.out.join("comparison.json"),
        serde_json::to_string_pretty(&comparison)?,
    )?;
    report::emit_regime_table(&ctx.out, &comparison)?;
    info!(
        "overall HL {:.2}pp [{:.2}, {:.2}], P(d>0) {:.2}",
        comparison.overall.hl_median,
        comparison.overall.ci_lo,
        comparison.overall.ci_hi,
        comparison.overall.win_prob
    );
    Ok(())
}

pub fn cmd_attribute(ctx: &Ctx) -> Result<()> {
    let (names, rows) = read_metafeatures(&ctx.out)?;
    let results = load_all_results(&ctx.out)?;
    let family = comparison_family(ctx);
    let pairs = report::paired_deltas_pp(&results, family.tag(), report::BASELINE_FAMILY);
    let delta_by_name: BTreeMap<&str, f64> =
        pairs.iter().map(|(n, d, _)| (n.as_str(), *d)).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut used = Vec::new();
    for (name, row) in names.iter().zip(&rows) {
        if let Some(&d) = delta_by_name.get(name.as_str()) {
            x.push(row.clone());
            y.push(d);
            used.push(name.clone());
        }
    }
    if x.len() < 3 {
        bail!("attribution needs at least 3 paired datasets, found {}", x.len());
    }
    let (model, loo) = fit_surrogate(&x, &y).map_err(anyhow::Error::from)?;
    let shap = linear_shap(&model, &x);
    let mut csv = String::from("dataset");
    for col in MetaFeatureVector::COLUMNS {
        csv.push_str(&format!(",{col}"));
    }
    csv.push_str(",base,prediction\n");
    for (name, (row, phis)) in used.iter().zip(x.iter().zip(&shap.values)) {
        csv.push_str(name);
        for phi in phis {
            csv.push_str(&format!(",{phi}"));
        }
        csv.push_str(&format!(",{},{}\n", shap.base_value, model.predict_row(row)));
    }
    fs::write(ctx.out.join("shap.csv"), csv)?;
    let summary = shap_summary(&shap, &MetaFeatureVector::COLUMNS);
    let mut csv = String::from("feature,mean_abs_shap,sign\n");
    for (feature, magnitude, sign) in &summary {
        csv.push_str(&format!("{feature},{magnitude},{sign}\n"));
    }
    fs::write(ctx.out.join("shap_summary.csv"), csv)?;
    info!(
        "surrogate lambda {} (LOO MSE {:.4}); top feature: {}",
        model.lambda,
        loo,
        summary.first().map(|s| s.0.as_str()).unwrap_or("-")
    );
    Ok(())
}

const REP_LABELS: [&str; 3] = ["SAX", "SFA", "ROCKET"];

pub fn cmd_casestudy(ctx: &Ctx) -> Result<()> {
    let family = comparison_family(ctx);
    let dir = ctx.out.join("casestudy");
    fs::create_dir_all(&dir)?;
    let mut any = false;
    for (dataset, fam) in store::stored_keys(&ctx.out)? {
        if fam != family.tag() {
            continue;
        }
        if !store::is_complete(&ctx.out, &dataset, report::BASELINE_FAMILY) {
            warn!("{dataset}: no baseline predictions, case study skipped");
            continue;
        }
        let fusion = store::load_run(&ctx.out, &dataset, family.tag())?;
        let baseline = store::load_run(&ctx.out, &dataset, report::BASELINE_FAMILY)?;
        if fusion.predictions.len() != baseline.predictions.len() {
            warn!("{dataset}: prediction count mismatch, case study skipped");
            continue;
        }
        let labels: Vec<usize> = fusion.predictions.iter().map(|p| p.label).collect();
        let base_preds: Vec<usize> = baseline.predictions.iter().map(|p| p.prediction).collect();
        let fusion_preds: Vec<usize> = fusion.predictions.iter().map(|p| p.prediction).collect();
        let gates: Vec<Vec<f64>> = fusion.predictions.iter().map(|p| p.gates.clone()).collect();
        let statuses = classify_samples(&base_preds, &fusion_preds, &labels, &gates)
            .map_err(anyhow::Error::from)?;
        let [both_correct, rescued, hurt, both_wrong] = count_statuses(&statuses);
        let num_classes = labels.iter().max().map(|m| m + 1).unwrap_or(0);
        let delta = confusion_delta(&base_preds, &fusion_preds, &labels, num_classes)
            .map_err(anyhow::Error::from)?;
        let shift = gate_shift(&statuses);
        let profile = gate_bin_profile(&statuses, 5);

        let mut csv = String::from("index,label,baseline,fusion,status\n");
        for (p, s) in fusion.predictions.iter().zip(&statuses) {
            csv.push_str(&format!(
                "{},{},{},{},{:?}\n",
                p.index,
                p.label,
                base_preds[p.index],
                p.prediction,
                s.status
            ));
        }
        fs::write(dir.join(format!("{dataset}.statuses.csv")), csv)?;
        let mut csv = String::new();
        for row in &delta {
            csv.push_str(
                &row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            );
            csv.push('\n');
        }
        fs::write(dir.join(format!("{dataset}.confusion_delta.csv")), csv)?;
        let summary = serde_json::json!({
            "dataset": dataset,
            "both_correct": both_correct,
            "rescued": rescued,
            "hurt": hurt,
            "both_wrong": both_wrong,
            "gate_shift": shift,
            "gate_profile": profile,
        });
        fs::write(
            dir.join(format!("{dataset}.summary.json")),
            serde_json::to_string_pretty(&summary)?,
        )?;
        info!("{dataset}: rescued {rescued}, hurt {hurt}");
        any = true;
    }
    if !any {
        warn!("no (fusion, baseline) result pairs found; nothing to analyse");
    }
    Ok(())
}

pub fn cmd_report(ctx: &Ctx) -> Result<()> {
    let results = load_all_results(&ctx.out)?;
    report::emit_overall_table(&ctx.out, &results)?;
    report::emit_ablation_table(&ctx.out, &results)?;
    report::emit_per_dataset_table(&ctx.out, &results)?;
    let regimes = read_regimes(&ctx.out).map(|r| r.datasets).unwrap_or_default();
    report::emit_regime_family_table(&ctx.out, &results, &regimes)?;

    // regime heatmap: mean meta-feature per regime, plus mean gain
    let heatmap = match read_metafeatures(&ctx.out) {
        Ok((names, rows)) if !regimes.is_empty() => {
            let k = regimes.values().max().map(|m| m + 1).unwrap_or(0);
            let d = MetaFeatureVector::COLUMNS.len();
            let mut sums = vec![vec![0.0; k]; d];
            let mut counts = vec![0usize; k];
            for (name, row) in names.iter().zip(&rows) {
                if let Some(&r) = regimes.get(name) {
                    counts[r] += 1;
                    for (j, &v) in row.iter().enumerate() {
                        sums[j][r] += v;
                    }
                }
            }
            for col in &mut sums {
                for (r, v) in col.iter_mut().enumerate() {
                    if counts[r] > 0 {
                        *v /= counts[r] as f64;
                    }
                }
            }
            let row_labels: Vec<String> =
                MetaFeatureVector::COLUMNS.iter().map(|s| s.to_string()).collect();
            let col_labels: Vec<String> = (0..k).map(|r| format!("C{}", r + 1)).collect();
            Some(plots::heatmap_svg(&row_labels, &col_labels, &sums))
        }
        Ok(_) => None,
        Err(e) => {
            warn!("{e:#}");
            None
        }
    };
    plots::write_plot(&ctx.out, "regime_heatmap.svg", heatmap)?;

    // attribution bar chart
    let shap_plot = fs::read_to_string(ctx.out.join("shap_summary.csv"))
        .ok()
        .map(|text| {
            let rows: Vec<(String, f64, f64)> = text
                .lines()
                .skip(1)
                .filter_map(|line| {
                    let cols: Vec<&str> = line.split(',').collect();
                    Some((
                        cols.first()?.to_string(),
                        cols.get(1)?.parse().ok()?,
                        cols.get(2)?.parse().ok()?,
                    ))
                })
                .collect();
            plots::bar_chart_svg(&rows)
        });
    plots::write_plot(&ctx.out, "shap_summary.svg", shap_plot)?;

    // gain distribution box plots per regime
    let family = comparison_family(ctx);
    let pairs = report::paired_deltas_pp(&results, family.tag(), report::BASELINE_FAMILY);
    let box_plot = if pairs.is_empty() {
        None
    } else {
        let k = regimes.values().max().map(|m| m + 1).unwrap_or(0).max(1);
        let mut groups: Vec<(String, Vec<f64>)> = (0..k)
            .map(|r| (format!("C{}", r + 1), Vec::new()))
            .collect();
        for (name, delta, _) in &pairs {
            let r = regimes.get(name).copied().unwrap_or(0);
            groups[r].1.push(*delta);
        }
        groups.retain(|(_, v)| !v.is_empty());
        Some(plots::box_plot_svg(&groups))
    };
    plots::write_plot(&ctx.out, "gain_boxplot.svg", box_plot)?;

    // gate-profile grid per case-study dataset
    let cs_dir = ctx.out.join("casestudy");
    if cs_dir.exists() {
        for entry in fs::read_dir(&cs_dir)? {
            let path = entry?.path();
            let Some(name) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".summary.json"))
            else {
                continue;
            };
            let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path)?)?;
            let profiles: Option<Vec<Vec<(f64, f64)>>> =
                serde_json::from_value(summary["gate_profile"].clone()).ok();
            let svg = profiles.filter(|p| !p.is_empty()).map(|p| {
                let labels: Vec<String> = REP_LABELS
                    .iter()
                    .take(p.len())
                    .map(|s| s.to_string())
                    .collect();
                plots::gate_profile_svg(&labels, &p)
            });
            plots::write_plot(&ctx.out, &format!("gate_profile_{name}.svg"), svg)?;
        }
    }
    Ok(())
}

pub fn cmd_all(ctx: &Ctx) -> Result<()> {
    cmd_ingest(ctx)?;
    cmd_train(ctx)?;
    cmd_metafeatures(ctx)?;
    match cmd_cluster(ctx) {
        Ok(()) => {}
        Err(e) => warn!("clustering skipped: {e:#}"),
    }
    match cmd_compare(ctx) {
        Ok(()) => {}
        Err(e) => warn!("comparison skipped: {e:#}"),
    }
    match cmd_attribute(ctx) {
        Ok(()) => {}
        Err(e) => warn!("attribution skipped: {e:#}"),
    }
    cmd_casestudy(ctx)?;
    cmd_report(ctx)?;
    Ok(())
}
