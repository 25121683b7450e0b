//! On-disk results store: one CSV pair per (dataset, family) plus a JSON
//! manifest carrying configs, checksums and timings. The CSVs are written
//! with shortest-roundtrip float formatting, so identical runs produce
//! byte-identical files; the manifest additionally records wall time, which
//! is the one deliberately non-deterministic field.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiment::{GridPoint, RunResult, SamplePrediction};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub config_index: usize,
    pub config: GridPoint,
    pub grid_size: usize,
    pub failed_configs: usize,
    pub sha256_results: String,
    pub sha256_predictions: String,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
}

pub fn results_dir(out: &Path) -> PathBuf {
    out.join("results")
}

fn manifest_path(out: &Path) -> PathBuf {
    results_dir(out).join("manifest.json")
}

fn csv_paths(out: &Path, dataset: &str, family: &str) -> (PathBuf, PathBuf) {
    let stem = format!("{dataset}__{family}");
    (
        results_dir(out).join(format!("{stem}.csv")),
        results_dir(out).join(format!("{stem}.preds.csv")),
    )
}

pub fn load_manifest(out: &Path) -> Result<Manifest> {
    let path = manifest_path(out);
    if !path.exists() {
        return Ok(Manifest::default());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn save_manifest(out: &Path, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(results_dir(out))?;
    fs::write(
        manifest_path(out),
        serde_json::to_string_pretty(manifest)?,
    )?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn render_results_csv(run: &RunResult) -> String {
    let mut s = String::from("dataset,family,config_index,fold,accuracy\n");
    for (fold, acc) in run.fold_accuracies.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            run.dataset, run.family, run.config_index, fold, acc
        ));
    }
    s
}

fn render_preds_csv(run: &RunResult) -> String {
    let mut s = String::from("index,fold,label,prediction,gates\n");
    for p in &run.predictions {
        let gates = p
            .gates
            .iter()
            .map(|g| g.to_string())
            .collect::<Vec<_>>()
            .join(";");
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            p.index, p.fold, p.label, p.prediction, gates
        ));
    }
    s
}

pub fn save_run(out: &Path, run: &RunResult, wall_time_secs: f64) -> Result<()> {
    fs::create_dir_all(results_dir(out))?;
    let (res_path, preds_path) = csv_paths(out, &run.dataset, &run.family);
    let res = render_results_csv(run);
    let preds = render_preds_csv(run);
    fs::write(&res_path, &res)?;
    fs::write(&preds_path, &preds)?;
    let mut manifest = load_manifest(out)?;
    manifest.entries.insert(
        format!("{}/{}", run.dataset, run.family),
        ManifestEntry {
            config_index: run.config_index,
            config: run.config.clone(),
            grid_size: run.grid_size,
            failed_configs: run.failed_configs,
            sha256_results: sha256_hex(res.as_bytes()),
            sha256_predictions: sha256_hex(preds.as_bytes()),
            wall_time_secs,
        },
    );
    save_manifest(out, &manifest)
}

/// True when the stored cell exists and its checksums verify. A tampered or
/// partial cell is reported (with a warning) as incomplete so it gets
/// recomputed.
pub fn is_complete(out: &Path, dataset: &str, family: &str) -> bool {
    let manifest = match load_manifest(out) {
        Ok(m) => m,
        Err(e) => {
            warn!("unreadable manifest: {e}");
            return false;
        }
    };
    let Some(entry) = manifest.entries.get(&format!("{dataset}/{family}")) else {
        return false;
    };
    let (res_path, preds_path) = csv_paths(out, dataset, family);
    for (path, expected) in [
        (&res_path, &entry.sha256_results),
        (&preds_path, &entry.sha256_predictions),
    ] {
        match fs::read(path) {
            Ok(bytes) => {
                if &sha256_hex(&bytes) != expected {
                    warn!("{}: checksum mismatch, recomputing", path.display());
                    return false;
                }
            }
            Err(_) => {
                warn!("{}: missing result file, recomputing", path.display());
                return false;
            }
        }
    }
    true
}

/// Reconstruct a RunResult from the store.
pub fn load_run(out: &Path, dataset: &str, family: &str) -> Result<RunResult> {
    let manifest = load_manifest(out)?;
    let entry = manifest
        .entries
        .get(&format!("{dataset}/{family}"))
        .with_context(|| format!("no stored run for {dataset}/{family}"))?;
    let (res_path, preds_path) = csv_paths(out, dataset, family);
    let mut fold_accuracies = Vec::new();
    for (ln, line) in fs::read_to_string(&res_path)?.lines().skip(1).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            bail!("{}:{}: malformed row", res_path.display(), ln + 2);
        }
        fold_accuracies.push(cols[4].parse::<f64>()?);
    }
    let mut predictions = Vec::new();
    for (ln, line) in fs::read_to_string(&preds_path)?.lines().skip(1).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            bail!("{}:{}: malformed row", preds_path.display(), ln + 2);
        }
        let gates = cols[4]
            .split(';')
            .map(|g| g.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()?;
        predictions.push(SamplePrediction {
            index: cols[0].parse()?,
            fold: cols[1].parse()?,
            label: cols[2].parse()?,
            prediction: cols[3].parse()?,
            gates,
        });
    }
    let n = fold_accuracies.len() as f64;
    let mean = fold_accuracies.iter().sum::<f64>() / n;
    let sd = (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RunResult {
        dataset: dataset.to_string(),
        family: family.to_string(),
        config_index: entry.config_index,
        config: entry.config.clone(),
        fold_accuracies,
        mean_accuracy: mean,
        sd_accuracy: sd,
        predictions,
        grid_size: entry.grid_size,
        failed_configs: entry.failed_configs,
    })
}

/// All (dataset, family) keys present in the store.
pub fn stored_keys(out: &Path) -> Result<Vec<(String, String)>> {
    Ok(load_manifest(out)?
        .entries
        .keys()
        .filter_map(|k| {
            k.split_once('/')
                .map(|(d, f)| (d.to_string(), f.to_string()))
        })
        .collect())
}
