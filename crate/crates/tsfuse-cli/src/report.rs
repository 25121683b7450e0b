//! Table emission: CSV files with full precision plus plain-text renders with
//! percentages at two decimals.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Result;
use log::warn;

use tsfuse_core::stats::{bayes_win_prob, hl_median, win_loss_tie, PairedComparisonReport, TIE_TOL};

use crate::experiment::RunResult;

pub const BASELINE_FAMILY: &str = "solo_ROCKET";

pub fn report_dir(out: &Path) -> std::path::PathBuf {
    out.join("report")
}

/// Paired percentage-point deltas (family minus baseline) over datasets that
/// have results for both.
pub fn paired_deltas_pp(
    results: &[RunResult],
    family: &str,
    baseline: &str,
) -> Vec<(String, f64, f64)> {
    let by_key: BTreeMap<(&str, &str), &RunResult> = results
        .iter()
        .map(|r| ((r.dataset.as_str(), r.family.as_str()), r))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        if r.family != family {
            continue;
        }
        if let Some(base) = by_key.get(&(r.dataset.as_str(), baseline)) {
            rows.push((
                r.dataset.clone(),
                (r.mean_accuracy - base.mean_accuracy) * 100.0,
                base.mean_accuracy * 100.0,
            ));
        }
    }
    rows
}

fn write_pair(dir: &Path, stem: &str, csv: String, txt: String) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.csv")), csv)?;
    fs::write(dir.join(format!("{stem}.txt")), txt)?;
    Ok(())
}

/// Overall results table: per family, mean accuracy and win/loss/tie against
/// the ROCKET-solo baseline.
pub fn emit_overall_table(out: &Path, results: &[RunResult]) -> Result<()> {
    let mut csv = String::from("family,n_datasets,mean_acc,mean_sd,wins,losses,ties,win_rate,p_win\n");
    let mut txt = String::from(format!(
        "{:<12} {:>4} {:>14} {:>11} {:>9} {:>7}\n",
        "family", "N", "acc (mean+-sd)", "w/l/t", "win-rate", "P(win)"
    ));
    if results.is_empty() {
        warn!("no results; overall table is header-only");
    }
    let mut families: Vec<&str> = results.iter().map(|r| r.family.as_str()).collect();
    families.sort_unstable();
    families.dedup();
    for family in families {
        let rows: Vec<&RunResult> = results.iter().filter(|r| r.family == family).collect();
        let n = rows.len();
        let mean = rows.iter().map(|r| r.mean_accuracy).sum::<f64>() / n as f64;
        let sd = rows.iter().map(|r| r.sd_accuracy).sum::<f64>() / n as f64;
        let deltas: Vec<f64> = paired_deltas_pp(results, family, BASELINE_FAMILY)
            .iter()
            .map(|(_, d, _)| *d)
            .collect();
        let (w, l, t) = win_loss_tie(&deltas, TIE_TOL);
        let (rate, p_win) = if w + l > 0 {
            (w as f64 / (w + l) as f64, bayes_win_prob(w, l).0)
        } else {
            (f64::NAN, f64::NAN)
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            family, n, mean, sd, w, l, t, rate, p_win
        ));
        txt.push_str(&format!(
            "{:<12} {:>4} {:>7.2}+-{:>5.2} {:>9} {:>8.2}% {:>6.2}\n",
            family,
            n,
            mean * 100.0,
            sd * 100.0,
            format!("{w}/{l}/{t}"),
            rate * 100.0,
            p_win
        ));
    }
    write_pair(&report_dir(out), "table_overall", csv, txt)
}

/// Per-regime paired statistics table (comparison report shape).
pub fn emit_regime_table(out: &Path, report: &PairedComparisonReport) -> Result<()> {
    let mut csv = String::from(
        "label,n,hl_median_pp,ci_lo,ci_hi,p_raw,p_holm,p_win,p_win_lo,p_win_hi,rope_p_better,wins,losses,ties\n",
    );
    let mut txt = format!(
        "{:<10} {:>4} {:>8} {:>16} {:>8} {:>8} {:>7} {:>7} {:>9}\n",
        "regime", "N", "HL(pp)", "95% CI", "p", "p_holm", "P(d>0)", "ROPE", "w/l/t"
    );
    for row in report.regimes.iter().chain(std::iter::once(&report.overall)) {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.label,
            row.n,
            row.hl_median,
            row.ci_lo,
            row.ci_hi,
            row.p_raw,
            row.p_holm,
            row.win_prob,
            row.win_prob_lo,
            row.win_prob_hi,
            row.rope_p_better,
            row.wins,
            row.losses,
            row.ties
        ));
        txt.push_str(&format!(
            "{:<10} {:>4} {:>8.2} [{:>5.2},{:>5.2}] {:>8.4} {:>8.4} {:>7.2} {:>7.2} {:>9}\n",
            row.label,
            row.n,
            row.hl_median,
            row.ci_lo,
            row.ci_hi,
            row.p_raw,
            row.p_holm,
            row.win_prob,
            row.rope_p_better,
            format!("{}/{}/{}", row.wins, row.losses, row.ties)
        ));
    }
    write_pair(&report_dir(out), "table_regimes", csv, txt)
}

/// Ablation table: each family's HL-median gain over the baseline.
pub fn emit_ablation_table(out: &Path, results: &[RunResult]) -> Result<()> {
    let mut csv = String::from("family,n_pairs,hl_median_delta_pp,mean_acc\n");
    let mut txt = format!(
        "{:<12} {:>7} {:>9} {:>9}\n",
        "family", "N pairs", "HL (pp)", "acc"
    );
    let mut families: Vec<&str> = results.iter().map(|r| r.family.as_str()).collect();
    families.sort_unstable();
    families.dedup();
    for family in families {
        if family == BASELINE_FAMILY {
            continue;
        }
        let pairs = paired_deltas_pp(results, family, BASELINE_FAMILY);
        if pairs.is_empty() {
            warn!("{family}: no paired baseline results, skipped in ablation table");
            continue;
        }
        let deltas: Vec<f64> = pairs.iter().map(|(_, d, _)| *d).collect();
        let hl = hl_median(&deltas);
        let rows: Vec<&RunResult> = results.iter().filter(|r| r.family == family).collect();
        let mean = rows.iter().map(|r| r.mean_accuracy).sum::<f64>() / rows.len() as f64;
        csv.push_str(&format!("{},{},{},{}\n", family, pairs.len(), hl, mean));
        txt.push_str(&format!(
            "{:<12} {:>7} {:>9.2} {:>8.2}%\n",
            family,
            pairs.len(),
            hl,
            mean * 100.0
        ));
    }
    write_pair(&report_dir(out), "table_ablation", csv, txt)
}

/// Mean accuracy by (regime, family).
pub fn emit_regime_family_table(
    out: &Path,
    results: &[RunResult],
    regimes: &BTreeMap<String, usize>,
) -> Result<()> {
    let mut families: Vec<&str> = results.iter().map(|r| r.family.as_str()).collect();
    families.sort_unstable();
    families.dedup();
    let n_regimes = regimes.values().max().map(|m| m + 1).unwrap_or(0);
    let mut csv = String::from("regime,family,n,mean_acc,sd_acc\n");
    let mut txt = format!("{:<8} {:<12} {:>4} {:>14}\n", "regime", "family", "N", "acc");
    for regime in 0..n_regimes {
        for family in &families {
            let rows: Vec<&RunResult> = results
                .iter()
                .filter(|r| {
                    r.family == *family && regimes.get(&r.dataset).copied() == Some(regime)
                })
                .collect();
            if rows.is_empty() {
                continue;
            }
            let accs: Vec<f64> = rows.iter().map(|r| r.mean_accuracy).collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let sd =
                (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64).sqrt();
            csv.push_str(&format!("{},{},{},{},{}\n", regime, family, rows.len(), mean, sd));
            txt.push_str(&format!(
                "{:<8} {:<12} {:>4} {:>7.2}+-{:>5.2}\n",
                regime,
                family,
                rows.len(),
                mean * 100.0,
                sd * 100.0
            ));
        }
    }
    write_pair(&report_dir(out), "table_regime_family", csv, txt)
}

/// Per-dataset accuracies, one row per dataset, one column per family.
pub fn emit_per_dataset_table(out: &Path, results: &[RunResult]) -> Result<()> {
    let mut families: Vec<String> = results.iter().map(|r| r.family.clone()).collect();
    families.sort_unstable();
    families.dedup();
    let mut datasets: Vec<String> = results.iter().map(|r| r.dataset.clone()).collect();
    datasets.sort_unstable();
    datasets.dedup();
    let by_key: BTreeMap<(&str, &str), f64> = results
        .iter()
        .map(|r| ((r.dataset.as_str(), r.family.as_str()), r.mean_accuracy))
        .collect();
    let mut csv = String::from("dataset");
    for f in &families {
        csv.push_str(&format!(",{f}"));
    }
    csv.push('\n');
    let mut txt = format!("{:<24}", "dataset");
    for f in &families {
        txt.push_str(&format!(" {f:>12}"));
    }
    txt.push('\n');
    for d in &datasets {
        csv.push_str(d);
        txt.push_str(&format!("{d:<24}"));
        for f in &families {
            match by_key.get(&(d.as_str(), f.as_str())) {
                Some(acc) => {
                    csv.push_str(&format!(",{acc}"));
                    txt.push_str(&format!(" {:>11.2}%", acc * 100.0));
                }
                None => {
                    csv.push(',');
                    txt.push_str(&format!(" {:>12}", "-"));
                }
            }
        }
        csv.push('\n');
        txt.push('\n');
    }
    write_pair(&report_dir(out), "table_per_dataset", csv, txt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::GridPoint;

    fn run(ds: &str, family: &str, mean: f64) -> RunResult {
        RunResult {
            dataset: ds.into(),
            family: family.into(),
            config_index: 0,
            config: GridPoint {
                sax: None,
                sfa: None,
                rocket_kernels: Some(1500),
                embed_dim: 64,
                hidden_dim: 64,
            },
            fold_accuracies: vec![mean; 5],
            mean_accuracy: mean,
            sd_accuracy: 0.0,
            predictions: Vec::new(),
            grid_size: 8,
            failed_configs: 0,
        }
    }

    #[test]
    fn paired_deltas_arithmetic_contract() {
        let results = vec![
            run("a", "F3", 0.9),
            run("a", "solo_ROCKET", 0.8),
            run("b", "F3", 0.7),
            run("b", "solo_ROCKET", 0.75),
            run("c", "F3", 0.5), // no baseline pair
        ];
        let pairs = paired_deltas_pp(&results, "F3", "solo_ROCKET");
        assert_eq!(pairs.len(), 2);
        assert!((pairs[0].1 - 10.0).abs() < 1e-9);
        assert!((pairs[1].1 + 5.0).abs() < 1e-9);
        assert!((pairs[0].2 - 80.0).abs() < 1e-9);
    }

    #[test]
    fn empty_results_emit_header_only() {
        let dir = tempfile::tempdir().unwrap();
        emit_overall_table(dir.path(), &[]).unwrap();
        let text = fs::read_to_string(report_dir(dir.path()).join("table_overall.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("family,"));
    }

    #[test]
    fn tables_render() {
        let dir = tempfile::tempdir().unwrap();
        let results = vec![
            run("a", "F3", 0.9),
            run("a", "solo_ROCKET", 0.8),
            run("b", "F3", 0.6),
            run("b", "solo_ROCKET", 0.65),
        ];
        emit_overall_table(dir.path(), &results).unwrap();
        emit_ablation_table(dir.path(), &results).unwrap();
        emit_per_dataset_table(dir.path(), &results).unwrap();
        let mut regimes = BTreeMap::new();
        regimes.insert("a".to_string(), 0usize);
        regimes.insert("b".to_string(), 1usize);
        emit_regime_family_table(dir.path(), &results, &regimes).unwrap();
        for stem in [
            "table_overall",
            "table_ablation",
            "table_per_dataset",
            "table_regime_family",
        ] {
            assert!(report_dir(dir.path()).join(format!("{stem}.csv")).exists());
            assert!(report_dir(dir.path()).join(format!("{stem}.txt")).exists());
        }
    }
}
