//! Acceptance gate: one test per criterion, each printing a single
//! `ACCEPTANCE <id> <name>: PASS|SKIP` line (a failing assertion marks FAIL).
//!
//! Criteria 1-10 are self-contained property/oracle checks. Criteria 11-12
//! need real archive datasets under `$TSFUSE_DATA` and report SKIP when the
//! data is absent. Criterion 13 is reported, never gated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use tsfuse_core::data::{load_ucr_text, write_ucr_text, LabeledDataset, TimeSeries};
use tsfuse_core::fusion::{FusionConfig, GatedFusionModel};
use tsfuse_core::meta::{
    dtw_separability, effective_budget, imbalance_index, kruskal_wallis, permutation_entropy,
    turning_points, DtwDomain,
};
use tsfuse_core::rng::rng_from_seed;
use tsfuse_core::rocket::{apply_kernel, generate_kernels, RocketConfig, RocketKernel};
use tsfuse_core::sax::{sax_transform, SaxConfig};
use tsfuse_core::sfa::{fit_mcb, truncated_dft};
use tsfuse_core::stats::{bayes_win_prob, hl_median, holm_adjust, rope_analysis, wilcoxon_signed_rank};

fn pass(id: &str, name: &str) {
    println!("ACCEPTANCE {id} {name}: PASS");
}

fn skip(id: &str, name: &str, why: &str) {
    println!("ACCEPTANCE {id} {name}: SKIP ({why})");
}

// ---------------------------------------------------------------- criterion 1

fn brute_hl(deltas: &[f64]) -> f64 {
    let mut walsh = Vec::new();
    for i in 0..deltas.len() {
        for j in i..deltas.len() {
            walsh.push((deltas[i] + deltas[j]) / 2.0);
        }
    }
    walsh.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = walsh.len();
    if m % 2 == 1 {
        walsh[m / 2]
    } else {
        (walsh[m / 2 - 1] + walsh[m / 2]) / 2.0
    }
}

/// Exact two-sided p from full sign-pattern enumeration (tie-free input).
fn brute_wilcoxon_p(deltas: &[f64]) -> f64 {
    let n = deltas.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| deltas[a].abs().partial_cmp(&deltas[b].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    for (r, &idx) in order.iter().enumerate() {
        ranks[idx] = (r + 1) as f64;
    }
    let w_plus: f64 = deltas
        .iter()
        .zip(&ranks)
        .filter(|(&d, _)| d > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let total = (n * (n + 1) / 2) as f64;
    let w = w_plus.min(total - w_plus);
    let mut below = 0usize;
    for mask in 0u32..(1 << n) {
        let s: f64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if s <= w {
            below += 1;
        }
    }
    (2.0 * below as f64 / (1u64 << n) as f64).min(1.0)
}

#[test]
fn criterion_01_statistics_oracles() {
    let started = Instant::now();
    let mut rng = rng_from_seed(101);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=30);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        assert_eq!(hl_median(&v), brute_hl(&v), "hl_median disagrees with brute force");
    }
    for n in 2..=15 {
        for _ in 0..20 {
            // distinct magnitudes, none zero, so ranks are unambiguous
            let mut v: Vec<f64> = (0..n)
                .map(|i| (i as f64 + 1.0 + rng.gen_range(0.0..0.5)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            v.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
            let (_, p) = wilcoxon_signed_rank(&v);
            let p_oracle = brute_wilcoxon_p(&v);
            assert!((p - p_oracle).abs() < 1e-12, "n={n}: p {p} vs oracle {p_oracle}");
        }
    }
    // published critical value: n=10, W=8 -> p = 0.048828
    let fixture = [-1.0, 2.0, -3.0, -4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
    let (w, p) = wilcoxon_signed_rank(&fixture);
    assert_eq!(w, 8.0);
    assert!((p - 0.048828).abs() < 1e-6, "p = {p}");
    // Holm step-down on three hand-computed vectors
    let cases: [(&[f64], &[f64]); 3] = [
        (&[0.01, 0.04, 0.03], &[0.03, 0.06, 0.06]),
        (&[0.2, 0.01], &[0.2, 0.02]),
        (&[0.6, 0.7], &[1.0, 1.0]),
    ];
    for (input, expected) in cases {
        let adj = holm_adjust(input);
        for (a, e) in adj.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "holm({input:?}) = {adj:?}");
        }
    }
    assert!(started.elapsed().as_secs() < 60, "criterion 1 exceeded 1 minute");
    pass("01", "statistics-oracles");
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_02_bayes_win_prob() {
    let (p, _) = bayes_win_prob(80, 12);
    assert!((p - 80.5 / 93.0).abs() < 1e-12, "not the Beta(w+1/2, l+1/2) mean");
    assert!((p - 0.8656).abs() < 5e-3);
    assert_eq!(format!("{p:.2}"), "0.87");
    pass("02", "bayes-win-prob");
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_03_rope_thresholds() {
    let r = rope_analysis(&[0.0, 0.0, 0.0], &[90.0, 99.9, 20.0], 0.03).unwrap();
    assert!((r.thresholds[0] - 0.30).abs() < 1e-12);
    assert_eq!(r.thresholds[1], 0.10, "lower clamp");
    assert_eq!(r.thresholds[2], 2.0, "upper clamp");
    pass("03", "rope-thresholds");
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_04_gradient_check() {
    let started = Instant::now();
    for seed in 0..10u64 {
        let cfg = FusionConfig {
            embed_dim: 4,
            hidden_dim: 4,
            seed,
            ..FusionConfig::default()
        };
        let dims = vec![6usize, 5, 4];
        let mut model = GatedFusionModel::new(dims.clone(), 3, &cfg);
        let mut rng = rng_from_seed(seed ^ 0xF00D);
        let raw: Vec<(Vec<Vec<f64>>, usize)> = (0..6)
            .map(|_| {
                (
                    dims.iter()
                        .map(|&d| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                        .collect(),
                    rng.gen_range(0..3),
                )
            })
            .collect();
        let batch: Vec<(Vec<&[f64]>, usize)> = raw
            .iter()
            .map(|(blocks, label)| (blocks.iter().map(|b| b.as_slice()).collect(), *label))
            .collect();
        let max_rel = model.analytic_gradient_check(&batch).unwrap();
        assert!(max_rel < 1e-4, "seed {seed}: max relative error {max_rel}");
    }
    assert!(started.elapsed().as_secs() < 60, "criterion 4 exceeded 1 minute");
    pass("04", "gradient-check");
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_05_gate_contract() {
    let variants: Vec<Vec<usize>> = vec![vec![9, 7, 5], vec![9, 5], vec![7, 5], vec![9], vec![5]];
    let per_variant = 10_000 / variants.len();
    let mut rng = rng_from_seed(505);
    for dims in &variants {
        let cfg = FusionConfig {
            embed_dim: 6,
            hidden_dim: 6,
            seed: 7,
            ..FusionConfig::default()
        };
        let model = GatedFusionModel::new(dims.clone(), 3, &cfg);
        for _ in 0..per_variant {
            let blocks: Vec<Vec<f64>> = dims
                .iter()
                .map(|&d| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect();
            let features: Vec<&[f64]> = blocks.iter().map(|b| b.as_slice()).collect();
            let (_, gates) = model.predict(&features).unwrap();
            assert_eq!(gates.len(), dims.len());
            let sum: f64 = gates.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "gate sum {sum}");
            for &g in &gates {
                assert!((0.0..=1.0).contains(&g), "gate {g} out of range");
            }
            if dims.len() == 1 {
                assert!((gates[0] - 1.0).abs() < 1e-6, "solo gate {}", gates[0]);
            }
        }
    }
    pass("05", "gate-contract");
}

// ---------------------------------------------------------------- criterion 6

/// Explicit zero-padded-buffer convolution, summed in the same bias-first
/// order as `apply_kernel` so equality is exact.
fn kernel_oracle(x: &[f64], kernel: &RocketKernel) -> (f64, f64) {
    let len = kernel.weights.len();
    let reach = (len - 1) * kernel.dilation;
    let pad = if kernel.padding { reach / 2 } else { 0 };
    let mut buf = vec![0.0; x.len() + 2 * pad];
    buf[pad..pad + x.len()].copy_from_slice(x);
    let positions = buf.len() - reach;
    let mut max = f64::NEG_INFINITY;
    let mut positive = 0usize;
    for start in 0..positions {
        let mut acc = kernel.bias;
        for (j, &w) in kernel.weights.iter().enumerate() {
            acc += w * buf[start + j * kernel.dilation];
        }
        if acc > max {
            max = acc;
        }
        if acc > 0.0 {
            positive += 1;
        }
    }
    (max, positive as f64 / positions as f64)
}

#[test]
fn criterion_06_representation_oracles() {
    let mut rng = rng_from_seed(606);
    // 1000 random (series, kernel) pairs, exact equality
    let mut pairs = 0;
    while pairs < 1000 {
        let series_len = rng.gen_range(30..200);
        let x: Vec<f64> = (0..series_len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bank_seed: u64 = rng.gen();
        for kernel in generate_kernels(&RocketConfig::new(5, bank_seed), series_len) {
            let got = apply_kernel(&x, &kernel).unwrap();
            assert_eq!(got, kernel_oracle(&x, &kernel), "kernel response mismatch");
            pairs += 1;
        }
    }
    // truncated DFT vs closed-form sinusoid coefficients
    let n = 64usize;
    for k0 in 1..=4usize {
        let cos_x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * (k0 * t) as f64 / n as f64).cos())
            .collect();
        let sin_x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * (k0 * t) as f64 / n as f64).sin())
            .collect();
        let w = 10usize; // coefficients c1..c5 interleaved
        let c = truncated_dft(&cos_x, w);
        let s = truncated_dft(&sin_x, w);
        for k in 1..=w / 2 {
            let (re_c, im_c) = (c[2 * (k - 1)], c[2 * (k - 1) + 1]);
            let (re_s, im_s) = (s[2 * (k - 1)], s[2 * (k - 1) + 1]);
            let half = n as f64 / 2.0;
            let (exp_re_c, exp_im_s) = if k == k0 { (half, -half) } else { (0.0, 0.0) };
            assert!((re_c - exp_re_c).abs() < 1e-9, "cos Re(c{k})");
            assert!(im_c.abs() < 1e-9, "cos Im(c{k})");
            assert!(re_s.abs() < 1e-9, "sin Re(c{k})");
            assert!((im_s - exp_im_s).abs() < 1e-9, "sin Im(c{k})");
        }
    }
    // SAX affine invariance on 100 random non-constant series
    let cfg = SaxConfig::new(6, 10);
    for _ in 0..100 {
        let x: Vec<f64> = (0..150).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = x.iter().map(|&v| 2.0 * v + 3.0).collect();
        let a = sax_transform(&TimeSeries { values: x }, &cfg).unwrap();
        let b = sax_transform(&TimeSeries { values: shifted }, &cfg).unwrap();
        assert_eq!(a, b, "SAX is not affine invariant");
    }
    // MCB equi-depth breakpoints on 1e5 N(0,1) samples vs Gaussian quantiles
    use rand_distr::StandardNormal;
    let samples: Vec<Vec<f64>> = (0..100_000)
        .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
        .collect();
    let bins = fit_mcb(&samples, 4).unwrap();
    let expected = [-0.6744897501960817, 0.0, 0.6744897501960817];
    for (b, e) in bins.breakpoints[0].iter().zip(expected) {
        assert!((b - e).abs() < 0.02, "MCB breakpoint {b} vs {e}");
    }
    pass("06", "representation-oracles");
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_07_meta_feature_oracles() {
    let monotone: Vec<f64> = (0..200).map(|t| t as f64).collect();
    assert_eq!(permutation_entropy(&monotone), 0.0);
    let mut rng = rng_from_seed(707);
    let noise: Vec<f64> = (0..2_000_000).map(|_| rng.gen_range(0.0..1.0)).collect();
    let h = permutation_entropy(&noise);
    assert!((h - 6f64.ln()).abs() < 1e-3, "iid permutation entropy {h}");

    let alternating: Vec<f64> = (0..10).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert_eq!(turning_points(&alternating), 0.8);

    let h = kruskal_wallis(&[1.0, 2.0, 3.0, 10.0, 11.0, 12.0], &[0, 0, 0, 1, 1, 1], 2);
    assert!((h - 3.857).abs() < 1e-3, "Kruskal-Wallis H = {h}");

    assert_eq!(effective_budget(80, 300), 80);
    assert_eq!(effective_budget(80, 600), 50);

    // random labels destroy class structure: separability ~ 1
    let series: Vec<TimeSeries> = (0..60)
        .map(|_| TimeSeries {
            values: (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect();
    let labels: Vec<usize> = (0..60).map(|_| rng.gen_range(0..2)).collect();
    let dataset = LabeledDataset {
        name: "random".into(),
        series,
        labels,
        num_classes: 2,
    };
    let sep = dtw_separability(&dataset, DtwDomain::Time, 80, 7);
    assert!((sep - 1.0).abs() < 0.15, "random-label separability {sep}");
    pass("07", "meta-feature-oracles");
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_08_clustering_sanity() {
    use tsfuse_core::regimes::{adjusted_rand_index, ward_linkage};
    let mut rng = rng_from_seed(808);
    // two 6-sigma-separated blobs (unit noise, means 12 apart)
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for c in 0..2usize {
        for _ in 0..20 {
            rows.push(vec![
                c as f64 * 12.0 + rng.gen_range(-1.0..1.0),
                c as f64 * 12.0 + rng.gen_range(-1.0..1.0),
            ]);
            truth.push(c);
        }
    }
    let tree = ward_linkage(&rows).unwrap();
    let labels = tree.cut(2).unwrap();
    assert_eq!(adjusted_rand_index(&labels, &truth), 1.0, "blobs not recovered");
    assert_eq!(adjusted_rand_index(&truth, &truth), 1.0);

    // cut(k) refines cut(k-1) on 100 random datasets
    for _ in 0..100 {
        let n = rng.gen_range(4..20);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let tree = ward_linkage(&pts).unwrap();
        for k in 2..=n {
            let coarse = tree.cut(k - 1).unwrap();
            let fine = tree.cut(k).unwrap();
            // refinement: every fine cluster maps into exactly one coarse cluster
            let mut map: BTreeMap<usize, usize> = BTreeMap::new();
            for (f, c) in fine.iter().zip(&coarse) {
                match map.get(f) {
                    Some(&prev) => assert_eq!(prev, *c, "cut({k}) does not refine cut({})", k - 1),
                    None => {
                        map.insert(*f, *c);
                    }
                }
            }
        }
    }
    pass("08", "clustering-sanity");
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_09_shap_exactness() {
    use tsfuse_core::attribution::{fit_surrogate, linear_shap};
    let d = 13usize;
    let mut rng = rng_from_seed(909);
    let x: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|row| row.iter().enumerate().map(|(j, v)| (j as f64 - 6.0) * v).sum::<f64>() + rng.gen_range(-0.1..0.1))
        .collect();
    let (model, _) = fit_surrogate(&x, &y).unwrap();
    let shap = linear_shap(&model, &x);

    let mut factorial = vec![1.0f64; d + 1];
    for i in 1..=d {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    // standardized effect of feature j for a row; absent features sit at mean
    let effect = |row: &[f64], j: usize| -> f64 {
        model.coefficients[j] * (row[j] - model.feature_means[j]) / model.feature_stds[j]
    };
    for (row, phis) in x.iter().take(20).zip(&shap.values) {
        for j in 0..d {
            // brute-force Shapley over all 2^13 coalitions
            let mut phi = 0.0;
            for mask in 0u32..(1 << d) {
                if mask & (1 << j) != 0 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let weight = factorial[s] * factorial[d - s - 1] / factorial[d];
                // marginal contribution of j is its own effect (linear model)
                phi += weight * effect(row, j);
            }
            assert!((phi - phis[j]).abs() < 1e-9, "phi[{j}] {} vs {phi}", phis[j]);
        }
        let total: f64 = shap.base_value + phis.iter().sum::<f64>();
        let pred = model.predict_row(row);
        assert!((total - pred).abs() < 1e-9, "local accuracy violated");
    }
    pass("09", "shap-exactness");
}

// --------------------------------------------------------------- criterion 10

fn synth_dataset(name: &str, freqs: &[f64], n_per: usize, length: usize, seed: u64) -> LabeledDataset {
    let mut rng = rng_from_seed(seed);
    let mut series = Vec::new();
    let mut labels = Vec::new();
    for (c, &f) in freqs.iter().enumerate() {
        for _ in 0..n_per {
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            series.push(TimeSeries {
                values: (0..length)
                    .map(|t| {
                        (std::f64::consts::TAU * f * t as f64 + phase).sin()
                            + 0.4 * rng.gen_range(-1.0..1.0)
                    })
                    .collect(),
            });
            labels.push(c);
        }
    }
    LabeledDataset {
        name: name.into(),
        series,
        labels,
        num_classes: freqs.len(),
    }
}

fn write_synth_root(root: &Path) {
    let specs: [(&str, Vec<f64>); 3] = [
        ("AlphaWave", vec![0.03, 0.12]),
        ("BetaWave", vec![0.05, 0.20]),
        ("GammaWave", vec![0.02, 0.10, 0.25]),
    ];
    for (i, (name, freqs)) in specs.iter().enumerate() {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let train = synth_dataset(name, freqs, 10, 128, 1000 + i as u64);
        let test = synth_dataset(name, freqs, 5, 128, 2000 + i as u64);
        write_ucr_text(&train, &dir.join(format!("{name}_TRAIN.tsv"))).unwrap();
        write_ucr_text(&test, &dir.join(format!("{name}_TEST.tsv"))).unwrap();
    }
}

fn run_tsfuse(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_tsfuse"))
        .args(args)
        .env("RUST_LOG", "warn")
        .status()
        .expect("failed to launch tsfuse");
    assert!(status.success(), "tsfuse {args:?} failed");
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth_root(&data);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        run_tsfuse(&[
            "all",
            "--data-root",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid",
            "reduced",
            "--family",
            "f3,solo-rocket",
            "--seed",
            "42",
        ]);
    }
    let mut compared = 0;
    for entry in std::fs::read_dir(out_a.join("results")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let name = path.file_name().unwrap();
        let a = std::fs::read(&path).unwrap();
        let b = std::fs::read(out_b.join("results").join(name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between identical runs");
        compared += 1;
    }
    assert_eq!(compared, 12, "expected 6 result + 6 prediction CSVs");
    pass("10", "end-to-end-determinism");
}

// ------------------------------------------------------- criteria 11-13: data

fn data_root() -> Option<PathBuf> {
    std::env::var_os("TSFUSE_DATA")
        .map(PathBuf::from)
        .filter(|p| p.is_dir())
}

fn find_train(root: &Path, name: &str) -> Option<PathBuf> {
    for ext in ["tsv", "txt", "csv"] {
        for dir in [root.join(name), root.to_path_buf()] {
            let p = dir.join(format!("{name}_TRAIN.{ext}"));
            if p.exists() {
                return Some(p);
            }
        }
    }
    None
}

fn load_merged(root: &Path, name: &str) -> LabeledDataset {
    let train = load_ucr_text(&find_train(root, name).unwrap()).unwrap();
    let test_path = find_train(root, name)
        .unwrap()
        .to_str()
        .unwrap()
        .replace("_TRAIN", "_TEST");
    match load_ucr_text(Path::new(&test_path)) {
        Ok(test) => {
            let mut series = train.series.clone();
            series.extend(test.series);
            let mut labels = train.labels.clone();
            labels.extend(test.labels);
            LabeledDataset {
                name: train.name,
                series,
                labels,
                num_classes: train.num_classes,
            }
        }
        Err(_) => train,
    }
}

fn read_mean_accuracy(out: &Path, dataset: &str, family: &str) -> f64 {
    let text =
        std::fs::read_to_string(out.join("results").join(format!("{dataset}__{family}.csv")))
            .unwrap();
    let accs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    accs.iter().sum::<f64>() / accs.len() as f64
}

fn read_predictions(out: &Path, dataset: &str, family: &str) -> Vec<(usize, usize)> {
    let text = std::fs::read_to_string(
        out.join("results").join(format!("{dataset}__{family}.preds.csv")),
    )
    .unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[2].parse().unwrap(), cols[3].parse().unwrap())
        })
        .collect()
}

const SMALL_CANDIDATES: [&str; 10] = [
    "GunPoint",
    "Coffee",
    "ItalyPowerDemand",
    "Beef",
    "OliveOil",
    "Plane",
    "Wine",
    "ECG200",
    "ArrowHead",
    "SonyAIBORobotSurface1",
];

#[test]
fn criterion_11_desk_scale_pipeline() {
    let Some(root) = data_root() else {
        skip("11", "desk-scale-pipeline", "set TSFUSE_DATA to an archive directory");
        return;
    };
    let available: Vec<&str> = SMALL_CANDIDATES
        .iter()
        .copied()
        .filter(|n| find_train(&root, n).is_some())
        .take(5)
        .collect();
    if available.len() < 5 {
        skip("11", "desk-scale-pipeline", "fewer than 5 of the small candidate datasets present");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let started = Instant::now();
    run_tsfuse(&[
        "train",
        "--data-root",
        root.to_str().unwrap(),
        "--datasets",
        &available.join(","),
        "--family",
        "f3,solo-rocket",
        "--grid",
        "reduced",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 1800, "pipeline took {elapsed:?} (> 30 min)");
    for name in &available {
        let acc = read_mean_accuracy(tmp.path(), name, "solo_ROCKET");
        let majority = imbalance_index(&load_merged(&root, name));
        assert!(
            acc > majority,
            "{name}: ROCKET accuracy {acc:.4} does not beat majority baseline {majority:.4}"
        );
    }
    pass("11", "desk-scale-pipeline");
}

#[test]
fn criterion_12_case_study_direction() {
    let Some(root) = data_root() else {
        skip("12", "case-study-direction", "set TSFUSE_DATA to an archive directory");
        return;
    };
    if find_train(&root, "Beef").is_none() || find_train(&root, "OliveOil").is_none() {
        skip("12", "case-study-direction", "Beef and OliveOil not present");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    run_tsfuse(&[
        "train",
        "--data-root",
        root.to_str().unwrap(),
        "--datasets",
        "Beef,OliveOil",
        "--family",
        "f3,solo-rocket",
        "--grid",
        "reduced",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let mut any_rescued_ge_hurt = false;
    for name in ["Beef", "OliveOil"] {
        let delta_pp = (read_mean_accuracy(tmp.path(), name, "F3")
            - read_mean_accuracy(tmp.path(), name, "solo_ROCKET"))
            * 100.0;
        assert!(delta_pp >= -1.0, "{name}: F3 - ROCKET = {delta_pp:.2}pp < -1.0");
        let base = read_predictions(tmp.path(), name, "solo_ROCKET");
        let fused = read_predictions(tmp.path(), name, "F3");
        let mut rescued = 0;
        let mut hurt = 0;
        for ((label, b), (_, f)) in base.iter().zip(&fused) {
            match (b == label, f == label) {
                (false, true) => rescued += 1,
                (true, false) => hurt += 1,
                _ => {}
            }
        }
        if rescued >= hurt {
            any_rescued_ge_hurt = true;
        }
        println!("  {name}: delta {delta_pp:.2}pp, rescued {rescued}, hurt {hurt}");
    }
    assert!(any_rescued_ge_hurt, "fusion hurt more than it rescued on both case studies");
    pass("12", "case-study-direction");
}

#[test]
fn criterion_13_attribution_direction_reported() {
    // Reported only, never gated: needs a >= 30-dataset run. Point TSFUSE_OUT
    // at a completed output directory to have the signs reported here.
    let Some(out) = std::env::var_os("TSFUSE_OUT").map(PathBuf::from) else {
        skip("13", "attribution-direction", "reported only; set TSFUSE_OUT to a >=30-dataset run");
        return;
    };
    let meta = out.join("metafeatures.csv");
    let summary = out.join("shap_summary.csv");
    let n_datasets = std::fs::read_to_string(&meta)
        .map(|t| t.lines().count().saturating_sub(1))
        .unwrap_or(0);
    if n_datasets < 30 || !summary.exists() {
        skip("13", "attribution-direction", "run has fewer than 30 datasets; reported, not gated");
        return;
    }
    let text = std::fs::read_to_string(&summary).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0] == "ts_length" || cols[0] == "turning_points" {
            let sign: f64 = cols[2].parse().unwrap();
            let expected = if cols[0] == "ts_length" { "positive" } else { "negative" };
            println!("  {}: mean SHAP sign {sign} (expected {expected})", cols[0]);
        }
    }
    pass("13", "attribution-direction");
}
