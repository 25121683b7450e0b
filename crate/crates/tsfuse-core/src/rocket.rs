//! Random convolutional kernel transform with max and PPV pooling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::CoreError;
use crate::features::FeatureMatrix;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct RocketKernel {
    /// Mean-centred weights, length in {7, 9, 11}.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub dilation: usize,
    pub padding: bool,
}

impl RocketKernel {
    /// Effective receptive field: `(len - 1) * dilation + 1`.
    pub fn span(&self) -> usize {
        (self.weights.len() - 1) * self.dilation + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RocketConfig {
    pub n_kernels: usize,
    pub seed: u64,
}

impl RocketConfig {
    pub fn new(n_kernels: usize, seed: u64) -> Self {
        Self { n_kernels, seed }
    }
}

const KERNEL_LENGTHS: [usize; 3] = [7, 9, 11];

/// Sample the kernel bank. Lengths uniform over {7,9,11}; weights i.i.d.
/// standard normal then mean-centred; bias uniform on [-1,1]; dilation
/// `floor(2^x)` with `x` uniform on `[0, log2((L-1)/(len-1))]` so the dilated
/// span always fits; padding on/off with probability 1/2. Single-threaded and
/// fully deterministic under the seed.
pub fn generate_kernels(cfg: &RocketConfig, series_len: usize) -> Vec<RocketKernel> {
    assert!(series_len >= 9, "series too short for ROCKET kernels");
    let mut rng = rng_from_seed(cfg.seed);
    (0..cfg.n_kernels)
        .map(|_| {
            let len = KERNEL_LENGTHS[rng.gen_range(0..KERNEL_LENGTHS.len())];
            let mut weights: Vec<f64> = (0..len)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mean = weights.iter().sum::<f64>() / len as f64;
            for w in &mut weights {
                *w -= mean;
            }
            let bias = rng.gen_range(-1.0..=1.0);
            let max_exp = (((series_len - 1) as f64) / ((len - 1) as f64)).log2();
            let x = rng.gen_range(0.0..=max_exp.max(0.0));
            let dilation = (2f64.powf(x).floor() as usize).max(1);
            let padding = rng.gen_bool(0.5);
            RocketKernel {
                weights,
                bias,
                dilation,
                padding,
            }
        })
        .collect()
}

/// Dilated convolution plus bias at every valid position; returns the maximum
/// response and the fraction of positions with response strictly above zero.
/// Padding zero-extends the series by `(len-1)*dilation/2` on each side.
pub fn apply_kernel(x: &[f64], kernel: &RocketKernel) -> Result<(f64, f64), CoreError> {
    let len = kernel.weights.len();
    let reach = (len - 1) * kernel.dilation;
    let pad = if kernel.padding { reach / 2 } else { 0 };
    let virtual_len = x.len() + 2 * pad;
    if virtual_len <= reach {
        return Err(CoreError::Config(format!(
            "kernel span {} exceeds padded series length {virtual_len}",
            reach + 1
        )));
    }
    let positions = virtual_len - reach;
    let mut max = f64::NEG_INFINITY;
    let mut positive = 0usize;
    for start in 0..positions {
        let mut acc = kernel.bias;
        for (j, &w) in kernel.weights.iter().enumerate() {
            let idx = start + j * kernel.dilation;
            // idx is an index into the zero-padded series
            if idx >= pad && idx - pad < x.len() {
                acc += w * x[idx - pad];
            }
        }
        if acc > max {
            max = acc;
        }
        if acc > 0.0 {
            positive += 1;
        }
    }
    Ok((max, positive as f64 / positions as f64))
}

/// N x (2 * n_kernels) raw feature matrix with columns ordered
/// `[max_1, ppv_1, max_2, ppv_2, ...]`. Kernel application is parallel over
/// samples; rows are assembled in input order regardless of scheduling.
/// Per-feature standardisation (frozen from the training fold) is applied
/// downstream via [`FeatureMatrix::column_stats`] / `standardize_with`.
pub fn rocket_feature_matrix(
    dataset: &LabeledDataset,
    cfg: &RocketConfig,
) -> Result<FeatureMatrix, CoreError> {
    let kernels = generate_kernels(cfg, dataset.series_len());
    let rows: Result<Vec<Vec<f64>>, CoreError> = dataset
        .series
        .par_iter()
        .map(|ts| {
            let mut row = Vec::with_capacity(2 * kernels.len());
            for kernel in &kernels {
                let (max, ppv) = apply_kernel(&ts.values, kernel)?;
                row.push(max);
                row.push(ppv);
            }
            Ok(row)
        })
        .collect();
    Ok(FeatureMatrix::from_rows(
        rows?,
        format!("rocket(n={},seed={})", cfg.n_kernels, cfg.seed),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TimeSeries;
    use approx::assert_abs_diff_eq;

    /// Brute-force oracle: explicit zero-padded buffer and position enumeration.
    pub fn apply_kernel_oracle(x: &[f64], kernel: &RocketKernel) -> (f64, f64) {
        let len = kernel.weights.len();
        let reach = (len - 1) * kernel.dilation;
        let pad = if kernel.padding { reach / 2 } else { 0 };
        let mut buf = vec![0.0; x.len() + 2 * pad];
        buf[pad..pad + x.len()].copy_from_slice(x);
        let positions = buf.len() - reach;
        // bias-first accumulation mirrors apply_kernel so equality is exact
        let responses: Vec<f64> = (0..positions)
            .map(|s| {
                kernel
                    .weights
                    .iter()
                    .enumerate()
                    .fold(kernel.bias, |acc, (j, &w)| {
                        acc + w * buf[s + j * kernel.dilation]
                    })
            })
            .collect();
        let max = responses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ppv = responses.iter().filter(|&&r| r > 0.0).count() as f64 / positions as f64;
        (max, ppv)
    }

    fn toy_dataset(n: usize, len: usize) -> LabeledDataset {
        LabeledDataset {
            name: "toy".into(),
            series: (0..n)
                .map(|i| TimeSeries {
                    values: (0..len).map(|t| ((t + i) as f64 * 0.3).sin()).collect(),
                })
                .collect(),
            labels: (0..n).map(|i| i % 2).collect(),
            num_classes: 2,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = RocketConfig::new(100, 42);
        assert_eq!(generate_kernels(&cfg, 150), generate_kernels(&cfg, 150));
    }

    #[test]
    fn weights_are_mean_centered() {
        for kernel in generate_kernels(&RocketConfig::new(200, 1), 100) {
            assert!(kernel.weights.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn dilations_respect_span_bound() {
        let series_len = 120;
        for kernel in generate_kernels(&RocketConfig::new(500, 9), series_len) {
            assert!((kernel.weights.len() - 1) * kernel.dilation <= series_len - 1);
        }
    }

    #[test]
    fn zero_input_pools_bias() {
        let kernel = RocketKernel {
            weights: vec![1.0, -2.0, 1.0],
            bias: 0.5,
            dilation: 1,
            padding: false,
        };
        let (max, ppv) = apply_kernel(&[0.0; 20], &kernel).unwrap();
        assert_abs_diff_eq!(max, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ppv, 1.0, epsilon = 1e-12);
        let negative = RocketKernel {
            bias: -0.5,
            ..kernel
        };
        let (max, ppv) = apply_kernel(&[0.0; 20], &negative).unwrap();
        assert_abs_diff_eq!(max, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ppv, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_convolution() {
        let kernel = RocketKernel {
            weights: vec![1.0, -1.0],
            bias: 0.0,
            dilation: 1,
            padding: false,
        };
        let (max, ppv) = apply_kernel(&[1.0, 2.0, 3.0, 4.0], &kernel).unwrap();
        assert_abs_diff_eq!(max, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ppv, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn positive_scaling_preserves_ppv() {
        let mut kernel = generate_kernels(&RocketConfig::new(1, 7), 60).pop().unwrap();
        let x: Vec<f64> = (0..60).map(|t| (t as f64 * 0.4).cos()).collect();
        let (max1, ppv1) = apply_kernel(&x, &kernel).unwrap();
        for w in &mut kernel.weights {
            *w *= 2.0;
        }
        kernel.bias *= 2.0;
        let (max2, ppv2) = apply_kernel(&x, &kernel).unwrap();
        assert_abs_diff_eq!(max2, 2.0 * max1, epsilon = 1e-9);
        assert_abs_diff_eq!(ppv2, ppv1, epsilon = 1e-12);
    }

    #[test]
    fn matches_bruteforce_oracle() {
        let mut rng = crate::rng::rng_from_seed(99);
        for trial in 0..200 {
            let len = 30 + (trial % 50);
            let x: Vec<f64> = (0..len)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let kernel = generate_kernels(&RocketConfig::new(1, trial as u64), len)
                .pop()
                .unwrap();
            let (max, ppv) = apply_kernel(&x, &kernel).unwrap();
            let (omax, oppv) = apply_kernel_oracle(&x, &kernel);
            assert_eq!(max, omax);
            assert_eq!(ppv, oppv);
        }
    }

    #[test]
    fn matrix_shape_and_determinism() {
        let d = toy_dataset(5, 64);
        let cfg = RocketConfig::new(50, 42);
        let a = rocket_feature_matrix(&d, &cfg).unwrap();
        let b = rocket_feature_matrix(&d, &cfg).unwrap();
        assert_eq!(a.n_cols, 100);
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn ppv_columns_in_unit_interval() {
        let d = toy_dataset(4, 80);
        let m = rocket_feature_matrix(&d, &RocketConfig::new(64, 3)).unwrap();
        for i in 0..m.n_rows {
            for c in (1..m.n_cols).step_by(2) {
                let v = m.row(i)[c];
                assert!((0.0..=1.0).contains(&v), "ppv {v} out of range");
            }
        }
    }

    #[test]
    fn identical_series_identical_rows() {
        let mut d = toy_dataset(2, 64);
        d.series[1] = d.series[0].clone();
        let m = rocket_feature_matrix(&d, &RocketConfig::new(32, 5)).unwrap();
        assert_eq!(m.row(0), m.row(1));
    }
}
