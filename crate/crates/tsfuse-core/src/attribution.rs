//! Linear surrogate explaining per-dataset fusion gains from meta-features:
//! closed-form ridge with leave-one-out lambda selection and exact Shapley
//! attributions (exact for linear models, verifiable by coalition
//! enumeration).

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Fixed log grid searched by leave-one-out CV.
pub const LAMBDA_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

/// Ridge regression fitted on standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    /// Coefficients in standardised feature space.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
}

impl SurrogateModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .zip(self.feature_means.iter().zip(&self.feature_stds))
                .map(|((&x, &w), (&m, &s))| w * (x - m) / s)
                .sum::<f64>()
    }
}

/// Per-row, per-feature Shapley attributions with the shared base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapTable {
    pub base_value: f64,
    /// `values[i][j]` attributes feature `j` on row `i`.
    pub values: Vec<Vec<f64>>,
}

fn column_moments(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = x[0].len();
    let n = x.len() as f64;
    let mut means = vec![0.0; d];
    for row in x {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; d];
    for row in x {
        for j in 0..d {
            stds[j] += (row[j] - means[j]).powi(2);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0; // constant feature: standardised column is all zero
        }
    }
    (means, stds)
}

/// Solve the symmetric positive-definite system `a x = b` by Gaussian
/// elimination with partial pivoting; `a` is row-major d x d.
fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>, CoreError> {
    let d = b.len();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&p, &q| a[p * d + col].abs().partial_cmp(&a[q * d + col].abs()).unwrap())
            .unwrap();
        if a[pivot * d + col].abs() < 1e-300 {
            return Err(CoreError::Data("singular ridge system".into()));
        }
        if pivot != col {
            for k in 0..d {
                a.swap(col * d + k, pivot * d + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..d {
            let f = a[row * d + col] / a[col * d + col];
            for k in col..d {
                a[row * d + k] -= f * a[col * d + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let mut acc = b[row];
        for k in row + 1..d {
            acc -= a[row * d + k] * x[k];
        }
        x[row] = acc / a[row * d + row];
    }
    Ok(x)
}

fn validate(x: &[Vec<f64>], y: &[f64]) -> Result<(), CoreError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(CoreError::Data("mismatched surrogate design".into()));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(CoreError::Data("ragged feature table".into()));
    }
    if x.iter().flatten().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(CoreError::Data("non-finite value in surrogate inputs".into()));
    }
    Ok(())
}

/// Ridge with a caller-chosen penalty. The intercept is unpenalised and the
/// penalty applies in standardised feature space.
pub fn fit_surrogate_with_lambda(
    x: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
) -> Result<SurrogateModel, CoreError> {
    validate(x, y)?;
    if lambda < 0.0 {
        return Err(CoreError::Param("ridge penalty must be nonnegative".into()));
    }
    let (means, stds) = column_moments(x);
    let d = x[0].len();
    let n = x.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| (v - means[j]) / stds[j])
                .collect()
        })
        .collect();
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    for (row, &yi) in z.iter().zip(y) {
        for j in 0..d {
            rhs[j] += row[j] * (yi - y_mean);
            for k in j..d {
                gram[j * d + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            gram[j * d + k] = gram[k * d + j];
        }
        gram[j * d + j] += lambda;
    }
    let coefficients = solve_linear(gram, rhs)?;
    Ok(SurrogateModel {
        coefficients,
        intercept: y_mean,
        lambda,
        feature_means: means,
        feature_stds: stds,
    })
}

/// Exact leave-one-out mean squared error via the hat-matrix shortcut
/// `e_i = r_i / (1 - h_ii)` with `h_ii = 1/n + z_i' (Z'Z + lambda I)^{-1} z_i`.
pub fn loo_mse(x: &[Vec<f64>], y: &[f64], model: &SurrogateModel) -> Result<f64, CoreError> {
    let d = x[0].len();
    let n = x.len();
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| (v - model.feature_means[j]) / model.feature_stds[j])
                .collect()
        })
        .collect();
    let mut gram = vec![0.0; d * d];
    for row in &z {
        for j in 0..d {
            for k in 0..d {
                gram[j * d + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..d {
        gram[j * d + j] += model.lambda;
    }
    // invert by solving against the identity columns
    let mut inv = vec![0.0; d * d];
    for col in 0..d {
        let mut e = vec![0.0; d];
        e[col] = 1.0;
        let sol = solve_linear(gram.clone(), e)?;
        for row in 0..d {
            inv[row * d + col] = sol[row];
        }
    }
    let mut total = 0.0;
    for (row, &yi) in z.iter().zip(y) {
        let pred = model.intercept
            + row
                .iter()
                .zip(&model.coefficients)
                .map(|(&a, &b)| a * b)
                .sum::<f64>();
        let mut quad = 0.0;
        for j in 0..d {
            for k in 0..d {
                quad += row[j] * inv[j * d + k] * row[k];
            }
        }
        let h = 1.0 / n as f64 + quad;
        let e = (yi - pred) / (1.0 - h);
        total += e * e;
    }
    Ok(total / n as f64)
}

/// Fit with the penalty chosen by leave-one-out CV over [`LAMBDA_GRID`]
/// (ties keep the smaller penalty). Returns the model and its LOO MSE.
pub fn fit_surrogate(x: &[Vec<f64>], y: &[f64]) -> Result<(SurrogateModel, f64), CoreError> {
    validate(x, y)?;
    let mut best: Option<(SurrogateModel, f64)> = None;
    for &lambda in &LAMBDA_GRID {
        let model = fit_surrogate_with_lambda(x, y, lambda)?;
        let mse = loo_mse(x, y, &model)?;
        if best.as_ref().map_or(true, |(_, b)| mse < *b) {
            best = Some((model, mse));
        }
    }
    Ok(best.unwrap())
}

/// Exact Shapley attributions of a linear model:
/// `phi_ij = w_j (x_ij - mean_j) / std_j` with the model's stored
/// standardisation, so `base + sum_j phi_ij` equals the prediction exactly.
pub fn linear_shap(model: &SurrogateModel, table: &[Vec<f64>]) -> ShapTable {
    let values = table
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| {
                    model.coefficients[j] * (v - model.feature_means[j]) / model.feature_stds[j]
                })
                .collect()
        })
        .collect();
    ShapTable {
        base_value: model.intercept,
        values,
    }
}

/// Global ranking: features sorted by mean |phi| descending, with the sign of
/// the mean attribution. All-zero attributions give an empty ranking.
pub fn shap_summary(table: &ShapTable, names: &[&str]) -> Vec<(String, f64, f64)> {
    if table.values.is_empty() {
        return Vec::new();
    }
    let d = table.values[0].len();
    assert_eq!(names.len(), d);
    let n = table.values.len() as f64;
    let mut rows: Vec<(String, f64, f64)> = (0..d)
        .map(|j| {
            let mean_abs = table.values.iter().map(|r| r[j].abs()).sum::<f64>() / n;
            let mean = table.values.iter().map(|r| r[j]).sum::<f64>() / n;
            (names[j].to_string(), mean_abs, mean.signum())
        })
        .collect();
    if rows.iter().all(|(_, m, _)| *m == 0.0) {
        warn!("all attributions are zero, empty ranking");
        return Vec::new();
    }
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    rows
}
