//! Shared per-sample feature matrix produced by the extractors.

use serde::{Deserialize, Serialize};

/// Row-major matrix of per-sample feature vectors with provenance metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
    /// Which extractor and configuration produced the matrix, e.g. `"sax(w=6,frame=15,a=4)"`.
    pub source: String,
}

impl FeatureMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize, source: impl Into<String>) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
            source: source.into(),
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, source: impl Into<String>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        debug_assert!(rows.iter().all(|r| r.len() == n_cols));
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            data.extend(row);
        }
        Self {
            n_rows,
            n_cols,
            data,
            source: source.into(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Scale each row to unit L2 norm; all-zero rows are left untouched.
    pub fn l2_normalize_rows(&mut self) {
        for i in 0..self.n_rows {
            let row = self.row_mut(i);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
        }
    }

    /// Column means and standard deviations over the given row subset.
    ///
    /// Used to freeze training-fold standardisation statistics. Columns with
    /// zero variance get sigma 1 so standardisation maps them to 0.
    pub fn column_stats(&self, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; self.n_cols];
        for &i in rows {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut sigmas = vec![0.0; self.n_cols];
        for &i in rows {
            for (s, (v, m)) in sigmas.iter_mut().zip(self.row(i).iter().zip(&means)) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut sigmas {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        (means, sigmas)
    }

    /// Standardise every row in place with frozen statistics.
    pub fn standardize_with(&mut self, means: &[f64], sigmas: &[f64]) {
        for i in 0..self.n_rows {
            for (v, (m, s)) in self.row_mut(i).iter_mut().zip(means.iter().zip(sigmas)) {
                *v = (*v - m) / s;
            }
        }
    }
}
