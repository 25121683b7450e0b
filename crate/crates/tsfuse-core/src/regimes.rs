//! Regime discovery: Ward agglomerative clustering on standardised
//! meta-feature vectors, flat cuts, internal quality indices and a bootstrap
//! stability score.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::rng::{derive_seed, rng_from_seed};

/// A single agglomeration step. Cluster ids follow the scipy convention:
/// leaves are `0..n`, the cluster formed at merge step `s` gets id `n + s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Full dendrogram: `n - 1` merge steps with nondecreasing heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageTree {
    pub n_leaves: usize,
    pub merges: Vec<MergeStep>,
}

/// Column-standardise with the sample standard deviation; constant columns
/// become all zeros with a warning.
pub fn standardize_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    assert!(!rows.is_empty());
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut out = rows.to_vec();
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let sd = var.sqrt();
        if sd < 1e-12 {
            warn!("column {j} is constant, standardised to zeros");
            for row in &mut out {
                row[j] = 0.0;
            }
        } else {
            for row in &mut out {
                row[j] = (row[j] - mean) / sd;
            }
        }
    }
    out
}

fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Ward linkage via the Lance-Williams recurrence on squared Euclidean
/// distances. Heights follow the scipy convention: the merge height is the
/// square root of the Ward cost, so for two singletons it equals their
/// Euclidean distance. Ties are broken by the lexicographically smallest
/// `(id_a, id_b)` pair with `id_a < id_b`.
pub fn ward_linkage(rows: &[Vec<f64>]) -> Result<LinkageTree, CoreError> {
    let n = rows.len();
    if n < 2 {
        return Err(CoreError::Param("ward_linkage needs at least 2 points".into()));
    }
    // active cluster set keyed by id; squared Ward distances between actives
    let mut active: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; 2 * n - 1];
    let mut dist: std::collections::HashMap<(usize, usize), f64> = std::collections::HashMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            dist.insert((i, j), sq_euclidean(&rows[i], &rows[j]));
        }
    }
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        // pick the minimal pair; ties resolve to the lowest (a, b)
        let mut best: Option<(f64, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let (a, b) = key(a, b);
                let d = dist[&(a, b)];
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => d < bd || (d == bd && (a, b) < (ba, bb)),
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (d2, a, b) = best.unwrap();
        let new_id = n + step;
        let (sa, sb) = (sizes[a] as f64, sizes[b] as f64);
        sizes[new_id] = sizes[a] + sizes[b];
        merges.push(MergeStep {
            left: a,
            right: b,
            height: d2.max(0.0).sqrt(),
            size: sizes[new_id],
        });
        // Lance-Williams update for Ward: d(new, k) from d(a,k), d(b,k), d(a,b)
        active.retain(|&c| c != a && c != b);
        for &k in &active {
            let sk = sizes[k] as f64;
            let total = sa + sb + sk;
            let dak = dist[&key(a, k)];
            let dbk = dist[&key(b, k)];
            let updated = ((sa + sk) * dak + (sb + sk) * dbk - sk * d2) / total;
            dist.insert(key(new_id, k), updated);
        }
        active.push(new_id);
    }
    Ok(LinkageTree { n_leaves: n, merges })
}

impl LinkageTree {
    /// Flat cluster assignment with exactly `k` clusters: replay the first
    /// `n - k` merges. Labels are renumbered contiguously by first occurrence.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>, CoreError> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(CoreError::Param(format!("cannot cut {n} leaves into {k} clusters")));
        }
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (step, m) in self.merges.iter().take(n - k).enumerate() {
            let new_id = n + step;
            let ra = find(&mut parent, m.left);
            let rb = find(&mut parent, m.right);
            parent[ra] = new_id;
            parent[rb] = new_id;
        }
        let mut remap = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(n);
        for leaf in 0..n {
            let root = find(&mut parent, leaf);
            let next = remap.len();
            labels.push(*remap.entry(root).or_insert(next));
        }
        Ok(labels)
    }
}

/// Mean silhouette coefficient under Euclidean distance. Requires at least 2
/// non-empty clusters; singleton points contribute 0.
pub fn silhouette(rows: &[Vec<f64>], labels: &[usize]) -> Result<f64, CoreError> {
    let n = rows.len();
    let k = labels.iter().max().map(|m| m + 1).unwrap_or(0);
    if k < 2 {
        return Err(CoreError::Param("silhouette needs at least 2 clusters".into()));
    }
    let counts = count_labels(labels, k);
    let mut total = 0.0;
    for i in 0..n {
        if counts[labels[i]] == 1 {
            continue; // s(i) = 0 for singletons
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += sq_euclidean(&rows[i], &rows[j]).sqrt();
            }
        }
        let a = sums[labels[i]] / (counts[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b).max(1e-300);
    }
    Ok(total / n as f64)
}

/// Davies-Bouldin index (lower is better). Requires at least 2 clusters.
pub fn davies_bouldin(rows: &[Vec<f64>], labels: &[usize]) -> Result<f64, CoreError> {
    let k = labels.iter().max().map(|m| m + 1).unwrap_or(0);
    if k < 2 {
        return Err(CoreError::Param("davies_bouldin needs at least 2 clusters".into()));
    }
    let d = rows[0].len();
    let counts = count_labels(labels, k);
    let mut centroids = vec![vec![0.0; d]; k];
    for (row, &l) in rows.iter().zip(labels) {
        for (c, v) in centroids[l].iter_mut().zip(row) {
            *c += v;
        }
    }
    for (cen, &cnt) in centroids.iter_mut().zip(&counts) {
        for v in cen.iter_mut() {
            *v /= cnt.max(1) as f64;
        }
    }
    let mut scatter = vec![0.0; k];
    for (row, &l) in rows.iter().zip(labels) {
        scatter[l] += sq_euclidean(row, &centroids[l]).sqrt();
    }
    for (s, &cnt) in scatter.iter_mut().zip(&counts) {
        *s /= cnt.max(1) as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i != j {
                let sep = sq_euclidean(&centroids[i], &centroids[j]).sqrt();
                worst = worst.max((scatter[i] + scatter[j]) / sep.max(1e-300));
            }
        }
        total += worst;
    }
    Ok(total / k as f64)
}

fn count_labels(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map(|m| m + 1).unwrap_or(0);
    let kb = b.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let choose2 = |m: usize| (m * m.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = (0..ka)
        .map(|i| choose2(table[i].iter().sum::<usize>()))
        .sum();
    let sum_b: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|r| r[j]).sum::<usize>()))
        .sum();
    let total = choose2(n);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-300 {
        return 1.0; // both labelings degenerate
    }
    (sum_ij - expected) / (max_index - expected)
}

/// Bootstrap stability of a `k`-cut: resample rows with replacement, recluster
/// the resample, and score agreement with the reference labels by the ARI over
/// the overlap (distinct sampled indices). Returns the mean ARI over
/// `n_iterations` resamples, each seeded independently from `seed`.
pub fn bootstrap_stability(
    rows: &[Vec<f64>],
    reference: &[usize],
    k: usize,
    n_iterations: usize,
    seed: u64,
) -> Result<f64, CoreError> {
    let n = rows.len();
    if n < k + 1 {
        return Err(CoreError::Param("too few points for bootstrap stability".into()));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for it in 0..n_iterations {
        let mut rng = rng_from_seed(derive_seed(seed, &format!("stability/{it}")));
        let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut distinct: Vec<usize> = {
            let mut s = sample.clone();
            s.sort_unstable();
            s.dedup();
            s
        };
        if distinct.len() < k + 1 {
            warn!("stability resample {it} has too few distinct points, skipped");
            continue;
        }
        distinct.sort_unstable();
        let sub: Vec<Vec<f64>> = distinct.iter().map(|&i| rows[i].clone()).collect();
        let tree = ward_linkage(&sub)?;
        let labels = tree.cut(k)?;
        let ref_labels: Vec<usize> = distinct.iter().map(|&i| reference[i]).collect();
        total += adjusted_rand_index(&labels, &ref_labels);
        used += 1;
    }
    if used == 0 {
        return Err(CoreError::Run("all stability resamples degenerate".into()));
    }
    Ok(total / used as f64)
}
