//! Sample-level mechanism analysis: per-sample rescued/hurt status against a
//! baseline model, confusion-matrix deltas and gating-weight shifts.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    BothCorrect,
    /// Baseline wrong, fusion correct.
    Rescued,
    /// Baseline correct, fusion wrong.
    Hurt,
    BothWrong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStatus {
    pub status: Status,
    pub baseline_pred: usize,
    pub fusion_pred: usize,
    pub label: usize,
    /// Fusion gate vector for this sample (one weight per representation).
    pub gates: Vec<f64>,
}

/// Per-representation change in mean gate: rescued minus both-correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateShift {
    pub shifts: Vec<f64>,
    pub n_rescued: usize,
    pub n_both_correct: usize,
}

/// Tag every test sample with its rescue status.
pub fn classify_samples(
    baseline_preds: &[usize],
    fusion_preds: &[usize],
    labels: &[usize],
    gates: &[Vec<f64>],
) -> Result<Vec<SampleStatus>, CoreError> {
    let n = labels.len();
    if baseline_preds.len() != n || fusion_preds.len() != n || gates.len() != n {
        return Err(CoreError::Param("mismatched prediction vectors".into()));
    }
    Ok((0..n)
        .map(|i| {
            let b = baseline_preds[i] == labels[i];
            let f = fusion_preds[i] == labels[i];
            let status = match (b, f) {
                (true, true) => Status::BothCorrect,
                (false, true) => Status::Rescued,
                (true, false) => Status::Hurt,
                (false, false) => Status::BothWrong,
            };
            SampleStatus {
                status,
                baseline_pred: baseline_preds[i],
                fusion_pred: fusion_preds[i],
                label: labels[i],
                gates: gates[i].clone(),
            }
        })
        .collect())
}

pub fn count_statuses(statuses: &[SampleStatus]) -> [usize; 4] {
    let mut counts = [0usize; 4];
    for s in statuses {
        let idx = match s.status {
            Status::BothCorrect => 0,
            Status::Rescued => 1,
            Status::Hurt => 2,
            Status::BothWrong => 3,
        };
        counts[idx] += 1;
    }
    counts
}

/// `confusion(fusion) - confusion(baseline)` as a C x C matrix of
/// (true label, prediction) count changes. Row sums are identically zero
/// because both models share the true-label marginals.
pub fn confusion_delta(
    baseline_preds: &[usize],
    fusion_preds: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Vec<i64>>, CoreError> {
    let n = labels.len();
    if baseline_preds.len() != n || fusion_preds.len() != n {
        return Err(CoreError::Param("mismatched prediction vectors".into()));
    }
    let mut delta = vec![vec![0i64; num_classes]; num_classes];
    for i in 0..n {
        delta[labels[i]][fusion_preds[i]] += 1;
        delta[labels[i]][baseline_preds[i]] -= 1;
    }
    Ok(delta)
}

/// Mean gate on rescued samples minus mean gate on both-correct samples.
/// Unavailable (None, with a warning) if either group is empty.
pub fn gate_shift(statuses: &[SampleStatus]) -> Option<GateShift> {
    let rescued: Vec<&SampleStatus> = statuses.iter().filter(|s| s.status == Status::Rescued).collect();
    let correct: Vec<&SampleStatus> =
        statuses.iter().filter(|s| s.status == Status::BothCorrect).collect();
    if rescued.is_empty() || correct.is_empty() {
        warn!(
            "gate_shift unavailable: {} rescued, {} both-correct",
            rescued.len(),
            correct.len()
        );
        return None;
    }
    let b = rescued[0].gates.len();
    let mean = |group: &[&SampleStatus]| -> Vec<f64> {
        let mut m = vec![0.0; b];
        for s in group {
            for (acc, &g) in m.iter_mut().zip(&s.gates) {
                *acc += g;
            }
        }
        for acc in &mut m {
            *acc /= group.len() as f64;
        }
        m
    };
    let mr = mean(&rescued);
    let mc = mean(&correct);
    Some(GateShift {
        shifts: mr.iter().zip(&mc).map(|(a, b)| a - b).collect(),
        n_rescued: rescued.len(),
        n_both_correct: correct.len(),
    })
}

/// Per-representation histogram of the net (rescued - hurt) fraction as a
/// function of the gate value. Bin `k` covers `[k/bins, (k+1)/bins)` with the
/// last bin closed. Returns, per representation, `(net_fraction, mass)` pairs
/// where `mass` is the share of samples falling in the bin.
pub fn gate_bin_profile(statuses: &[SampleStatus], bins: usize) -> Vec<Vec<(f64, f64)>> {
    assert!(bins >= 1);
    if statuses.is_empty() {
        return Vec::new();
    }
    let b = statuses[0].gates.len();
    let n = statuses.len() as f64;
    let mut out = Vec::with_capacity(b);
    for rep in 0..b {
        let mut net = vec![0i64; bins];
        let mut count = vec![0usize; bins];
        for s in statuses {
            let g = s.gates[rep].clamp(0.0, 1.0);
            let k = ((g * bins as f64) as usize).min(bins - 1);
            count[k] += 1;
            match s.status {
                Status::Rescued => net[k] += 1,
                Status::Hurt => net[k] -= 1,
                _ => {}
            }
        }
        out.push(
            (0..bins)
                .map(|k| {
                    let frac = if count[k] == 0 {
                        0.0
                    } else {
                        net[k] as f64 / count[k] as f64
                    };
                    (frac, count[k] as f64 / n)
                })
                .collect(),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn uniform_gates(n: usize) -> Vec<Vec<f64>> {
        vec![vec![1.0 / 3.0; 3]; n]
    }

    #[test]
    fn status_assignment() {
        let labels = [0, 1, 2, 0];
        let baseline = [0, 0, 2, 1]; // right, wrong, right, wrong
        let fusion = [0, 1, 0, 2]; // right, right, wrong, wrong
        let s = classify_samples(&baseline, &fusion, &labels, &uniform_gates(4)).unwrap();
        assert_eq!(s[0].status, Status::BothCorrect);
        assert_eq!(s[1].status, Status::Rescued);
        assert_eq!(s[2].status, Status::Hurt);
        assert_eq!(s[3].status, Status::BothWrong);
        assert_eq!(count_statuses(&s), [1, 1, 1, 1]);
    }

    #[test]
    fn status_counts_balance_accuracy_difference() {
        let mut rng = crate::rng::rng_from_seed(1);
        for _ in 0..50 {
            let n = 40;
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let baseline: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let fusion: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let s = classify_samples(&baseline, &fusion, &labels, &uniform_gates(n)).unwrap();
            let [_, rescued, hurt, _] = count_statuses(&s);
            let b_correct = baseline.iter().zip(&labels).filter(|(a, b)| a == b).count();
            let f_correct = fusion.iter().zip(&labels).filter(|(a, b)| a == b).count();
            assert_eq!(rescued as i64 - hurt as i64, f_correct as i64 - b_correct as i64);
            assert_eq!(count_statuses(&s).iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn confusion_delta_hand_case() {
        // one rescued class-2 sample previously predicted 0
        let labels = [2];
        let baseline = [0];
        let fusion = [2];
        let d = confusion_delta(&baseline, &fusion, &labels, 3).unwrap();
        assert_eq!(d[2][2], 1);
        assert_eq!(d[2][0], -1);
        assert_eq!(d[0], vec![0, 0, 0]);
    }

    #[test]
    fn confusion_delta_rows_sum_zero() {
        let mut rng = crate::rng::rng_from_seed(2);
        for _ in 0..50 {
            let n = 30;
            let c = 4;
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
            let baseline: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
            let fusion: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
            let d = confusion_delta(&baseline, &fusion, &labels, c).unwrap();
            for row in &d {
                assert_eq!(row.iter().sum::<i64>(), 0);
            }
            // net diagonal gain equals rescued - hurt
            let s = classify_samples(&baseline, &fusion, &labels, &uniform_gates(n)).unwrap();
            let [_, rescued, hurt, _] = count_statuses(&s);
            let diag: i64 = (0..c).map(|k| d[k][k]).sum();
            assert_eq!(diag, rescued as i64 - hurt as i64);
        }
    }

    #[test]
    fn identical_predictions_zero_delta() {
        let labels = [0, 1, 1, 0];
        let preds = [1, 1, 0, 0];
        let d = confusion_delta(&preds, &preds, &labels, 2).unwrap();
        assert!(d.iter().flatten().all(|&v| v == 0));
    }

    fn status_with_gates(status: Status, gates: Vec<f64>) -> SampleStatus {
        SampleStatus {
            status,
            baseline_pred: 0,
            fusion_pred: 0,
            label: 0,
            gates,
        }
    }

    #[test]
    fn gate_shift_extremes_and_zero_sum() {
        let statuses = vec![
            status_with_gates(Status::Rescued, vec![0.0, 1.0, 0.0]),
            status_with_gates(Status::BothCorrect, vec![0.0, 0.0, 1.0]),
        ];
        let shift = gate_shift(&statuses).unwrap();
        assert_eq!(shift.shifts, vec![0.0, 1.0, -1.0]);
        assert_abs_diff_eq!(shift.shifts.iter().sum::<f64>(), 0.0, epsilon = 1e-6);

        let same = vec![
            status_with_gates(Status::Rescued, vec![0.2, 0.3, 0.5]),
            status_with_gates(Status::BothCorrect, vec![0.2, 0.3, 0.5]),
        ];
        assert!(gate_shift(&same).unwrap().shifts.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn gate_shift_unavailable_without_groups() {
        let only_wrong = vec![status_with_gates(Status::BothWrong, vec![0.5, 0.5])];
        assert!(gate_shift(&only_wrong).is_none());
        assert!(gate_shift(&[]).is_none());
    }

    #[test]
    fn gate_shift_sums_to_zero_on_random_groups() {
        let mut rng = crate::rng::rng_from_seed(3);
        let mut statuses = Vec::new();
        for i in 0..60 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let gates: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let status = if i % 3 == 0 {
                Status::Rescued
            } else if i % 3 == 1 {
                Status::BothCorrect
            } else {
                Status::Hurt
            };
            statuses.push(status_with_gates(status, gates));
        }
        let shift = gate_shift(&statuses).unwrap();
        assert_abs_diff_eq!(shift.shifts.iter().sum::<f64>(), 0.0, epsilon = 1e-6);
        assert_eq!(shift.n_rescued, 20);
        assert_eq!(shift.n_both_correct, 20);
    }

    #[test]
    fn gate_profile_flat_when_uniform() {
        let statuses: Vec<SampleStatus> = (0..20)
            .map(|_| status_with_gates(Status::BothCorrect, vec![0.5, 0.5]))
            .collect();
        let profile = gate_bin_profile(&statuses, 4);
        for rep in &profile {
            for &(net, _) in rep {
                assert_eq!(net, 0.0);
            }
        }
    }

    #[test]
    fn gate_profile_localises_rescues() {
        let mut statuses = vec![
            status_with_gates(Status::Rescued, vec![0.9, 0.1]),
            status_with_gates(Status::Rescued, vec![0.95, 0.05]),
        ];
        for _ in 0..10 {
            statuses.push(status_with_gates(Status::BothCorrect, vec![0.1, 0.9]));
        }
        let profile = gate_bin_profile(&statuses, 5);
        // representation 0: rescues sit in the top bin only
        assert_eq!(profile[0][4].0, 1.0);
        for k in 0..4 {
            assert_eq!(profile[0][k].0, 0.0);
        }
    }

    #[test]
    fn gate_profile_mass_identity() {
        let mut rng = crate::rng::rng_from_seed(4);
        let statuses: Vec<SampleStatus> = (0..200)
            .map(|_| {
                let g: f64 = rng.gen_range(0.0..1.0);
                let status = match rng.gen_range(0..4) {
                    0 => Status::BothCorrect,
                    1 => Status::Rescued,
                    2 => Status::Hurt,
                    _ => Status::BothWrong,
                };
                status_with_gates(status, vec![g, 1.0 - g])
            })
            .collect();
        let [_, rescued, hurt, _] = count_statuses(&statuses);
        let overall_net = (rescued as f64 - hurt as f64) / statuses.len() as f64;
        for rep in gate_bin_profile(&statuses, 8) {
            let weighted: f64 = rep.iter().map(|&(net, mass)| net * mass).sum();
            assert_abs_diff_eq!(weighted, overall_net, epsilon = 1e-12);
        }
    }
}
