//! Classification metrics (accuracy, sensitivity, specificity, F1, CCR,
//! MCC), ROC AUC and the Pearson correlation used for regression model
//! selection. Metrics with zero denominators are reported as undefined
//! rather than zero.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn from_predictions(labels: &[bool], predicted: &[bool]) -> ConfusionCounts {
        assert_eq!(labels.len(), predicted.len());
        let mut c = ConfusionCounts::default();
        for (&y, &p) in labels.iter().zip(predicted) {
            match (y, p) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }
}

/// Every metric is `None` when its denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub ccr: Option<f64>,
    pub mcc: Option<f64>,
}

pub fn evaluate_metrics(c: &ConfusionCounts) -> MetricReport {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };

    let accuracy = ratio(tp + tn, tp + tn + fp + fn_);
    let sensitivity = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    // F1 as TP / (TP + (FP + FN) / 2)
    let f1 = ratio(tp, tp + 0.5 * (fp + fn_));
    let ccr = match (sensitivity, specificity) {
        (Some(sn), Some(sp)) => Some((sn + sp) / 2.0),
        _ => None,
    };
    let mcc_den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = if mcc_den > 0.0 {
        Some((tp * tn - fp * fn_) / mcc_den)
    } else {
        None
    };
    MetricReport {
        accuracy,
        sensitivity,
        specificity,
        f1,
        ccr,
        mcc,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AucError {
    #[error("ROC AUC requires both classes present")]
    SingleClassInput,
}

/// Trapezoidal ROC AUC; ties in score contribute half. Equals the
/// probability that a random positive outranks a random negative.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, AucError> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(AucError::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // sweep thresholds from high to low, accumulating trapezoids; ties are
    // processed as one group
    let mut auc = 0.0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let (mut prev_tp, mut prev_fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let x0 = prev_fp as f64 / n_neg as f64;
        let x1 = fp as f64 / n_neg as f64;
        let y0 = prev_tp as f64 / n_pos as f64;
        let y1 = tp as f64 / n_pos as f64;
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(auc)
}

/// Sample Pearson correlation; `None` when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if a.is_empty() {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some(cov / (va.sqrt() * vb.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn hand_evaluated_counts() {
        let report = evaluate_metrics(&ConfusionCounts {
            tp: 50,
            tn: 30,
            fp: 10,
            fn_: 10,
        });
        assert!(close(report.accuracy.unwrap(), 0.8, 1e-4));
        assert!(close(report.sensitivity.unwrap(), 0.8333, 1e-4));
        assert!(close(report.specificity.unwrap(), 0.75, 1e-4));
        assert!(close(report.f1.unwrap(), 0.8333, 1e-4));
        assert!(close(report.ccr.unwrap(), 0.7917, 1e-4));
        assert!(close(report.mcc.unwrap(), 0.5833, 1e-4));
    }

    #[test]
    fn ccr_matches_published_rows() {
        // hERG benchmark row: SN 86.2, SP 80.3 -> CCR 83.25 (reported 83.2)
        let ccr = (0.862 + 0.803) / 2.0;
        assert!(close(ccr, 0.8325, 1e-9));
        assert!((ccr * 100.0 - 83.2).abs() < 0.05 + 1e-9);
        // CToxPred-Cav row: SN 96.2, SP 69.0 -> CCR 82.6 exactly
        let ccr = (0.962 + 0.690) / 2.0;
        assert!(close(ccr * 100.0, 82.6, 1e-9));
    }

    #[test]
    fn undefined_metrics_flagged() {
        let report = evaluate_metrics(&ConfusionCounts {
            tp: 0,
            tn: 5,
            fp: 0,
            fn_: 0,
        });
        assert!(report.sensitivity.is_none());
        assert!(report.mcc.is_none());
        assert_eq!(report.specificity, Some(1.0));
    }

    #[test]
    fn mcc_bounds() {
        let perfect = evaluate_metrics(&ConfusionCounts {
            tp: 10,
            tn: 10,
            fp: 0,
            fn_: 0,
        });
        assert!(close(perfect.mcc.unwrap(), 1.0, 1e-12));
        let inverted = evaluate_metrics(&ConfusionCounts {
            tp: 0,
            tn: 0,
            fp: 10,
            fn_: 10,
        });
        assert!(close(inverted.mcc.unwrap(), -1.0, 1e-12));
    }

    #[test]
    fn auc_separated_and_ties() {
        let perfect = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert!(close(perfect, 1.0, 1e-12));
        let ties = roc_auc(&[0.5, 0.5, 0.5, 0.5], &[true, false, true, false]).unwrap();
        assert!(close(ties, 0.5, 1e-12));
        assert_eq!(
            roc_auc(&[0.5, 0.4], &[true, true]),
            Err(AucError::SingleClassInput)
        );
    }

    #[test]
    fn auc_matches_pairwise_count_oracle() {
        // O(n^2) oracle: P(random positive outranks random negative), half
        // credit for ties
        let mut state = 0x12345678u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64 / (1u64 << 31) as f64).fract()
        };
        for trial in 0..10 {
            let n = 20;
            let scores: Vec<f64> = (0..n)
                .map(|_| (next() * 10.0).round() / 10.0) // coarse grid forces ties
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| next() > 0.5).collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] && !labels[j] {
                        pairs += 1.0;
                        if scores[i] > scores[j] {
                            wins += 1.0;
                        } else if scores[i] == scores[j] {
                            wins += 0.5;
                        }
                    }
                }
            }
            let auc = roc_auc(&scores, &labels).unwrap();
            assert!(close(auc, wins / pairs, 1e-9), "trial {trial}");
        }
    }

    #[test]
    fn pearson_perfect_and_constant() {
        let xs = [1.0, 2.0, 3.0];
        assert!(close(pearson(&xs, &[2.0, 4.0, 6.0]).unwrap(), 1.0, 1e-12));
        assert!(close(pearson(&xs, &[3.0, 2.0, 1.0]).unwrap(), -1.0, 1e-12));
        assert_eq!(pearson(&xs, &[5.0, 5.0, 5.0]), None);
    }
}
