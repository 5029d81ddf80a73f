use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Accuracy plus macro-averaged F1/precision/recall. Macro averaging runs
/// over the union of true and predicted classes; a class nobody predicted
/// contributes precision 0, and an undefined F1 (P = R = 0) counts as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

pub fn metrics(predictions: &[u32], labels: &[u32]) -> Metrics {
    assert_eq!(predictions.len(), labels.len());
    assert!(!labels.is_empty(), "metrics over an empty set");
    let classes: BTreeSet<u32> = labels.iter().chain(predictions).copied().collect();

    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    let accuracy = correct as f64 / labels.len() as f64;

    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    for &c in &classes {
        let tp = predictions.iter().zip(labels).filter(|&(&p, &l)| p == c && l == c).count() as f64;
        let fp = predictions.iter().zip(labels).filter(|&(&p, &l)| p == c && l != c).count() as f64;
        let fn_ = predictions.iter().zip(labels).filter(|&(&p, &l)| p != c && l == c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        p_sum += precision;
        r_sum += recall;
        f_sum += f1;
    }
    let n = classes.len() as f64;
    Metrics { accuracy, f1: f_sum / n, precision: p_sum / n, recall: r_sum / n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let labels = [0u32, 1, 2, 0, 1, 2];
        let m = metrics(&labels, &labels);
        assert_eq!(m, Metrics { accuracy: 1.0, f1: 1.0, precision: 1.0, recall: 1.0 });
    }

    #[test]
    fn constant_predictor_on_two_balanced_classes() {
        // Predicting class 0 always: class 0 has P=0.5, R=1, F1=2/3; class 1
        // has all zeros. Macro-F1 = 1/3, accuracy = 1/2.
        let labels = [0u32, 0, 1, 1];
        let preds = [0u32, 0, 0, 0];
        let m = metrics(&preds, &labels);
        assert!((m.accuracy - 0.5).abs() < 1e-15);
        assert!((m.f1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.precision - 0.25).abs() < 1e-15);
        assert!((m.recall - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sample_order_is_irrelevant() {
        let labels = [3u32, 1, 1, 2, 3, 2, 1];
        let preds = [3u32, 1, 2, 2, 1, 2, 1];
        let base = metrics(&preds, &labels);
        let perm = [4usize, 0, 6, 2, 5, 1, 3];
        let labels_p: Vec<u32> = perm.iter().map(|&i| labels[i]).collect();
        let preds_p: Vec<u32> = perm.iter().map(|&i| preds[i]).collect();
        assert_eq!(base, metrics(&preds_p, &labels_p));
    }

    #[test]
    fn bounded_and_accuracy_equals_micro_recall() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..200 {
            let n = rng.gen_range(1..30);
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let preds: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let m = metrics(&preds, &labels);
            for v in [m.accuracy, m.f1, m.precision, m.recall] {
                assert!((0.0..=1.0).contains(&v), "metric out of range: {v}");
            }
            // Micro recall: total true positives over total actual = the
            // fraction predicted correctly.
            let micro = labels.iter().zip(&preds).filter(|(l, p)| l == p).count() as f64
                / labels.len() as f64;
            assert_eq!(m.accuracy, micro);
        }
    }

    #[test]
    fn predicted_only_class_still_enters_the_average() {
        // Class 7 never occurs in labels but is predicted once: it adds a
        // zero row, pulling the macro scores down.
        let labels = [0u32, 0];
        let preds = [0u32, 7];
        let m = metrics(&preds, &labels);
        assert!((m.accuracy - 0.5).abs() < 1e-15);
        // Class 0: P=1, R=0.5, F1=2/3; class 7: zeros.
        assert!((m.precision - 0.5).abs() < 1e-15);
        assert!((m.recall - 0.25).abs() < 1e-15);
        assert!((m.f1 - 1.0 / 3.0).abs() < 1e-15);
    }
}
