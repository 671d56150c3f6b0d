//! Threshold-free and boundary-based scoring.

use thiserror::Error;

use crate::ocsvm::Prediction;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("AUC needs both classes, got {positives} positive and {negatives} negative")]
    SingleClass { positives: usize, negatives: usize },
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFinite(f64),
}

/// Mann–Whitney AUC: probability that a random positive scores above a
/// random negative, ties counting one half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != positive.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: positive.len() });
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(s));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass { positives: n_pos, negatives: n_neg });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (1-based, tie-averaged) ranks of the positives, doubled to stay integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let pos_in_group = order[i..=j].iter().filter(|&&k| positive[k]).count() as u128;
        rank_sum2 += pos_in_group * (i as u128 + j as u128 + 2);
        i = j + 1;
    }
    let (np, nn) = (n_pos as u128, n_neg as u128);
    let u2 = rank_sum2 - np * (np + 1);
    Ok(u2 as f64 / (2 * np * nn) as f64)
}

/// Counts at the SVM boundary with NOK as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(predictions: &[Prediction], positive: &[bool]) -> Confusion {
    let mut c = Confusion::default();
    for (p, &nok) in predictions.iter().zip(positive) {
        match (p, nok) {
            (Prediction::Outlier, true) => c.tp += 1,
            (Prediction::Outlier, false) => c.fp += 1,
            (Prediction::Inlier, false) => c.tn += 1,
            (Prediction::Inlier, true) => c.fn_ += 1,
        }
    }
    c
}

/// Per-feature mean and population variance of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub count: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

pub fn class_stats<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> ClassStats {
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    let n = rows.len();
    let mut means = vec![0.0; dim];
    let mut variances = vec![0.0; dim];
    if n > 0 {
        for j in 0..dim {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            means[j] = m;
            variances[j] = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64;
        }
    }
    ClassStats { count: n, means, variances }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct enumeration of all positive/negative pairs.
    fn pair_oracle(scores: &[f64], positive: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &pi) in positive.iter().enumerate() {
            for (j, &pj) in positive.iter().enumerate() {
                if pi && !pj {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn documented_cases() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[3.0; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert_eq!(auc(&[1.0, 2.0, 3.0, 4.0], &[false, true, false, true]).unwrap(), 0.75);
        assert_eq!(auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(auc(&[1.0, 2.0], &[true, true]), Err(EvalError::SingleClass { .. })));
        assert!(matches!(auc(&[1.0], &[true, false]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(auc(&[f64::NAN, 1.0], &[true, false]), Err(EvalError::NonFinite(_))));
    }

    #[test]
    fn confusion_counts() {
        use Prediction::*;
        let c = confusion(&[Outlier, Outlier, Inlier, Inlier, Inlier], &[true, false, false, true, false]);
        assert_eq!(c, Confusion { tp: 1, fp: 1, tn: 2, fn_: 1 });
        assert_eq!(c.total(), 5);
    }

    #[test]
    fn stats() {
        let rows = [vec![1.0, 10.0], vec![3.0, 10.0]];
        let s = class_stats(rows.iter().map(Vec::as_slice), 2);
        assert_eq!(s.means, vec![2.0, 10.0]);
        assert_eq!(s.variances, vec![1.0, 0.0]);
        assert_eq!(class_stats(std::iter::empty(), 2).count, 0);
    }

    proptest! {
        #[test]
        fn matches_pair_enumeration(data in prop::collection::vec((0u8..6, any::<bool>()), 2..40)) {
            let scores: Vec<f64> = data.iter().map(|&(s, _)| s as f64).collect();
            let labels: Vec<bool> = data.iter().map(|&(_, l)| l).collect();
            match auc(&scores, &labels) {
                Ok(a) => {
                    prop_assert!((0.0..=1.0).contains(&a));
                    prop_assert!((a - pair_oracle(&scores, &labels)).abs() < 1e-12);
                }
                Err(e) => { let single = matches!(e, EvalError::SingleClass { .. }); prop_assert!(single) }
            }
        }

        #[test]
        fn flipping_scores_complements(data in prop::collection::vec((-5i32..5, any::<bool>()), 2..30)) {
            let scores: Vec<f64> = data.iter().map(|&(s, _)| s as f64).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let labels: Vec<bool> = data.iter().map(|&(_, l)| l).collect();
            if let (Ok(a), Ok(b)) = (auc(&scores, &labels), auc(&neg, &labels)) {
                prop_assert!((a + b - 1.0).abs() < 1e-12);
            }
        }
    }
}
