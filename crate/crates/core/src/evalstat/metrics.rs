//! Confusion matrices and the scores derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// Add another matrix of the same size in place.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Contract(format!(
            "label lengths differ: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut m = ConfusionMatrix::zeros(k);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::Contract(format!("label out of range for k={k}")));
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

/// Precision, recall, F1 and support of one class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn per_class(m: &ConfusionMatrix) -> Vec<ClassScores> {
    let rows = m.row_sums();
    let cols = m.col_sums();
    (0..m.k())
        .map(|c| {
            let tp = m.counts[c][c];
            let precision = ratio(tp, cols[c]);
            let recall = ratio(tp, rows[c]);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScores {
                precision,
                recall,
                f1,
                support: rows[c],
            }
        })
        .collect()
}

/// Support-weighted mean of per-class F1.
pub fn f1_weighted(m: &ConfusionMatrix) -> Result<f64> {
    let n = m.total();
    if n == 0 {
        return Err(Error::Contract("F1 of an empty confusion matrix".into()));
    }
    Ok(per_class(m)
        .iter()
        .map(|s| s.support as f64 / n as f64 * s.f1)
        .sum())
}

/// Multiclass Matthews correlation in trace/marginal form. A zero
/// denominator gives 0.
pub fn mcc_multiclass(m: &ConfusionMatrix) -> Result<f64> {
    let s = m.total();
    if s == 0 {
        return Err(Error::Contract("MCC of an empty confusion matrix".into()));
    }
    let s = s as f64;
    let c = m.trace() as f64;
    let p = m.col_sums();
    let t = m.row_sums();
    let pt: f64 = p.iter().zip(&t).map(|(&a, &b)| a as f64 * b as f64).sum();
    let pp: f64 = p.iter().map(|&a| (a as f64).powi(2)).sum();
    let tt: f64 = t.iter().map(|&a| (a as f64).powi(2)).sum();
    let den = ((s * s - pp) * (s * s - tt)).sqrt();
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(((c * s - pt) / den).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_empty() {
        let m = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(m.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(f1_weighted(&m).unwrap(), 1.0);
        assert_eq!(mcc_multiclass(&m).unwrap(), 1.0);
        let e = confusion(&[], &[], 3).unwrap();
        assert_eq!(e, ConfusionMatrix::zeros(3));
        assert!(f1_weighted(&e).is_err());
        assert!(mcc_multiclass(&e).is_err());
    }

    #[test]
    fn hand_tally() {
        let m = confusion(&[0, 0, 1], &[0, 1, 1], 3).unwrap();
        assert_eq!(m.counts, vec![vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 0]]);
        // class 0: P=1, R=1/2, F1=2/3 ; class 1: P=1/2, R=1, F1=2/3 ; supports 2 and 1
        assert!((f1_weighted(&m).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(confusion(&[0], &[], 3), Err(Error::Contract(_))));
    }

    #[test]
    fn constant_prediction_has_zero_mcc() {
        let m = confusion(&[0, 1, 2, 0, 1, 2], &[1; 6], 3).unwrap();
        assert_eq!(mcc_multiclass(&m).unwrap(), 0.0);
        // class 0 and 2 have no predictions and no true positives
        let pc = per_class(&m);
        assert_eq!(pc[0].f1, 0.0);
        assert_eq!(pc[2].f1, 0.0);
    }

    fn matrix() -> impl Strategy<Value = ConfusionMatrix> {
        proptest::collection::vec(proptest::collection::vec(0u64..30, 3), 3)
            .prop_filter("non-empty", |c| c.iter().flatten().sum::<u64>() > 0)
            .prop_map(|counts| ConfusionMatrix { counts })
    }

    proptest! {
        #[test]
        fn ranges_hold(m in matrix()) {
            let f = f1_weighted(&m).unwrap();
            let r = mcc_multiclass(&m).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((-1.0..=1.0).contains(&r));
        }

        #[test]
        fn invariant_under_relabeling(m in matrix(), perm in Just([2usize, 0, 1]).prop_union(Just([1, 0, 2]))) {
            let mut p = ConfusionMatrix::zeros(3);
            for i in 0..3 {
                for j in 0..3 {
                    p.counts[perm[i]][perm[j]] = m.counts[i][j];
                }
            }
            prop_assert!((f1_weighted(&m).unwrap() - f1_weighted(&p).unwrap()).abs() < 1e-12);
            prop_assert!((mcc_multiclass(&m).unwrap() - mcc_multiclass(&p).unwrap()).abs() < 1e-12);
        }
    }
}
