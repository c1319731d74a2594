//! Class-imbalance measures used by the eligibility filter.

use crate::error::{Error, Result};

/// A scalar summarising how far class counts are from balance.
pub trait ImbalanceMetric: Send + Sync {
    fn name(&self) -> &'static str;
    /// Zero iff perfectly balanced. All-zero counts are undefined.
    fn degree(&self, counts: &[usize]) -> Result<f64>;
}

/// Likelihood-ratio statistic of the counts against a uniform split:
/// `2 Σ n_k ln(K n_k / N)`, with empty classes contributing nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct LikelihoodRatio;

impl ImbalanceMetric for LikelihoodRatio {
    fn name(&self) -> &'static str {
        "likelihood_ratio"
    }

    fn degree(&self, counts: &[usize]) -> Result<f64> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::UndefinedInput("imbalance of all-zero counts".into()));
        }
        let n = total as f64;
        let k = counts.len() as f64;
        let sum: f64 = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let c = c as f64;
                c * (k * c / n).ln()
            })
            .sum();
        // rounding can leave a tiny negative for balanced counts
        Ok((2.0 * sum).max(0.0))
    }
}

/// [`LikelihoodRatio`] degree of `counts`.
pub fn imbalance_degree(counts: &[usize]) -> Result<f64> {
    LikelihoodRatio.degree(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_is_zero() {
        assert_eq!(imbalance_degree(&[10, 10, 10]).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_example() {
        // 20 ln(60/30) + 10 ln(30/30) + 0 = 20 ln 2, doubled
        let expected = 40.0 * std::f64::consts::LN_2;
        assert!((imbalance_degree(&[20, 10, 0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 27.726).abs() < 1e-3);
    }

    #[test]
    fn all_zero_is_undefined() {
        assert!(matches!(imbalance_degree(&[0, 0, 0]), Err(Error::UndefinedInput(_))));
    }

    #[test]
    fn extreme_skew_grows_with_n() {
        let mut last = -1.0;
        for n in 1..50 {
            let d = imbalance_degree(&[n, 0, 0]).unwrap();
            assert!(d > last);
            last = d;
        }
    }

    proptest! {
        #[test]
        fn permutation_invariant(a in 0usize..500, b in 0usize..500, c in 1usize..500) {
            let base = imbalance_degree(&[a, b, c]).unwrap();
            for p in [[b, c, a], [c, a, b], [a, c, b], [b, a, c], [c, b, a]] {
                prop_assert!((imbalance_degree(&p).unwrap() - base).abs() < 1e-9 * base.max(1.0));
            }
            prop_assert!(base >= 0.0);
        }
    }
}
