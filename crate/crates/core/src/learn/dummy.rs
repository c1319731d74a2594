//! Stratified baseline: predictions are drawn from the training class
//! frequencies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::N_CLASSES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DummyModel {
    pub priors: [f64; N_CLASSES],
}

impl DummyModel {
    pub fn fit(y: &[usize]) -> Self {
        let mut priors = [0.0; N_CLASSES];
        for &c in y {
            priors[c] += 1.0;
        }
        let n = y.len().max(1) as f64;
        for p in &mut priors {
            *p /= n;
        }
        DummyModel { priors }
    }

    pub fn predict_proba(&self) -> Vec<f64> {
        self.priors.to_vec()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.priors.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        (0..N_CLASSES).rev().find(|&k| self.priors[k] > 0.0).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalstat::{confusion, f1_weighted};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent truth and prediction drawn from the same distribution:
    /// precision = recall = p_c for each class, so weighted F1 = sum p_c^2.
    fn monte_carlo(priors: [f64; 3], n: usize, seed: u64) -> f64 {
        let model = DummyModel { priors };
        let mut truth_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pred_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
        let y: Vec<usize> = (0..n).map(|_| model.sample(&mut truth_rng)).collect();
        let p: Vec<usize> = (0..n).map(|_| model.sample(&mut pred_rng)).collect();
        f1_weighted(&confusion(&y, &p, 3).unwrap()).unwrap()
    }

    #[test]
    fn balanced_baseline_is_one_third() {
        let f1 = monte_carlo([1.0 / 3.0; 3], 100_000, 1);
        assert!((f1 - 1.0 / 3.0).abs() <= 0.02, "{f1}");
    }

    #[test]
    fn skewed_baseline_follows_the_square_law() {
        let priors = [0.5, 0.3, 0.2];
        let law: f64 = priors.iter().map(|p| p * p).sum();
        assert!((law - 0.38).abs() < 1e-12);
        let f1 = monte_carlo(priors, 100_000, 2);
        assert!((f1 - law).abs() <= 0.02, "{f1}");
    }

    #[test]
    fn priors_are_frequencies() {
        let m = DummyModel::fit(&[0, 0, 1, 2, 2, 2]);
        assert_eq!(m.priors, [2.0 / 6.0, 1.0 / 6.0, 3.0 / 6.0]);
        let s: f64 = m.predict_proba().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_never_sampled() {
        let m = DummyModel::fit(&[0, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..10_000).all(|_| m.sample(&mut rng) != 1));
    }
}
