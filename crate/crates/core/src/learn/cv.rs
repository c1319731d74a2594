//! Cross-validation split search and stratified folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of folds: the smallest present class count, clamped to
/// `[2, n_max]`. Every present class needs at least two members.
pub fn choose_cv_splits(y: &[usize], n_max: usize) -> Result<usize> {
    let counts = class_counts(y);
    let present: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    if present.is_empty() {
        return Err(Error::Contract("no labels".into()));
    }
    let min = *present.iter().min().expect("non-empty");
    if min < 2 {
        return Err(Error::Contract(format!("a class has {min} member(s); need 2")));
    }
    if n_max < 2 {
        return Err(Error::Contract(format!("n_max {n_max} < 2")));
    }
    Ok(min.clamp(2, n_max))
}

pub(crate) fn class_counts(y: &[usize]) -> Vec<usize> {
    let k = y.iter().map(|&c| c + 1).max().unwrap_or(0);
    let mut counts = vec![0; k];
    for &c in y {
        counts[c] += 1;
    }
    counts
}

/// Test indices of each fold. Each class is shuffled and dealt round-robin,
/// continuing from where the previous class stopped, so fold sizes differ
/// by at most one and every fold holds every class with at least
/// `n_splits` members.
pub fn stratified_folds(y: &[usize], n_splits: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n_splits.max(1);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for class in 0..class_counts(y).len() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// Training indices complementary to `test`.
pub fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in test {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(counts: &[usize]) -> Vec<usize> {
        counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect()
    }

    #[test]
    fn clamp_rule_examples() {
        assert_eq!(choose_cv_splits(&labels(&[12, 9, 30]), 10).unwrap(), 9);
        assert_eq!(choose_cv_splits(&labels(&[100, 100, 100]), 10).unwrap(), 10);
        assert_eq!(choose_cv_splits(&labels(&[2, 50, 50]), 10).unwrap(), 2);
    }

    #[test]
    fn absent_classes_are_ignored() {
        assert_eq!(choose_cv_splits(&labels(&[0, 7, 40]), 5).unwrap(), 5);
        assert_eq!(choose_cv_splits(&labels(&[0, 3, 40]), 5).unwrap(), 3);
    }

    #[test]
    fn singleton_class_is_a_contract_error() {
        assert!(matches!(choose_cv_splits(&labels(&[1, 5, 5]), 5), Err(Error::Contract(_))));
        assert!(matches!(choose_cv_splits(&[], 5), Err(Error::Contract(_))));
    }

    proptest! {
        #[test]
        fn every_fold_holds_every_class(
            counts in prop::collection::vec(2usize..40, 1..4),
            n_max in 2usize..10,
            seed in any::<u64>(),
        ) {
            let y = labels(&counts);
            let n = choose_cv_splits(&y, n_max).unwrap();
            let folds = stratified_folds(&y, n, seed);
            prop_assert_eq!(folds.len(), n);
            let mut seen = vec![0usize; y.len()];
            for f in &folds {
                for c in 0..counts.len() {
                    prop_assert!(f.iter().any(|&i| y[i] == c));
                }
                for &i in f {
                    seen[i] += 1;
                }
                let train = complement(y.len(), f);
                prop_assert_eq!(train.len() + f.len(), y.len());
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
