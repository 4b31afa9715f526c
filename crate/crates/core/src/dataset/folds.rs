use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    /// `(train, test)` index lists for `fold`, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (self.train_indices(fold), self.test_indices(fold))
    }
}

/// Stratified k-fold assignment.
///
/// Each class's members are shuffled and dealt round-robin; the dealing
/// position carries over from one class to the next so that overall fold
/// sizes also differ by at most one.
pub fn stratified_folds(data: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "fold count must be >= 2, got {k}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.n_classes()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::InvalidData(format!(
                "class `{}` has {} members, fewer than {k} folds",
                data.class_names()[c],
                members.len()
            )));
        }
    }
    if data.n_samples() < k {
        return Err(Error::InvalidData(format!(
            "{} samples cannot fill {k} folds",
            data.n_samples()
        )));
    }
    let mut rng = seeded(seed);
    let mut assignments = vec![0; data.n_samples()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignments[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labeled(labels: Vec<usize>, k: usize) -> Dataset {
        let n = labels.len();
        Dataset::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            labels,
            (0..k).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn balanced_two_class() {
        let d = labeled((0..100).map(|i| i % 2).collect(), 2);
        let plan = stratified_folds(&d, 5, 3).unwrap();
        for f in 0..5 {
            let test = plan.test_indices(f);
            assert_eq!(test.len(), 20);
            assert_eq!(test.iter().filter(|&&i| d.label(i) == 0).count(), 10);
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let d = labeled((0..37).map(|i| i % 3).collect(), 3);
        assert_eq!(
            stratified_folds(&d, 4, 9).unwrap(),
            stratified_folds(&d, 4, 9).unwrap()
        );
        assert_ne!(
            stratified_folds(&d, 4, 9).unwrap().assignments,
            stratified_folds(&d, 4, 10).unwrap().assignments
        );
    }

    #[test]
    fn small_class_is_an_error() {
        let mut labels = vec![0; 20];
        labels.extend([1, 1, 1]);
        let d = labeled(labels, 2);
        assert!(matches!(
            stratified_folds(&d, 5, 0),
            Err(Error::InvalidData(_))
        ));
        assert!(stratified_folds(&d, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(
            labels in prop::collection::vec(0usize..3, 30..120),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let d = labeled(labels, 3);
            let plan = match stratified_folds(&d, k, seed) {
                Ok(p) => p,
                Err(_) => return Ok(()),
            };
            // Disjoint and covering.
            let mut seen = vec![0usize; d.n_samples()];
            for f in 0..k {
                let test = plan.test_indices(f);
                prop_assert!(!test.is_empty());
                test.iter().for_each(|&i| seen[i] += 1);
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            // Per-class balance to within one.
            for c in 0..3 {
                let counts: Vec<usize> = (0..k)
                    .map(|f| plan.test_indices(f).iter().filter(|&&i| d.label(i) == c).count())
                    .collect();
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }
    }
}
