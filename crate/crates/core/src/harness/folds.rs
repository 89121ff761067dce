use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_FOLDS: usize = 4;

/// Seeded assignment of case ids to `k` balanced folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, case_id: &str) -> Option<usize> {
        self.assignments.get(case_id).copied()
    }

    /// Case ids of each fold, sorted.
    pub fn folds(&self) -> Vec<Vec<String>> {
        let mut folds = vec![Vec::new(); self.k];
        for (id, &f) in &self.assignments {
            folds[f].push(id.clone());
        }
        folds
    }

    pub fn test_ids(&self, fold: usize) -> Vec<String> {
        self.folds().into_iter().nth(fold).unwrap_or_default()
    }

    pub fn train_ids(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Shuffles the (sorted) ids with the seed and deals them round-robin, so
/// fold sizes differ by at most one.
pub fn make_folds<S: AsRef<str>>(case_ids: &[S], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::InvalidConfig("fold count must be positive".into()));
    }
    let mut ids: Vec<String> = case_ids.iter().map(|s| s.as_ref().to_owned()).collect();
    ids.sort();
    let before = ids.len();
    ids.dedup();
    if ids.len() != before {
        return Err(Error::InvalidConfig("duplicate case ids".into()));
    }
    if ids.len() < k {
        return Err(Error::InvalidConfig(format!(
            "{} cases cannot fill {k} folds",
            ids.len()
        )));
    }
    ids.shuffle(&mut seed::rng(seed, &[k as u64]));
    let assignments = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i % k))
        .collect();
    Ok(FoldPlan {
        k,
        seed,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("case_{i:03}")).collect()
    }

    #[test]
    fn eighty_two_cases_split_21_21_20_20() {
        let plan = make_folds(&ids(82), 4, 1).unwrap();
        let sizes: Vec<usize> = plan.folds().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![21, 21, 20, 20]);
    }

    #[test]
    fn four_cases_make_singleton_folds() {
        let plan = make_folds(&ids(4), 4, 9).unwrap();
        assert!(plan.folds().iter().all(|f| f.len() == 1));
        assert_eq!(plan.train_ids(0).len(), 3);
    }

    #[test]
    fn too_few_cases_or_duplicates_fail() {
        assert!(make_folds(&ids(3), 4, 0).is_err());
        assert!(make_folds(&["a", "a", "b", "c", "d"], 4, 0).is_err());
        assert!(make_folds(&ids(4), 0, 0).is_err());
    }

    #[test]
    fn plan_is_deterministic_and_order_free() {
        let mut shuffled = ids(30);
        shuffled.reverse();
        assert_eq!(
            make_folds(&ids(30), 4, 5).unwrap(),
            make_folds(&shuffled, 4, 5).unwrap()
        );
        assert_ne!(
            make_folds(&ids(30), 4, 5).unwrap(),
            make_folds(&ids(30), 4, 6).unwrap()
        );
    }

    proptest! {
        #[test]
        fn folds_partition_the_cases(n in 1usize..200, k in 1usize..10, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let all = ids(n);
            let plan = make_folds(&all, k, seed).unwrap();
            let folds = plan.folds();
            let mut union: Vec<String> = folds.iter().flatten().cloned().collect();
            union.sort();
            prop_assert_eq!(&union, &all);
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for f in 0..k {
                prop_assert_eq!(plan.train_ids(f).len() + plan.test_ids(f).len(), n);
            }
        }
    }
}
