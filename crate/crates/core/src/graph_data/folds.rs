//! Subject-level stratified k-fold splitting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Cohort, GraphError};
use crate::seed::rng_for;

/// Assignment of every subject to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    k: usize,
    assignment: BTreeMap<String, usize>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, subject_id: &str) -> Option<usize> {
        self.assignment.get(subject_id).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    /// Subjects per fold.
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.assignment.values().for_each(|&f| sizes[f] += 1);
        sizes
    }

    /// Indices into `cohort.graphs()` of the held-out graphs of `fold`.
    pub fn test_indices(&self, cohort: &Cohort, fold: usize) -> Vec<usize> {
        self.indices_where(cohort, |f| f == fold)
    }

    /// Indices into `cohort.graphs()` of the training graphs for `fold`.
    pub fn train_indices(&self, cohort: &Cohort, fold: usize) -> Vec<usize> {
        self.indices_where(cohort, |f| f != fold)
    }

    fn indices_where(&self, cohort: &Cohort, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        cohort
            .graphs()
            .iter()
            .enumerate()
            .filter(|(_, g)| self.fold_of(g.subject_id()).is_some_and(&keep))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified split of the cohort's subjects into `k` folds.
///
/// Subjects of each class are shuffled and dealt round-robin, continuing the
/// fold counter across classes, so fold sizes differ by at most one subject
/// and every graph of a subject lands in that subject's fold.
pub fn split_folds(cohort: &Cohort, k: usize, seed: u64) -> Result<FoldSplit, GraphError> {
    if k < 2 {
        return Err(GraphError::FoldSplit {
            k,
            reason: "need at least 2 folds".into(),
        });
    }
    let subjects = cohort.subjects();
    let mut rng = rng_for(seed, "folds", k as u64);
    let mut assignment = BTreeMap::new();
    let mut next = 0;
    for label in [1u8, 0] {
        let mut ids: Vec<&str> = subjects
            .iter()
            .filter(|(_, l)| *l == label)
            .map(|(s, _)| *s)
            .collect();
        if ids.len() < k {
            return Err(GraphError::FoldSplit {
                k,
                reason: format!("only {} subjects with label {label}", ids.len()),
            });
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for id in ids {
            assignment.insert(id.to_string(), next % k);
            next += 1;
        }
    }
    Ok(FoldSplit { k, assignment })
}
