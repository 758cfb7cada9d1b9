//! Subject-disjoint cross-validation folds.
//!
//! Subjects (never individual images) are shuffled and partitioned into
//! near-equal test groups, so no subject contributes images to both sides
//! of any fold. When the subject count is not divisible by the fold count,
//! earlier folds take one extra subject each.

use super::Sample;
use crate::error::{Error, Result};
use crate::seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Test/train subject split of one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_subjects: Vec<String>,
    pub train_subjects: Vec<String>,
}

/// Complete cross-validation plan for a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_count: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Splits samples into (train, test) references for one fold.
    pub fn split<'a>(&self, fold: usize, samples: &'a [Sample]) -> (Vec<&'a Sample>, Vec<&'a Sample>) {
        let plan = &self.folds[fold];
        let test: BTreeSet<&str> = plan.test_subjects.iter().map(String::as_str).collect();
        let mut train_samples = Vec::new();
        let mut test_samples = Vec::new();
        for sample in samples {
            if test.contains(sample.subject_id.as_str()) {
                test_samples.push(sample);
            } else {
                train_samples.push(sample);
            }
        }
        (train_samples, test_samples)
    }
}

/// Builds the fold plan from the distinct subjects of a dataset.
pub fn make_folds(samples: &[Sample], fold_count: usize, seed_value: u64) -> Result<FoldPlan> {
    if fold_count == 0 {
        return Err(Error::Config("fold count must be positive".into()));
    }
    // BTreeSet fixes the pre-shuffle order regardless of sample order.
    let subjects: Vec<String> = samples
        .iter()
        .map(|s| s.subject_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if subjects.len() < fold_count {
        return Err(Error::Config(format!(
            "{} distinct subjects cannot fill {fold_count} folds",
            subjects.len()
        )));
    }

    let mut shuffled = subjects.clone();
    shuffled.shuffle(&mut seed::stream(seed_value, "folds", &[]));

    let base = shuffled.len() / fold_count;
    let remainder = shuffled.len() % fold_count;
    let mut folds = Vec::with_capacity(fold_count);
    let mut cursor = 0;
    for fold in 0..fold_count {
        let size = base + usize::from(fold < remainder);
        let mut test_subjects: Vec<String> = shuffled[cursor..cursor + size].to_vec();
        cursor += size;
        let mut train_subjects: Vec<String> = shuffled[..]
            .iter()
            .filter(|s| !test_subjects.contains(s))
            .cloned()
            .collect();
        test_subjects.sort();
        train_subjects.sort();
        folds.push(Fold {
            test_subjects,
            train_subjects,
        });
    }

    Ok(FoldPlan {
        fold_count,
        seed: seed_value,
        folds,
    })
}
