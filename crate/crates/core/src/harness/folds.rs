//! Stratified fold assignment.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::synth::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Steps are the CV unit; steps of one recording may straddle folds.
    ByStep,
    /// Whole recordings are the CV unit.
    BySequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvPlan {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub grouping: Grouping,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            folds: 10,
            repeats: 10,
            seed: 0,
            grouping: Grouping::ByStep,
        }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.folds < 2 {
            return Err(HarnessError::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be positive".into()));
        }
        Ok(())
    }
}

/// Splits `(id, class)` pairs into `plan.folds` disjoint id sets.
///
/// Ids are sorted within each class, shuffled by a stream keyed on
/// `(seed, repeat, class)`, then dealt round-robin. The dealing offset
/// carries over from one class to the next so fold sizes stay within one
/// of each other.
pub fn make_folds(labels: &[(String, usize)], plan: &CvPlan, repeat: usize) -> Result<Vec<Vec<String>>, HarnessError> {
    plan.validate()?;
    let mut seen = HashSet::with_capacity(labels.len());
    let mut by_class: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (id, class) in labels {
        if !seen.insert(id.as_str()) {
            return Err(HarnessError::DuplicateId(id.clone()));
        }
        by_class.entry(*class).or_default().push(id);
    }
    let mut folds = vec![Vec::new(); plan.folds];
    let mut offset = 0;
    let repeat_seed = mix_seed(plan.seed, repeat as u64);
    for (class, mut ids) in by_class {
        if ids.len() < plan.folds {
            return Err(HarnessError::ClassTooSmall {
                class,
                count: ids.len(),
                folds: plan.folds,
            });
        }
        ids.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(repeat_seed, class as u64));
        ids.shuffle(&mut rng);
        for id in ids {
            folds[offset % plan.folds].push(id.to_string());
            offset += 1;
        }
    }
    Ok(folds)
}

/// Checks that `folds` partition exactly the ids of `labels`.
pub fn verify_partition(labels: &[(String, usize)], folds: &[Vec<String>]) -> Result<(), HarnessError> {
    let all: HashSet<&str> = labels.iter().map(|(id, _)| id.as_str()).collect();
    let mut seen = HashSet::with_capacity(all.len());
    for (k, fold) in folds.iter().enumerate() {
        for id in fold {
            if !all.contains(id.as_str()) {
                return Err(HarnessError::Config(format!("fold {k} holds unknown id {id}")));
            }
            if !seen.insert(id.as_str()) {
                return Err(HarnessError::Leakage {
                    repeat: 0,
                    fold: k,
                    id: id.clone(),
                });
            }
        }
    }
    if seen.len() != all.len() {
        return Err(HarnessError::Config(format!(
            "folds cover {} of {} ids",
            seen.len(),
            all.len()
        )));
    }
    Ok(())
}
