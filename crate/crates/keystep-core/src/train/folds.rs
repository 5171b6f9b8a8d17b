//! Fold assignment at take granularity.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::rng::seeded_rng;

use super::TrainError;

/// Cross-validation always uses five splits.
pub const NUM_FOLDS: usize = 5;

/// Which fold each take belongs to. A take's every graph — all context
/// windows, all views — stays inside its one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    map: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, take_id: &str) -> Option<usize> {
        self.map.get(take_id).copied()
    }

    /// Take ids assigned to `fold`, in input order is not preserved here —
    /// callers that need a stable order should filter their own take list.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.map.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn fold_sizes(&self) -> [usize; NUM_FOLDS] {
        let mut sizes = [0usize; NUM_FOLDS];
        for (_, f) in self.iter() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by round-robin assignment: fold sizes differ by
/// at most one, and the mapping depends only on the take list and seed.
pub fn make_folds(take_ids: &[String], seed: u64) -> Result<FoldAssignment, TrainError> {
    if take_ids.len() < NUM_FOLDS {
        return Err(TrainError::TooFewTakes {
            needed: NUM_FOLDS,
            folds: NUM_FOLDS,
            got: take_ids.len(),
        });
    }
    let mut order: Vec<&String> = take_ids.iter().collect();
    let mut rng = seeded_rng(seed);
    order.shuffle(&mut rng);
    let map = order
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i % NUM_FOLDS))
        .collect();
    Ok(FoldAssignment { map })
}
