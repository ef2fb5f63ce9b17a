//! Train/validation partitions.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Fold, LabeledDataset};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum SplitSpec {
    /// Membership from the official list files (the samples' fold tags).
    Predefined,
    /// Samples whose subject is listed go to train, the rest to validation.
    Subjects { train: Vec<u32> },
    /// Odd-numbered subjects train, even-numbered validate.
    OddSubjects,
    /// Stratified per class: `round(ratio · n_c)` samples of each class train.
    Ratio { ratio: f64, seed: u64 },
}

/// Partitions `ds` into disjoint `(train, validation)` sets covering it.
pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    match spec {
        SplitSpec::Predefined => {
            for (i, s) in ds.samples().iter().enumerate() {
                match s.meta.fold {
                    Some(Fold::Train) => train.push(i),
                    Some(Fold::Test) => val.push(i),
                    None => {
                        return Err(Error::Split(format!(
                            "sample {i} ({}) has no predefined fold",
                            s.meta.source
                        )))
                    }
                }
            }
        }
        SplitSpec::Subjects { train: subjects } => {
            let present: BTreeSet<u32> = ds.samples().iter().map(|s| s.subject).collect();
            for s in subjects {
                if !present.contains(s) {
                    return Err(Error::Split(format!("subject {s} does not occur in {:?}", ds.name)));
                }
            }
            let set: BTreeSet<u32> = subjects.iter().copied().collect();
            for (i, s) in ds.samples().iter().enumerate() {
                if set.contains(&s.subject) {
                    train.push(i);
                } else {
                    val.push(i);
                }
            }
        }
        SplitSpec::OddSubjects => {
            for (i, s) in ds.samples().iter().enumerate() {
                if s.subject % 2 == 1 {
                    train.push(i);
                } else {
                    val.push(i);
                }
            }
        }
        SplitSpec::Ratio { ratio, seed } => {
            if !(*ratio > 0.0 && *ratio < 1.0) {
                return Err(Error::Split(format!("ratio must lie in (0, 1), got {ratio}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for c in 0..ds.num_classes() {
                let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples()[i].label == c).collect();
                idx.shuffle(&mut rng);
                let k = (ratio * idx.len() as f64).round() as usize;
                train.extend_from_slice(&idx[..k]);
                val.extend_from_slice(&idx[k..]);
            }
            train.sort_unstable();
            val.sort_unstable();
        }
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Split(format!(
            "split of {:?} leaves an empty side ({} train, {} validation)",
            ds.name,
            train.len(),
            val.len()
        )));
    }
    Ok((ds.subset(&train)?, ds.subset(&val)?))
}
