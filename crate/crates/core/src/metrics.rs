//! Affinity, diversity and seed-aggregated accuracy.
//!
//! Affinity is stored as `acc(augmented val) − acc(clean val)` so that
//! higher means less distribution shift; the opposite orientation is kept
//! alongside it in reports.

use std::fmt::Write as _;

use crate::data::LabeledDataset;
use crate::error::{contract, Result};
use crate::recognition::{evaluate, Recognizer, TrainedRecognizer};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affinity {
    /// `aug_acc − clean_acc`
    pub value: f64,
    pub clean_acc: f64,
    pub aug_acc: f64,
}

impl Affinity {
    /// `clean_acc − aug_acc`
    pub fn clean_minus_augmented(&self) -> f64 {
        self.clean_acc - self.aug_acc
    }
}

/// Shift between clean and augmented validation data, seen through a
/// recognizer trained on clean data.
pub fn affinity(clean_trained: &Recognizer, clean_val: &LabeledDataset, aug_val: &LabeledDataset) -> Result<Affinity> {
    contract!(
        clean_val.num_classes() == aug_val.num_classes(),
        "validation sets disagree on K ({} vs {})",
        clean_val.num_classes(),
        aug_val.num_classes()
    );
    let clean_acc = evaluate(clean_trained, clean_val)?.accuracy;
    let aug_acc = evaluate(clean_trained, aug_val)?.accuracy;
    Ok(Affinity {
        value: aug_acc - clean_acc,
        clean_acc,
        aug_acc,
    })
}

/// Validation loss minus training loss at the restored epoch.
pub fn diversity(trained: &TrainedRecognizer) -> Result<f64> {
    contract!(
        trained.best_epoch >= 1 && trained.best_epoch <= trained.history.len(),
        "training history does not contain the restored epoch"
    );
    let b = trained.best();
    Ok(b.val_loss - b.train_loss)
}

/// `(mean, sample std / √n)`. A single value has zero standard error.
pub fn seed_stats(values: &[f64]) -> Result<(f64, f64)> {
    contract!(!values.is_empty(), "seed_stats needs at least one value");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Metrics of one augmentation setting across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityDiversityReport {
    /// Mean over seeds.
    pub affinity: f64,
    pub diversity: f64,
    pub accuracy_mean: f64,
    pub accuracy_se: f64,
    pub seeds: Vec<u64>,
    /// Per-seed validation accuracies, aligned with `seeds`.
    pub accuracies: Vec<f64>,
    /// `key → value` records of the inputs (dataset checksums, checkpoints).
    pub provenance: Vec<(String, String)>,
}

impl AffinityDiversityReport {
    /// Aggregates per-seed `(accuracy, affinity, diversity)` triples.
    pub fn from_runs(seeds: Vec<u64>, runs: &[(f64, f64, f64)], provenance: Vec<(String, String)>) -> Result<Self> {
        contract!(!seeds.is_empty(), "a report needs at least one seed");
        contract!(seeds.len() == runs.len(), "{} seeds for {} runs", seeds.len(), runs.len());
        let accuracies: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let (accuracy_mean, accuracy_se) = seed_stats(&accuracies)?;
        let n = runs.len() as f64;
        let affinity = runs.iter().map(|r| r.1).sum::<f64>() / n;
        let diversity = runs.iter().map(|r| r.2).sum::<f64>() / n;
        contract!(
            affinity.is_finite() && diversity.is_finite(),
            "affinity and diversity must be finite"
        );
        Ok(AffinityDiversityReport {
            affinity,
            diversity,
            accuracy_mean,
            accuracy_se,
            seeds,
            accuracies,
            provenance,
        })
    }

    /// `key value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let accs: Vec<String> = self.accuracies.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "accuracy_mean {}", self.accuracy_mean);
        let _ = writeln!(s, "accuracy_se {}", self.accuracy_se);
        let _ = writeln!(s, "affinity {}", self.affinity);
        let _ = writeln!(s, "affinity_clean_minus_augmented {}", -self.affinity);
        let _ = writeln!(s, "diversity {}", self.diversity);
        let _ = writeln!(s, "seeds {}", seeds.join(","));
        let _ = writeln!(s, "accuracies {}", accs.join(","));
        for (k, v) in &self.provenance {
            let _ = writeln!(s, "input {k} {v}");
        }
        s
    }
}
