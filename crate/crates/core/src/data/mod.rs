//! Skeleton datasets: loaders, Savitzky–Golay smoothing, last-row padding,
//! splits and a normalized text interchange format.
//!
//! Loaders return sequences at their original lengths. [`LabeledDataset::clean`]
//! smooths every sequence and then pads all of them to the longest one,
//! which establishes the fixed-length invariant the models rely on.

mod msr;
mod normalized;
mod savgol;
mod shrec;
mod split;
mod synthetic;

pub use msr::{load_msr, MSR_CLASSES, MSR_JOINTS};
pub use normalized::{export_normalized, import_normalized, read_normalized, write_normalized, NORMALIZED_MAGIC, NORMALIZED_VERSION};
pub use savgol::{savgol_coefficients, savgol_filter, savgol_smooth, savgol_weights};
pub use shrec::{load_shrec, ShrecLabels, SHREC_JOINTS};
pub use split::{split, SplitSpec};
pub use synthetic::{toy_dataset, ToySpec};

use sha2::{Digest, Sha256};

use crate::error::{contract, Result};
use crate::numcore::Array;

/// Window length of the clean-data smoothing.
pub const CLEAN_WINDOW: usize = 7;
/// Polynomial order of the clean-data smoothing.
pub const CLEAN_ORDER: usize = 3;

/// Membership given by a dataset's official list files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fold {
    Train,
    Test,
}

impl Fold {
    pub fn as_str(self) -> &'static str {
        match self {
            Fold::Train => "train",
            Fold::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Option<Fold>> {
        match s {
            "train" => Some(Some(Fold::Train)),
            "test" => Some(Some(Fold::Test)),
            "-" => Some(None),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceMeta {
    /// File the sequence was read from, or a generator tag.
    pub source: String,
    /// Frame count before padding.
    pub original_len: usize,
    pub fold: Option<Fold>,
}

/// One motion sample: `T` frames of `J·3` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSequence {
    frames: Array,
    pub label: usize,
    pub subject: u32,
    pub meta: SequenceMeta,
}

impl SkeletonSequence {
    /// `frames` must be `[T, W]` with `T ≥ 1` and finite entries.
    pub fn new(frames: Array, label: usize, subject: u32, source: impl Into<String>) -> Result<Self> {
        let (t, _) = frames.matrix_dims()?;
        contract!(frames.is_finite(), "sequence has non-finite coordinates");
        Ok(SkeletonSequence {
            frames,
            label,
            subject,
            meta: SequenceMeta {
                source: source.into(),
                original_len: t,
                fold: None,
            },
        })
    }

    pub fn with_fold(mut self, fold: Option<Fold>) -> Self {
        self.meta.fold = fold;
        self
    }

    pub fn frames(&self) -> &Array {
        &self.frames
    }

    /// Replaces the frames, keeping label, subject and meta.
    pub fn with_frames(&self, frames: Array) -> Result<Self> {
        frames.matrix_dims()?;
        contract!(frames.is_finite(), "sequence has non-finite coordinates");
        Ok(SkeletonSequence {
            frames,
            label: self.label,
            subject: self.subject,
            meta: self.meta.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.dims()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates per frame, `J·3`.
    pub fn width(&self) -> usize {
        self.frames.dims()[1]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        self.frames.row(t)
    }

    /// SHA-256 over label, subject, original length, shape and coordinate bits.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.label as u64).to_le_bytes());
        h.update(u64::from(self.subject).to_le_bytes());
        h.update((self.meta.original_len as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.width() as u64).to_le_bytes());
        for v in self.frames.data() {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Frames `T+1..target` duplicate frame `T`; the original length is kept in meta.
pub fn pad_last_row(seq: &SkeletonSequence, target: usize) -> Result<SkeletonSequence> {
    let t = seq.len();
    contract!(target >= t, "cannot pad a {t}-frame sequence down to {target}");
    let w = seq.width();
    let mut data = Vec::with_capacity(target * w);
    data.extend_from_slice(seq.frames.data());
    let last = seq.frame(t - 1).to_vec();
    for _ in t..target {
        data.extend_from_slice(&last);
    }
    let mut out = seq.with_frames(Array::from_vec(&[target, w], data)?)?;
    out.meta.original_len = seq.meta.original_len;
    Ok(out)
}

/// A set of sequences sharing class count and joint count.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    num_classes: usize,
    joints: usize,
    samples: Vec<SkeletonSequence>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, num_classes: usize, joints: usize, samples: Vec<SkeletonSequence>) -> Result<Self> {
        contract!(num_classes >= 2, "a dataset needs at least 2 classes, got {num_classes}");
        contract!(joints >= 1, "a dataset needs at least one joint");
        for (i, s) in samples.iter().enumerate() {
            contract!(
                s.width() == joints * 3,
                "sample {i} has width {}, expected {}",
                s.width(),
                joints * 3
            );
            contract!(
                s.label < num_classes,
                "sample {i} has label {} outside [0, {num_classes})",
                s.label
            );
        }
        Ok(LabeledDataset {
            name: name.into(),
            num_classes,
            joints,
            samples,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn width(&self) -> usize {
        self.joints * 3
    }

    pub fn samples(&self) -> &[SkeletonSequence] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<SkeletonSequence> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.samples.iter().map(SkeletonSequence::len).max().unwrap_or(0)
    }

    /// The shared frame count, when every sample has the same length.
    pub fn fixed_len(&self) -> Option<usize> {
        let t = self.samples.first()?.len();
        self.samples.iter().all(|s| s.len() == t).then_some(t)
    }

    /// Like [`fixed_len`](Self::fixed_len) but a contract error when ragged or empty.
    pub fn require_fixed_len(&self) -> Result<usize> {
        self.fixed_len().ok_or_else(|| {
            crate::Error::Contract(format!(
                "dataset {:?} is empty or not padded to a common length",
                self.name
            ))
        })
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for s in &self.samples {
            c[s.label] += 1;
        }
        c
    }

    /// Same header, different samples.
    pub fn with_samples(&self, samples: Vec<SkeletonSequence>) -> Result<Self> {
        LabeledDataset::new(self.name.clone(), self.num_classes, self.joints, samples)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            contract!(i < self.len(), "index {i} out of range for {} samples", self.len());
            out.push(self.samples[i].clone());
        }
        self.with_samples(out)
    }

    pub fn filter_classes(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        self.with_samples(self.samples.iter().filter(|s| keep(s.label)).cloned().collect())
    }

    /// Concatenation of two datasets with the same header.
    pub fn concat(&self, other: &LabeledDataset) -> Result<Self> {
        contract!(
            self.num_classes == other.num_classes && self.joints == other.joints,
            "cannot concatenate datasets with different class or joint counts"
        );
        let mut s = self.samples.clone();
        s.extend(other.samples.iter().cloned());
        self.with_samples(s)
    }

    /// Savitzky–Golay smoothing of every sample, then last-row padding to the
    /// longest sample.
    pub fn clean(&self, window: usize, order: usize) -> Result<Self> {
        contract!(!self.is_empty(), "cannot clean an empty dataset");
        let smoothed: Vec<SkeletonSequence> = self
            .samples
            .iter()
            .map(|s| savgol_smooth(s, window, order))
            .collect::<Result<_>>()?;
        let target = self.max_len();
        let padded = smoothed
            .iter()
            .map(|s| pad_last_row(s, target))
            .collect::<Result<_>>()?;
        self.with_samples(padded)
    }

    /// SHA-256 over the header and every per-sample checksum.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update((self.num_classes as u64).to_le_bytes());
        h.update((self.joints as u64).to_le_bytes());
        for s in &self.samples {
            h.update(s.checksum().as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[[f64; 3]]) -> SkeletonSequence {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        SkeletonSequence::new(Array::from_rows(&rows).unwrap(), 0, 1, "t").unwrap()
    }

    #[test]
    fn padding_repeats_last_row() {
        let s = seq(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]);
        let p = pad_last_row(&s, 5).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.frame(3), s.frame(2));
        assert_eq!(p.frame(4), s.frame(2));
        assert_eq!(p.meta.original_len, 3);
        assert_eq!(pad_last_row(&s, 3).unwrap(), s);
        assert!(pad_last_row(&s, 2).is_err());
    }

    #[test]
    fn dataset_rejects_bad_labels_and_widths() {
        let s = seq(&[[0.0; 3]]);
        assert!(LabeledDataset::new("x", 1, 1, vec![s.clone()]).is_err());
        assert!(LabeledDataset::new("x", 2, 2, vec![s.clone()]).is_err());
        let mut bad = s.clone();
        bad.label = 2;
        assert!(LabeledDataset::new("x", 2, 1, vec![bad]).is_err());
        assert!(LabeledDataset::new("x", 2, 1, vec![s]).is_ok());
    }

    #[test]
    fn clean_pads_to_max_length() {
        let a = seq(&[[1.0; 3]; 4]);
        let b = seq(&[[2.0; 3]; 9]);
        let d = LabeledDataset::new("x", 2, 1, vec![a, b]).unwrap();
        assert_eq!(d.fixed_len(), None);
        let c = d.clean(CLEAN_WINDOW, CLEAN_ORDER).unwrap();
        assert_eq!(c.fixed_len(), Some(9));
        assert_eq!(c.samples()[0].meta.original_len, 4);
        for v in c.samples()[0].frame(8) {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn checksum_tracks_bits() {
        let a = seq(&[[0.0, 1.0, 2.0]]);
        let b = seq(&[[-0.0, 1.0, 2.0]]);
        assert_ne!(a.checksum(), b.checksum());
        assert_eq!(a.checksum(), a.clone().checksum());
    }
}
