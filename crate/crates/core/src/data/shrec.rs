//! SHREC'17 Track hand-gesture skeletons.
//!
//! ```text
//! root/train_gestures.txt
//! root/test_gestures.txt
//! root/gesture_G/finger_F/subject_S/essai_E/skeletons_world.txt
//! ```
//!
//! List rows are `gesture finger subject essai label14 label28 frames`,
//! all 1-based. Each skeleton line holds 22 joints × 3 reals.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Fold, LabeledDataset, SkeletonSequence};
use crate::error::{Error, Result};
use crate::numcore::Array;

pub const SHREC_JOINTS: usize = 22;

/// Which label column of the list files becomes the class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShrecLabels {
    /// 14 gestures.
    Gestures14,
    /// 14 gestures × {one finger, whole hand}.
    Gestures28,
}

impl ShrecLabels {
    pub fn num_classes(self) -> usize {
        match self {
            ShrecLabels::Gestures14 => 14,
            ShrecLabels::Gestures28 => 28,
        }
    }
}

struct ListRow {
    gesture: u32,
    finger: u32,
    subject: u32,
    essai: u32,
    label14: usize,
    label28: usize,
}

fn read_list(path: &Path) -> Result<Vec<ListRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<u32> = line
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, i + 1, format!("non-integer token in {line:?}")))?;
        if f.len() != 7 {
            return Err(Error::parse(path, i + 1, format!("expected 7 fields, found {}", f.len())));
        }
        if f[4] == 0 || f[4] > 14 || f[5] == 0 || f[5] > 28 {
            return Err(Error::parse(path, i + 1, "label out of range"));
        }
        rows.push(ListRow {
            gesture: f[0],
            finger: f[1],
            subject: f[2],
            essai: f[3],
            label14: f[4] as usize - 1,
            label28: f[5] as usize - 1,
        });
    }
    Ok(rows)
}

/// Reads a whitespace-separated real matrix with `width` tokens per line.
pub(crate) fn read_frames(path: &Path, width: usize) -> Result<Array> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let mut t = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("malformed number {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, i + 1, format!("non-finite value {tok:?}")));
            }
            data.push(v);
        }
        let n = data.len() - before;
        if n != width {
            return Err(Error::parse(path, i + 1, format!("expected {width} values per frame, found {n}")));
        }
        t += 1;
    }
    if t == 0 {
        return Err(Error::Load(format!("{} contains no frames", path.display())));
    }
    Array::from_vec(&[t, width], data)
}

fn sequence_path(root: &Path, r: &ListRow) -> PathBuf {
    root.join(format!("gesture_{}", r.gesture))
        .join(format!("finger_{}", r.finger))
        .join(format!("subject_{}", r.subject))
        .join(format!("essai_{}", r.essai))
        .join("skeletons_world.txt")
}

/// Loads every sequence named by the two list files, train list first.
/// Samples carry their list membership as a [`Fold`] tag.
pub fn load_shrec(root: &Path, labels: ShrecLabels) -> Result<LabeledDataset> {
    let mut samples = Vec::new();
    for (list, fold) in [("train_gestures.txt", Fold::Train), ("test_gestures.txt", Fold::Test)] {
        for r in read_list(&root.join(list))? {
            let path = sequence_path(root, &r);
            let frames = read_frames(&path, SHREC_JOINTS * 3)?;
            let label = match labels {
                ShrecLabels::Gestures14 => r.label14,
                ShrecLabels::Gestures28 => r.label28,
            };
            let rel = path.strip_prefix(root).unwrap_or(&path).display().to_string();
            samples.push(SkeletonSequence::new(frames, label, r.subject, rel)?.with_fold(Some(fold)));
        }
    }
    if samples.is_empty() {
        return Err(Error::Load(format!("no SHREC sequences listed under {}", root.display())));
    }
    LabeledDataset::new("shrec17", labels.num_classes(), SHREC_JOINTS, samples)
}
