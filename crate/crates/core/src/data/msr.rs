//! MSR Action3D skeletons.
//!
//! One file per `aAA_sSS_eEE_skeleton*.txt` (action, subject, trial). Each
//! row is `x y z confidence` for one joint; 20 consecutive rows form a
//! frame. The confidence column is dropped. When both a `skeleton` and a
//! `skeleton3D` file exist for one recording, the 3D one is used.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::shrec::read_frames;
use super::{LabeledDataset, SkeletonSequence};
use crate::error::{Error, Result};
use crate::numcore::Array;

pub const MSR_JOINTS: usize = 20;
pub const MSR_CLASSES: usize = 20;

/// `(action, subject, trial, is_3d)` from a file name.
fn parse_name(name: &str) -> Option<(u32, u32, u32, bool)> {
    let stem = name.strip_suffix(".txt")?;
    let mut it = stem.splitn(4, '_');
    let num = |s: Option<&str>, p: char| s?.strip_prefix(p)?.parse::<u32>().ok();
    let a = num(it.next(), 'a')?;
    let s = num(it.next(), 's')?;
    let e = num(it.next(), 'e')?;
    let kind = it.next()?;
    let is_3d = match kind {
        "skeleton" => false,
        "skeleton3D" => true,
        _ => return None,
    };
    Some((a, s, e, is_3d))
}

fn read_skeleton(path: &Path) -> Result<Array> {
    let rows = read_frames(path, 4)?;
    let n = rows.dims()[0];
    if n % MSR_JOINTS != 0 {
        return Err(Error::parse(
            path,
            n,
            format!("{n} joint rows is not a whole number of {MSR_JOINTS}-joint frames"),
        ));
    }
    let t = n / MSR_JOINTS;
    let mut data = Vec::with_capacity(t * MSR_JOINTS * 3);
    for r in 0..n {
        data.extend_from_slice(&rows.row(r)[..3]);
    }
    Array::from_vec(&[t, MSR_JOINTS * 3], data)
}

/// Loads every skeleton file directly under `root`, ordered by
/// (action, subject, trial).
pub fn load_msr(root: &Path) -> Result<LabeledDataset> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut files: BTreeMap<(u32, u32, u32), (bool, PathBuf)> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some((a, s, e, is_3d)) = parse_name(&name) else {
            continue;
        };
        if a == 0 || a as usize > MSR_CLASSES {
            return Err(Error::Load(format!("{name}: action {a} outside 1..={MSR_CLASSES}")));
        }
        let slot = files.entry((a, s, e)).or_insert((is_3d, entry.path()));
        if is_3d && !slot.0 {
            *slot = (true, entry.path());
        }
    }
    if files.is_empty() {
        return Err(Error::Load(format!("no MSR skeleton files in {}", root.display())));
    }
    let mut samples = Vec::with_capacity(files.len());
    for ((a, s, _), (_, path)) in files {
        let frames = read_skeleton(&path)?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        samples.push(SkeletonSequence::new(frames, a as usize - 1, s, name)?);
    }
    LabeledDataset::new("msr3d", MSR_CLASSES, MSR_JOINTS, samples)
}
