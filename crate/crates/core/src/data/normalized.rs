//! Normalized dataset interchange format.
//!
//! ```text
//! IMAGAN-DATASET
//! version 1
//! name msr3d
//! classes 20
//! joints 20
//! length 76
//! samples 567
//! sample <label> <subject> <fold|-> <original-len> <frames> <sha256> <source>
//! <frames rows of J·3 reals>
//! ...
//! end
//! ```
//!
//! Reals use the shortest representation that parses back to the same
//! bits, and every record carries its checksum, so a round trip is exact
//! and any corruption is detected.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Fold, LabeledDataset, SkeletonSequence};
use crate::error::{Error, Result};
use crate::numcore::Array;

pub const NORMALIZED_MAGIC: &str = "IMAGAN-DATASET";
pub const NORMALIZED_VERSION: u32 = 1;

pub fn write_normalized(ds: &LabeledDataset, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{NORMALIZED_MAGIC}")?;
    writeln!(out, "version {NORMALIZED_VERSION}")?;
    writeln!(out, "name {}", ds.name)?;
    writeln!(out, "classes {}", ds.num_classes())?;
    writeln!(out, "joints {}", ds.joints())?;
    writeln!(out, "length {}", ds.max_len())?;
    writeln!(out, "samples {}", ds.len())?;
    let mut line = String::new();
    for s in ds.samples() {
        writeln!(
            out,
            "sample {} {} {} {} {} {} {}",
            s.label,
            s.subject,
            s.meta.fold.map_or("-", Fold::as_str),
            s.meta.original_len,
            s.len(),
            s.checksum(),
            s.meta.source
        )?;
        for t in 0..s.len() {
            line.clear();
            for (k, v) in s.frame(t).iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
    }
    writeln!(out, "end")
}

pub fn export_normalized(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_normalized(ds, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn import_normalized(path: &Path) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_normalized(&text, path)
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    file: &'a Path,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.it.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l)
            }
            None => Err(Error::Load(format!(
                "{} is truncated after line {}",
                self.file.display(),
                self.last
            ))),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.file, self.last, msg)
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| self.err(format!("expected `{key} <value>`, found {line:?}")))
    }
}

/// Parses the normalized text; `file` names the source in diagnostics.
pub fn read_normalized(text: &str, file: &Path) -> Result<LabeledDataset> {
    let mut lines = Lines {
        it: text.lines().enumerate(),
        file,
        last: 0,
    };
    if lines.next()? != NORMALIZED_MAGIC {
        return Err(Error::Load(format!("{} is not a normalized dataset file", file.display())));
    }
    let version: u32 = lines.keyed("version")?;
    if version != NORMALIZED_VERSION {
        return Err(Error::Load(format!(
            "{} has format version {version}, expected {NORMALIZED_VERSION}",
            file.display()
        )));
    }
    let name: String = lines.keyed("name")?;
    let classes: usize = lines.keyed("classes")?;
    let joints: usize = lines.keyed("joints")?;
    let length: usize = lines.keyed("length")?;
    let n: usize = lines.keyed("samples")?;
    let width = joints * 3;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let head = lines.next()?;
        let f: Vec<&str> = head.splitn(8, ' ').collect();
        if f.len() < 7 || f[0] != "sample" {
            return Err(lines.err(format!("expected a sample record, found {head:?}")));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| lines.err(format!("bad integer {s:?}")));
        let label = num(f[1])?;
        let subject: u32 = f[2].parse().map_err(|_| lines.err(format!("bad subject {:?}", f[2])))?;
        let fold = Fold::parse(f[3]).ok_or_else(|| lines.err(format!("bad fold {:?}", f[3])))?;
        let original_len = num(f[4])?;
        let t = num(f[5])?;
        let checksum = f[6].to_string();
        let source = f.get(7).copied().unwrap_or("").to_string();
        if t == 0 || t > length {
            return Err(lines.err(format!("frame count {t} outside 1..={length}")));
        }
        let mut data = Vec::with_capacity(t * width);
        for _ in 0..t {
            let row = lines.next()?;
            let before = data.len();
            for tok in row.split(' ') {
                data.push(tok.parse::<f64>().map_err(|_| lines.err(format!("malformed number {tok:?}")))?);
            }
            if data.len() - before != width {
                return Err(lines.err(format!("expected {width} values, found {}", data.len() - before)));
            }
        }
        let frames = Array::from_vec(&[t, width], data)?;
        let mut s = SkeletonSequence::new(frames, label, subject, source)
            .map_err(|e| lines.err(e.to_string()))?
            .with_fold(fold);
        s.meta.original_len = original_len;
        if s.checksum() != checksum {
            return Err(lines.err("sample checksum mismatch"));
        }
        samples.push(s);
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected `end` after the last sample"));
    }
    LabeledDataset::new(name, classes, joints, samples).map_err(|e| Error::Load(format!("{}: {e}", file.display())))
}
