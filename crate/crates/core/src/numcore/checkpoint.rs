//! Checkpoint files: a text manifest followed by a little-endian `f64` payload.
//!
//! ```text
//! IMAGAN-CHECKPOINT
//! version 1
//! seed 42
//! meta hidden 512
//! tensor g/gru.wx 66x1536 0
//! tensor g/gru.b 1x1536 811008
//! payload 823296
//! <payload bytes>
//! ```
//!
//! Tensor offsets are byte offsets into the payload. Values are stored
//! bit-for-bit, so a round trip is exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::array::Array;
use super::params::ParamSet;
use crate::error::{contract, Error, Result};

pub const CHECKPOINT_MAGIC: &str = "IMAGAN-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamSet,
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(params: ParamSet) -> Self {
        Checkpoint {
            params,
            meta: BTreeMap::new(),
        }
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Load(format!("checkpoint is missing meta key {key:?}")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let s = self.meta_str(key)?;
        s.parse()
            .map_err(|_| Error::Load(format!("checkpoint meta {key:?} has bad value {s:?}")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = format!(
            "{CHECKPOINT_MAGIC}\nversion {CHECKPOINT_VERSION}\nseed {}\n",
            self.params.seed()
        );
        for (k, v) in &self.meta {
            contract!(
                is_token(k) && !v.contains('\n'),
                "checkpoint meta {k:?} is not representable"
            );
            header.push_str(&format!("meta {k} {v}\n"));
        }
        let mut payload = Vec::new();
        for (name, p) in self.params.iter() {
            contract!(is_token(name), "parameter name {name:?} is not representable");
            header.push_str(&format!(
                "tensor {name} {} {}\n",
                p.value.shape(),
                payload.len()
            ));
            for v in p.value.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        header.push_str(&format!("payload {}\n", payload.len()));
        let mut out = header.into_bytes();
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Load("truncated checkpoint header".into()))?;
            pos += nl + 1;
            std::str::from_utf8(&rest[..nl])
                .map_err(|_| Error::Load("checkpoint header is not utf-8".into()))
        };
        if next_line()? != CHECKPOINT_MAGIC {
            return Err(Error::Load("not a checkpoint file".into()));
        }
        let version = next_line()?;
        if version != format!("version {CHECKPOINT_VERSION}") {
            return Err(Error::Load(format!(
                "unsupported checkpoint {version:?} (expected version {CHECKPOINT_VERSION})"
            )));
        }
        let seed: u64 = next_line()?
            .strip_prefix("seed ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Load("bad seed line".into()))?;
        let mut meta = BTreeMap::new();
        let mut tensors: Vec<(String, Vec<usize>, usize)> = Vec::new();
        let payload_len: usize = loop {
            let line = next_line()?;
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let f: Vec<&str> = rest.split(' ').collect();
                if f.len() != 3 {
                    return Err(Error::Load(format!("bad tensor line {line:?}")));
                }
                let dims: Vec<usize> = f[1]
                    .split('x')
                    .map(|d| d.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Load(format!("bad tensor shape {:?}", f[1])))?;
                let off = f[2]
                    .parse()
                    .map_err(|_| Error::Load(format!("bad tensor offset {:?}", f[2])))?;
                tensors.push((f[0].to_string(), dims, off));
            } else if let Some(rest) = line.strip_prefix("payload ") {
                break rest
                    .parse()
                    .map_err(|_| Error::Load("bad payload line".into()))?;
            } else {
                return Err(Error::Load(format!("unexpected checkpoint line {line:?}")));
            }
        };
        let payload = &bytes[pos..];
        if payload.len() != payload_len {
            return Err(Error::Load(format!(
                "checkpoint payload has {} bytes, manifest says {payload_len}",
                payload.len()
            )));
        }
        let mut params = ParamSet::new(seed);
        for (name, dims, off) in tensors {
            let n: usize = dims.iter().product();
            let end = off
                .checked_add(n * 8)
                .filter(|&e| e <= payload.len())
                .ok_or_else(|| Error::Load(format!("tensor {name} overruns payload")))?;
            let data = payload[off..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let arr = Array::from_vec(&dims, data)
                .map_err(|e| Error::Load(format!("tensor {name}: {e}")))?;
            params
                .insert(&name, arr)
                .map_err(|e| Error::Load(format!("tensor {name}: {e}")))?;
        }
        Ok(Checkpoint { params, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

/// Copies `src` into `dst` with every name prefixed by `prefix/`.
pub fn merge_prefixed(dst: &mut ParamSet, prefix: &str, src: &ParamSet) -> Result<()> {
    for (name, p) in src.iter() {
        dst.insert(&format!("{prefix}/{name}"), p.value.clone())?;
    }
    Ok(())
}

/// Extracts the entries under `prefix/`, stripping the prefix.
pub fn split_prefixed(src: &ParamSet, prefix: &str, seed: u64) -> Result<ParamSet> {
    let mut out = ParamSet::new(seed);
    let pre = format!("{prefix}/");
    for (name, p) in src.iter() {
        if let Some(rest) = name.strip_prefix(&pre) {
            out.insert(rest, p.value.clone())?;
        }
    }
    if out.is_empty() {
        return Err(Error::Load(format!("checkpoint has no entries under {prefix:?}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        let mut p = ParamSet::new(99);
        p.insert("a.w", Array::from_vec(&[2, 3], vec![1.5, -0.0, 3.25e-300, 7.0, f64::MIN_POSITIVE, -2.0]).unwrap())
            .unwrap();
        p.insert("b", Array::scalar(0.1)).unwrap();
        let mut c = Checkpoint::new(p);
        c.meta.insert("hidden".into(), "64".into());
        c.meta.insert("lambda1".into(), "10".into());
        c
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.params.seed(), 99);
    }

    #[test]
    fn version_mismatch_rejected() {
        let bytes = sample().to_bytes().unwrap();
        let s = String::from_utf8_lossy(&bytes).replacen("version 1", "version 2", 1);
        assert!(matches!(
            Checkpoint::from_bytes(s.as_bytes()),
            Err(Error::Load(_))
        ));
    }

    #[test]
    fn truncated_payload_rejected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn prefixes_split_back() {
        let c = sample();
        let mut merged = ParamSet::new(1);
        merge_prefixed(&mut merged, "g", &c.params).unwrap();
        let back = split_prefixed(&merged, "g", 99).unwrap();
        assert_eq!(back, c.params);
        assert!(split_prefixed(&merged, "f", 1).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_bits_round_trip(vals in proptest::collection::vec(any::<u64>(), 1..40), seed in any::<u64>()) {
            let data: Vec<f64> = vals.iter().map(|&b| {
                let f = f64::from_bits(b);
                if f.is_finite() { f } else { 0.5 }
            }).collect();
            let mut p = ParamSet::new(seed);
            p.insert("x", Array::from_vec(&[data.len()], data).unwrap()).unwrap();
            let c = Checkpoint::new(p);
            let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
            for (a, b) in back.params.value("x").unwrap().data().iter().zip(c.params.value("x").unwrap().data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
