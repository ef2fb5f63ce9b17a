//! Run manifests: what a command read, wrote, and how long each stage took.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::settings::Settings;

pub const TOOL: &str = "imagan";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// Stage that was running when the command failed.
    pub stage: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name.
    pub command: Vec<String>,
    pub cwd: String,
    /// Every resolved setting, after flags, config file and defaults.
    pub config: BTreeMap<String, serde_json::Value>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileRecord>,
    /// Deterministic outputs; replay compares these.
    pub artifacts: Vec<FileRecord>,
    /// Outputs that carry wall-clock data and are not compared.
    pub volatile: Vec<String>,
    pub summary: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    pub seconds: f64,
    /// `ok` or `failed`.
    pub status: String,
    pub error: Option<ErrorRecord>,
}

impl RunManifest {
    pub fn new(command: Vec<String>) -> Self {
        let cwd = std::env::current_dir().map(|p| p.display().to_string()).unwrap_or_default();
        RunManifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            cwd,
            config: BTreeMap::new(),
            seeds: Vec::new(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
            volatile: Vec::new(),
            summary: BTreeMap::new(),
            stages: Vec::new(),
            seconds: 0.0,
            status: "running".into(),
            error: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        anyhow::ensure!(m.tool == TOOL, "{} is not an {TOOL} manifest", path.display());
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).with_context(|| format!("creating directory {}", p.display()))
        }
        _ => Ok(()),
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Mutable state of one command execution.
pub struct Run {
    pub manifest: RunManifest,
    pub settings: Settings,
    /// Name of the running stage, reported if the command fails.
    pub stage: String,
    started: Instant,
}

impl Run {
    pub fn new(command: Vec<String>) -> Self {
        Run {
            manifest: RunManifest::new(command),
            settings: Settings::empty(),
            stage: "setup".into(),
            started: Instant::now(),
        }
    }

    /// Runs `f` as a named stage and records its duration.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Run) -> Result<T>) -> Result<T> {
        self.stage = name.to_string();
        let t0 = Instant::now();
        let out = f(self)?;
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_sha256(path)?;
        self.input_record(FileRecord { path: path.display().to_string(), sha256 });
        Ok(())
    }

    /// Directory inputs are recorded by the checksum of their parsed content.
    pub fn input_checksum(&mut self, path: &Path, sha256: String) {
        self.input_record(FileRecord { path: path.display().to_string(), sha256 });
    }

    pub fn input_record(&mut self, r: FileRecord) {
        if !self.manifest.inputs.contains(&r) {
            self.manifest.inputs.push(r);
        }
    }

    pub fn artifact(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_sha256(path)?;
        self.artifact_record(FileRecord { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn artifact_record(&mut self, r: FileRecord) {
        // a rewritten path keeps its latest checksum
        self.manifest.artifacts.retain(|a| a.path != r.path);
        self.manifest.artifacts.push(r);
    }

    pub fn volatile(&mut self, path: &Path) {
        let p = path.display().to_string();
        if !self.manifest.volatile.contains(&p) {
            self.manifest.volatile.push(p);
        }
    }

    pub fn seed(&mut self, s: u64) {
        if !self.manifest.seeds.contains(&s) {
            self.manifest.seeds.push(s);
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.summary.insert(key.to_string(), value.to_string());
    }

    /// Writes `text` to `path` and records it as an artifact.
    pub fn write_artifact(&mut self, path: &Path, text: &str) -> Result<()> {
        write_text(path, text)?;
        self.artifact(path)
    }

    pub fn write_volatile(&mut self, path: &Path, text: &str) -> Result<()> {
        write_text(path, text)?;
        self.volatile(path);
        Ok(())
    }

    /// Closes the manifest with the outcome.
    pub fn finish(&mut self, error: Option<ErrorRecord>) {
        self.manifest.config = self.settings.snapshot().clone();
        self.manifest.seconds = self.started.elapsed().as_secs_f64();
        self.manifest.status = if error.is_some() { "failed" } else { "ok" }.into();
        self.manifest.error = error;
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `<file>.manifest.json` next to a single output file.
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
