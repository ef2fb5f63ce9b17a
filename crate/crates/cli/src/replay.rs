//! Replays a manifest: re-runs its command line from its working directory
//! and compares every deterministic artifact's checksum with the record.

use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{Context, Result};

use crate::commands::suffixed;
use crate::errors::{usage, EXIT_FAILURE, EXIT_OK};
use crate::manifest::{FileRecord, RunManifest};

/// Manifest written by the re-run: `<manifest>.replay.json`.
pub fn replay_manifest_path(manifest: &Path) -> PathBuf {
    suffixed(manifest, ".replay.json")
}

/// The command line without any `--manifest` option.
pub fn strip_manifest_flag(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--manifest" {
            skip = true;
        } else if !a.starts_with("--manifest=") {
            out.push(a.clone());
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Same,
    Differs,
    Missing,
    /// Produced by the re-run but absent from the record.
    New,
}

/// Per-path comparison of recorded and re-run files, in record order.
pub fn compare(recorded: &[FileRecord], rerun: &[FileRecord], skip: &[String]) -> Vec<(String, Verdict)> {
    let mut out: Vec<(String, Verdict)> = recorded
        .iter()
        .filter(|r| !skip.contains(&r.path))
        .map(|r| {
            let v = match rerun.iter().find(|n| n.path == r.path) {
                Some(n) if n.sha256 == r.sha256 => Verdict::Same,
                Some(_) => Verdict::Differs,
                None => Verdict::Missing,
            };
            (r.path.clone(), v)
        })
        .collect();
    for n in rerun {
        if !skip.contains(&n.path) && !recorded.iter().any(|r| r.path == n.path) {
            out.push((n.path.clone(), Verdict::New));
        }
    }
    out
}

pub fn replay(path: &Path) -> Result<i32> {
    let original = RunManifest::load(path)?;
    if original.status != "ok" {
        return Err(usage(format!("{} records a failed run; only successful runs replay", path.display())));
    }
    let out = std::path::absolute(replay_manifest_path(path))?;
    let mut args = strip_manifest_flag(&original.command);
    args.push("--manifest".into());
    args.push(out.display().to_string());
    let exe = std::env::current_exe().context("locating the imagan executable")?;
    let status = Command::new(exe)
        .args(&args)
        .current_dir(&original.cwd)
        .status()
        .with_context(|| format!("re-running in {}", original.cwd))?;
    let rerun = RunManifest::load(&out)?;
    if !status.success() || rerun.status != "ok" {
        println!("replay failed: the re-run exited with {status}");
        return Ok(EXIT_FAILURE);
    }
    let mut ok = true;
    for (p, v) in compare(&original.inputs, &rerun.inputs, &[]) {
        if v != Verdict::Same {
            println!("input {} {p}", format!("{v:?}").to_lowercase());
            ok = false;
        }
    }
    let artifacts = compare(&original.artifacts, &rerun.artifacts, &original.volatile);
    for (p, v) in &artifacts {
        println!("artifact {} {p}", format!("{v:?}").to_lowercase());
        ok &= *v == Verdict::Same;
    }
    println!(
        "replay {}: {} artifacts compared, manifest {}",
        if ok { "identical" } else { "MISMATCH" },
        artifacts.len(),
        out.display()
    );
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}
