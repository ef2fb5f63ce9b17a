//! Setting resolution: command-line flag, then the command's table in the
//! config file, then the built-in default.
//!
//! A config file holds one table per command:
//!
//! ```toml
//! [train-gan]
//! hidden = 64
//! lr = 1e-3
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::errors::usage;

#[derive(Debug, Default)]
pub struct Settings {
    source: String,
    table: toml::Table,
    used: BTreeSet<String>,
    snapshot: BTreeMap<String, serde_json::Value>,
}

impl Settings {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Reads the `[command]` table of a config file. Other tables are ignored.
    pub fn load(path: &Path, command: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let root: toml::Table =
            toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        if let Some((k, _)) = root.iter().find(|(_, v)| !v.is_table()) {
            return Err(usage(format!(
                "config {}: top-level key {k:?} is not a command table",
                path.display()
            )));
        }
        let table = match root.get(command) {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => toml::Table::new(),
        };
        Ok(Settings {
            source: format!("{} [{command}]", path.display()),
            table,
            ..Self::default()
        })
    }

    fn table_value<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        self.used.insert(key.to_string());
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| usage(format!("config {}: bad value for {key:?}: {e}", self.source))),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, v: &T) -> Result<()> {
        self.snapshot.insert(key.to_string(), serde_json::to_value(v)?);
        Ok(())
    }

    pub fn get<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = match flag {
            Some(v) => {
                self.used.insert(key.to_string());
                v
            }
            None => self.table_value(key)?.unwrap_or(default),
        };
        self.record(key, &v)?;
        Ok(v)
    }

    pub fn opt<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => {
                self.used.insert(key.to_string());
                Some(v)
            }
            None => self.table_value(key)?,
        };
        self.record(key, &v)?;
        Ok(v)
    }

    /// Records a value that is not user-settable (e.g. a path).
    pub fn fixed<T: Serialize>(&mut self, key: &str, v: &T) -> Result<()> {
        self.record(key, v)
    }

    /// Rejects config keys no setting asked for, which are usually typos.
    pub fn check_unused(&self) -> Result<()> {
        let unknown: Vec<&String> = self.table.keys().filter(|k| !self.used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(usage(format!("config {}: unknown keys {unknown:?}", self.source)))
        }
    }

    pub fn snapshot(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.snapshot
    }
}
