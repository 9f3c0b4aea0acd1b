//! JSON record of a run: what was asked for, what was written.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    /// Relative to the run directory.
    pub file: String,
    pub field: String,
    pub time: f64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    /// Effective configuration as accepted by the config parser.
    pub config_text: String,
    pub config: RunConfig,
    pub nx: usize,
    pub ny: usize,
    pub base_seed: u64,
    pub dt: f64,
    pub nsteps: usize,
    pub snapshots: Vec<SnapshotEntry>,
    pub outputs: Vec<String>,
    pub failures: usize,
    /// Not part of the reproducible output.
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let e = &config.ensemble;
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_text: config.to_text(),
            config: config.clone(),
            nx: e.nx,
            ny: e.ny,
            base_seed: e.base_seed,
            dt: 0.0,
            nsteps: 0,
            snapshots: Vec::new(),
            outputs: Vec::new(),
            failures: 0,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks that every listed snapshot exists with its declared size.
    pub fn check_files(&self, dir: &Path) -> Result<()> {
        for s in &self.snapshots {
            let path = dir.join(&s.file);
            let len = fs::metadata(&path)
                .map_err(|e| Error::Snapshot {
                    path: path.clone(),
                    reason: e.to_string(),
                })?
                .len();
            if len != s.bytes {
                return Err(Error::Snapshot {
                    path,
                    reason: format!("expected {} bytes, found {len}", s.bytes),
                });
            }
        }
        Ok(())
    }
}
