//! Run manifests: what was run, what was written, and which checks held.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub passed: bool,
    /// Worst deviation seen over the run.
    pub measured: f64,
    pub tolerance: f64,
}

impl InvariantResult {
    /// Passes when `measured <= tolerance`; NaN fails.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        InvariantResult { name: name.into(), passed: measured <= tolerance, measured, tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// File name relative to the manifest's directory.
    pub path: String,
    pub kind: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<FileEntry>,
    pub invariants: Vec<InvariantResult>,
    pub passed: bool,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            started_unix: unix_now(),
            finished_unix: 0.0,
            files: Vec::new(),
            invariants: Vec::new(),
            passed: true,
        }
    }

    pub fn add_file(&mut self, path: &Path, kind: &str, rows: usize) {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.files.push(FileEntry { path: name, kind: kind.into(), rows });
    }

    pub fn check(&mut self, result: InvariantResult) {
        if !result.passed {
            log::error!(
                "invariant {} failed: measured {:.3e} > tolerance {:.1e}",
                result.name,
                result.measured,
                result.tolerance
            );
        }
        self.invariants.push(result);
    }

    pub fn failures(&self) -> Vec<&InvariantResult> {
        self.invariants.iter().filter(|r| !r.passed).collect()
    }

    /// Stamps the finish time and writes pretty JSON.
    pub fn finish(&mut self, path: &Path) -> CliResult<()> {
        self.finished_unix = unix_now();
        self.passed = self.invariants.iter().all(|r| r.passed);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    /// Converts failed checks into the invariant-violation error.
    pub fn into_result(self) -> CliResult<RunManifest> {
        let failed: Vec<_> = self.failures().iter().map(|r| r.name.clone()).collect();
        if failed.is_empty() {
            Ok(self)
        } else {
            Err(CliError::Invariant(failed.join(", ")))
        }
    }
}
