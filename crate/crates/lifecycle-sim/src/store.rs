//! Append-only run store: one directory per run holding a manifest and
//! line-delimited JSON record files.
//!
//! Records are self-delimiting (one JSON object per line), so readers can
//! stream a store while a single writer appends. Trial records are
//! append-only within a run; evaluations are a pure function of the records
//! and are rewritten wholesale.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::agent::TrialRecord;
use crate::calibration::CalibratedParameters;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const CALIBRATIONS_FILE: &str = "calibrations.jsonl";
pub const EVALUATIONS_FILE: &str = "evaluations.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("record (de)serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("{0} is not a run store (missing manifest)")]
    MissingManifest(String),
    #[error("run store already exists at {0}")]
    AlreadyExists(String),
}

/// Identity and provenance of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_utc: DateTime<Utc>,
    pub tool_version: String,
    /// Subcommand that produced the run.
    pub command: String,
    pub mode: String,
    pub base_seed: u64,
    pub config_hash: String,
}

impl RunManifest {
    pub fn new(command: &str, mode: &str, base_seed: u64, config_hash: &str) -> Self {
        let created_utc = Utc::now();
        Self {
            run_id: format!("{}-{}", command, created_utc.format("%Y%m%dT%H%M%S%.3fZ")),
            created_utc,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            mode: mode.to_string(),
            base_seed,
            config_hash: config_hash.to_string(),
        }
    }
}

/// Handle to one run directory.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
    manifest: RunManifest,
}

impl RunStore {
    /// Create a fresh store; refuses to reuse a directory that already
    /// holds a manifest, since records are append-only within a run.
    pub fn create(root: &Path, manifest: RunManifest) -> Result<Self, StoreError> {
        if root.join(MANIFEST_FILE).exists() {
            return Err(StoreError::AlreadyExists(root.display().to_string()));
        }
        std::fs::create_dir_all(root).map_err(|source| StoreError::Io {
            path: root.display().to_string(),
            source,
        })?;
        let manifest_path = root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&manifest_path, text).map_err(|source| StoreError::Io {
            path: manifest_path.display().to_string(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn open(root: &Path) -> Result<Self, StoreError> {
        let manifest_path = root.join(MANIFEST_FILE);
        if !manifest_path.exists() {
            return Err(StoreError::MissingManifest(root.display().to_string()));
        }
        let text = std::fs::read_to_string(&manifest_path).map_err(|source| StoreError::Io {
            path: manifest_path.display().to_string(),
            source,
        })?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn append_line<T: Serialize>(&self, file: &str, value: &T) -> Result<(), StoreError> {
        let path = self.root.join(file);
        let mut handle = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| StoreError::Io {
                path: path.display().to_string(),
                source,
            })?;
        let mut line = serde_json::to_string(value)?;
        line.push('\n');
        handle
            .write_all(line.as_bytes())
            .map_err(|source| StoreError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(())
    }

    fn read_lines<T: DeserializeOwned>(&self, file: &str) -> Result<Vec<T>, StoreError> {
        let path = self.root.join(file);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let handle = File::open(&path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let reader = BufReader::new(handle);
        let mut values = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|source| StoreError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            values.push(serde_json::from_str(&line)?);
        }
        Ok(values)
    }

    pub fn append_trial(&self, record: &TrialRecord) -> Result<(), StoreError> {
        self.append_line(RECORDS_FILE, record)
    }

    pub fn append_trials<'a>(
        &self,
        records: impl IntoIterator<Item = &'a TrialRecord>,
    ) -> Result<(), StoreError> {
        for record in records {
            self.append_trial(record)?;
        }
        Ok(())
    }

    pub fn read_trials(&self) -> Result<Vec<TrialRecord>, StoreError> {
        self.read_lines(RECORDS_FILE)
    }

    pub fn append_calibration(&self, params: &CalibratedParameters) -> Result<(), StoreError> {
        self.append_line(CALIBRATIONS_FILE, params)
    }

    pub fn read_calibrations(&self) -> Result<Vec<CalibratedParameters>, StoreError> {
        self.read_lines(CALIBRATIONS_FILE)
    }

    /// Replace the evaluation file; evaluations are derived data.
    pub fn write_evaluations<T: Serialize>(&self, evaluations: &[T]) -> Result<(), StoreError> {
        let path = self.root.join(EVALUATIONS_FILE);
        let mut text = String::new();
        for evaluation in evaluations {
            text.push_str(&serde_json::to_string(evaluation)?);
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_evaluations<T: DeserializeOwned>(&self) -> Result<Vec<T>, StoreError> {
        self.read_lines(EVALUATIONS_FILE)
    }
}
