//! `manifest.jsonl`: one JSON record per line, appended as a run progresses.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use vocalsep::train::TrainingConfig;

use crate::Precision;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub median_sdr: f64,
    pub median_sir: f64,
    pub tracks: usize,
    pub report: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Record {
    Start {
        config: TrainingConfig,
        seed: u64,
        start_step: u64,
        precision: Precision,
        data: PathBuf,
        disabled_losses: Vec<String>,
    },
    Resume {
        step: u64,
        checkpoint: PathBuf,
    },
    Checkpoint {
        step: u64,
        path: PathBuf,
    },
    End {
        end_step: u64,
        final_checkpoint: PathBuf,
        metrics: Option<Metrics>,
    },
}

pub struct Manifest {
    path: PathBuf,
    pub records: Vec<Record>,
}

impl Manifest {
    /// Starts the manifest of a fresh run directory.
    pub fn create(run_dir: &Path) -> anyhow::Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        anyhow::ensure!(!path.exists(), "{} already exists", path.display());
        Ok(Manifest { path, records: Vec::new() })
    }

    pub fn open(run_dir: &Path) -> anyhow::Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| crate::user_error(format!("cannot read {}: {e}", path.display())))?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<Record>, _>>()
            .with_context(|| format!("malformed {}", path.display()))?;
        Ok(Manifest { path, records })
    }

    pub fn append(&mut self, record: Record) -> anyhow::Result<()> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .with_context(|| format!("cannot write {}", self.path.display()))?;
        writeln!(file, "{}", serde_json::to_string(&record)?)?;
        self.records.push(record);
        Ok(())
    }

    pub fn is_finalized(&self) -> bool {
        self.records.iter().any(|r| matches!(r, Record::End { .. }))
    }

    pub fn precision(&self) -> Option<Precision> {
        self.records.iter().find_map(|r| match r {
            Record::Start { precision, .. } => Some(*precision),
            _ => None,
        })
    }

    pub fn latest_checkpoint(&self) -> Option<(u64, PathBuf)> {
        self.records.iter().rev().find_map(|r| match r {
            Record::Checkpoint { step, path } => Some((*step, path.clone())),
            _ => None,
        })
    }
}
