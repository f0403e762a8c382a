use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub seed: u64,
    pub data_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionEntry {
    /// Hash of every input that determines the condition's output.
    pub hash: String,
    pub base_seed: u64,
    pub run_seeds: Vec<u64>,
    pub failed_runs: usize,
    pub completed_at: String,
}

/// Provenance for an output directory. The only file that carries
/// wall-clock times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub created_at: String,
    pub updated_at: String,
    pub datasets: BTreeMap<String, DatasetEntry>,
    pub conditions: BTreeMap<String, ConditionEntry>,
    /// Phase name to completion time.
    pub phases: BTreeMap<String, String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn new(config_hash: &str) -> Self {
        let t = now();
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            created_at: t.clone(),
            updated_at: t,
            datasets: BTreeMap::new(),
            conditions: BTreeMap::new(),
            phases: BTreeMap::new(),
        }
    }

    /// Loads the manifest at `path`, or starts a fresh one when absent.
    pub fn load_or_new(path: &Path, config_hash: &str) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::new(config_hash));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: RunManifest = serde_json::from_str(&text)?;
        m.config_hash = config_hash.to_string();
        m.tool_version = TOOL_VERSION.to_string();
        Ok(m)
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        self.updated_at = now();
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn mark_phase(&mut self, phase: &str) {
        self.phases.insert(phase.to_string(), now());
    }
}
