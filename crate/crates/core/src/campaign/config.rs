use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::DatasetKind;
use crate::data::NoiseSpec;
use crate::discovery::{Algorithm, AlgorithmParams};
use crate::error::{Error, Result};
use crate::metrics::{CiMethod, MetricMode, ScoringOptions};
use crate::predictions::{EndpointConfig, Formulation, QueryMode};

fn default_runs() -> usize {
    10
}

fn default_n_samples() -> usize {
    1000
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_formulations() -> Vec<Formulation> {
    Formulation::ALL.to_vec()
}

fn default_weight_low() -> f64 {
    0.5
}

fn default_weight_high() -> f64 {
    2.0
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::Gaussian { std: 1.0 }
}

fn default_ci_level() -> f64 {
    0.95
}

fn default_replay_store() -> PathBuf {
    PathBuf::from("replay.jsonl")
}

/// One registry entry. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Benchmark {
        id: String,
        bif: PathBuf,
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        #[serde(default)]
        complexity: Option<String>,
    },
    Synthetic {
        id: String,
        nodes: usize,
        edge_prob: f64,
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        /// Graph and data seed; derived from the campaign seed when absent.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_weight_low")]
        weight_low: f64,
        #[serde(default = "default_weight_high")]
        weight_high: f64,
        #[serde(default = "default_noise")]
        noise: NoiseSpec,
        #[serde(default)]
        complexity: Option<String>,
    },
}

impl DatasetSpec {
    pub fn id(&self) -> &str {
        match self {
            DatasetSpec::Benchmark { id, .. } | DatasetSpec::Synthetic { id, .. } => id,
        }
    }

    pub fn kind(&self) -> DatasetKind {
        match self {
            DatasetSpec::Benchmark { .. } => DatasetKind::Benchmark,
            DatasetSpec::Synthetic { .. } => DatasetKind::Synthetic,
        }
    }

    /// The spec with its BIF path reduced to the file name, so hashes do not
    /// depend on where the repository is checked out.
    pub fn portable(&self) -> DatasetSpec {
        let mut d = self.clone();
        if let DatasetSpec::Benchmark { bif, .. } = &mut d {
            *bif = bif.file_name().map(PathBuf::from).unwrap_or_default();
        }
        d
    }

    pub fn n_samples(&self) -> usize {
        match self {
            DatasetSpec::Benchmark { n_samples, .. } | DatasetSpec::Synthetic { n_samples, .. } => *n_samples,
        }
    }

    pub fn complexity(&self) -> Option<&str> {
        match self {
            DatasetSpec::Benchmark { complexity, .. } | DatasetSpec::Synthetic { complexity, .. } => {
                complexity.as_deref()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringConfig {
    #[serde(default)]
    pub mode: MetricMode,
    #[serde(default)]
    pub ci_method: CiMethod,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            mode: MetricMode::default(),
            ci_method: CiMethod::default(),
            ci_level: default_ci_level(),
        }
    }
}

impl From<ScoringConfig> for ScoringOptions {
    fn from(s: ScoringConfig) -> Self {
        ScoringOptions {
            mode: s.mode,
            ci_method: s.ci_method,
            ci_level: s.ci_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    #[serde(default)]
    pub mode: QueryMode,
    #[serde(default = "default_replay_store")]
    pub replay_store: PathBuf,
    /// JSON-lines file of externally collected responses for `ingest`.
    #[serde(default)]
    pub ingest: Option<PathBuf>,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            mode: QueryMode::default(),
            replay_store: default_replay_store(),
            ingest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_formulations")]
    pub formulations: Vec<Formulation>,
    #[serde(default)]
    pub params: AlgorithmParams,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub query: QueryConfig,
    /// Random-baseline draws per model slot; the number of models when absent.
    #[serde(default)]
    pub random_baseline_slots: Option<usize>,
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub models: Vec<EndpointConfig>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<QueryMode>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, applies overrides, resolves relative paths against the config
    /// file's directory and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(m) = overrides.mode {
            cfg.query.mode = m;
        }
        if let Some(j) = overrides.jobs {
            cfg.jobs = Some(j);
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(o) = &overrides.out_dir {
            cfg.out_dir = o.clone();
        }
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        fix(&mut self.query.replay_store);
        if let Some(p) = self.query.ingest.as_mut() {
            fix(p);
        }
        for d in &mut self.datasets {
            if let DatasetSpec::Benchmark { bif, .. } = d {
                fix(bif);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::Config(format!("runs must be at least 2, got {}", self.runs)));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        unique("dataset id", self.datasets.iter().map(DatasetSpec::id))?;
        unique("model id", self.models.iter().map(|m| m.id.as_str()))?;
        unique("algorithm", self.algorithms.iter().map(|a| a.name()))?;
        unique("formulation", self.formulations.iter().map(|f| f.id()))?;
        if self.algorithms.is_empty() || self.formulations.is_empty() {
            return Err(Error::Config("algorithms and formulations must be non-empty".into()));
        }
        if !(self.scoring.ci_level > 0.0 && self.scoring.ci_level < 1.0) {
            return Err(Error::Config(format!("ci_level {} outside (0, 1)", self.scoring.ci_level)));
        }
        for d in &self.datasets {
            if d.id().is_empty() || d.id().contains(['/', '\\', '|']) {
                return Err(Error::Config(format!("dataset id '{}' is not a plain name", d.id())));
            }
            if d.n_samples() < 2 {
                return Err(Error::Config(format!("dataset {} needs at least 2 samples", d.id())));
            }
            match d {
                DatasetSpec::Benchmark { id, bif, .. } => {
                    if !bif.is_file() {
                        return Err(Error::Config(format!("dataset {id}: BIF file {} not found", bif.display())));
                    }
                }
                DatasetSpec::Synthetic {
                    id,
                    nodes,
                    edge_prob,
                    weight_low,
                    weight_high,
                    ..
                } => {
                    if *nodes < 2 {
                        return Err(Error::Config(format!("dataset {id}: need at least 2 nodes")));
                    }
                    if !(0.0..=1.0).contains(edge_prob) {
                        return Err(Error::Config(format!("dataset {id}: edge_prob {edge_prob} outside [0, 1]")));
                    }
                    if !(0.0 <= *weight_low && weight_low <= weight_high) {
                        return Err(Error::Config(format!("dataset {id}: invalid weight range")));
                    }
                }
            }
        }
        if self.query.mode != QueryMode::Replay {
            for m in &self.models {
                if m.base_url.is_empty() {
                    return Err(Error::Config(format!("model {} has no base_url for {} mode", m.id, self.query.mode)));
                }
            }
        }
        Ok(())
    }

    /// Hash of everything that determines results. Worker count, query mode
    /// and file locations are excluded.
    pub fn result_hash(&self) -> String {
        let mut c = self.clone();
        c.jobs = None;
        c.query.mode = QueryMode::Replay;
        c.out_dir = PathBuf::new();
        c.query.replay_store = PathBuf::new();
        c.query.ingest = None;
        c.datasets = c.datasets.iter().map(DatasetSpec::portable).collect();
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }
}

fn unique<'a>(what: &str, items: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for it in items {
        if !seen.insert(it) {
            return Err(Error::Config(format!("{what} '{it}' appears twice")));
        }
    }
    Ok(())
}
