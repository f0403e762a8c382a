//! Campaign orchestration: materializing datasets, bootstrap ground truth,
//! prompting, evaluation and report emission over one output directory.

mod config;
mod evaluate;
mod generate;
mod manifest;
mod query;
mod report;
mod truth;

pub use config::{CampaignConfig, DatasetSpec, Overrides, QueryConfig, ScoringConfig};
pub use evaluate::{AlgorithmSummaryRow, BinomialRow, Evaluation, GroundTruthRow, EVALUATION_SCHEMA};
pub use generate::DatasetRecord;
pub use manifest::{ConditionEntry, DatasetEntry, RunManifest, TOOL_VERSION};
pub use query::{IngestRow, PromptRow, QuarantineRow, QueryOutcome};
pub use report::{PlotData, PLOT_FILES};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::predictions::{Transport, UreqTransport};

/// File locations inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn datasets_dir(&self) -> PathBuf {
        self.root.join("datasets")
    }

    pub fn data_csv(&self, id: &str) -> PathBuf {
        self.datasets_dir().join(format!("{id}.csv"))
    }

    pub fn truth_graph(&self, id: &str) -> PathBuf {
        self.datasets_dir().join(format!("{id}.graph.json"))
    }

    pub fn dataset_record(&self, id: &str) -> PathBuf {
        self.datasets_dir().join(format!("{id}.info.json"))
    }

    pub fn ground_truth_dir(&self) -> PathBuf {
        self.root.join("ground_truth")
    }

    pub fn ground_truth(&self, id: &str, alg: Algorithm) -> PathBuf {
        self.ground_truth_dir().join(format!("{id}__{}.json", alg.name()))
    }

    pub fn prompts(&self) -> PathBuf {
        self.root.join("prompts.jsonl")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.jsonl")
    }

    pub fn quarantine(&self) -> PathBuf {
        self.root.join("quarantine.jsonl")
    }

    pub fn evaluation(&self) -> PathBuf {
        self.root.join("evaluation.json")
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.root.join("tables")
    }

    pub fn plots_dir(&self) -> PathBuf {
        self.root.join("plots")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

/// A validated configuration bound to its output directory.
pub struct Campaign {
    pub config: CampaignConfig,
    pub layout: Layout,
    transport: Arc<dyn Transport>,
    manifest: Mutex<RunManifest>,
}

impl Campaign {
    pub fn new(config: CampaignConfig) -> Result<Self> {
        Self::with_transport(config, Arc::new(UreqTransport))
    }

    pub fn with_transport(config: CampaignConfig, transport: Arc<dyn Transport>) -> Result<Self> {
        config.validate()?;
        let layout = Layout {
            root: config.out_dir.clone(),
        };
        fs::create_dir_all(&layout.root).map_err(|e| Error::io(&layout.root, e))?;
        let manifest = RunManifest::load_or_new(&layout.manifest(), &config.result_hash())?;
        Ok(Campaign {
            config,
            layout,
            transport,
            manifest: Mutex::new(manifest),
        })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        Self::new(CampaignConfig::load(path, overrides)?)
    }

    pub fn manifest(&self) -> RunManifest {
        self.manifest.lock().expect("manifest lock").clone()
    }

    fn update_manifest(&self, f: impl FnOnce(&mut RunManifest)) -> Result<()> {
        let mut m = self.manifest.lock().expect("manifest lock");
        f(&mut m);
        m.save(&self.layout.manifest())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.config.jobs {
            b = b.num_threads(j);
        }
        b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.config.models.iter().map(|m| m.id.clone()).collect()
    }

    /// Every phase in order. Responses come from the ingest file when one is
    /// configured, otherwise from the gateway.
    pub fn run_all(&self) -> Result<Evaluation> {
        self.generate()?;
        self.ground_truth()?;
        if self.config.query.ingest.is_some() {
            self.ingest()?;
        } else {
            self.query()?;
        }
        let eval = self.evaluate()?;
        self.report()?;
        Ok(eval)
    }
}

/// Writes through a temporary sibling so readers never see partial files.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        out.extend(serde_json::to_vec(r)?);
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: k + 1,
                column: e.column(),
                message: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
