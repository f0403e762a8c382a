use std::fs;

use serde::{Deserialize, Serialize};

use super::{read_json, sha256_hex, write_atomic, Campaign, DatasetEntry, DatasetSpec};
use crate::calibration::{DatasetInfo, DatasetKind};
use crate::data::{ancestral_sample, parse_bif, read_dataset, sample_sem, write_dataset, Dataset};
use crate::error::{Error, Result};
use crate::graphs::{generate_er_dag, Dag, GraphJson, MixedGraph};
use crate::predictions::{complexity_for, ConditionMeta, DataType};
use crate::seed;
use crate::discovery::Algorithm;

/// What downstream phases know about a materialized dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub kind: DatasetKind,
    pub n_nodes: usize,
    pub n_samples: usize,
    pub n_edges: usize,
    pub data_type: DataType,
    pub complexity: String,
    pub names: Vec<String>,
}

impl DatasetRecord {
    pub fn info(&self) -> DatasetInfo {
        DatasetInfo {
            id: self.id.clone(),
            kind: self.kind,
            n_nodes: self.n_nodes,
        }
    }

    pub fn meta(&self, algorithm: Algorithm) -> ConditionMeta {
        ConditionMeta {
            dataset: self.id.clone(),
            n_nodes: self.n_nodes,
            n_samples: self.n_samples,
            data_type: self.data_type,
            complexity: self.complexity.clone(),
            algorithm,
        }
    }
}

impl Campaign {
    pub(crate) fn data_seed(&self, spec: &DatasetSpec) -> u64 {
        match spec {
            DatasetSpec::Synthetic { seed: Some(s), .. } => *s,
            _ => seed::derive(self.config.seed, &format!("dataset|{}", spec.id())),
        }
    }

    fn materialize(&self, spec: &DatasetSpec) -> Result<(Dataset, Dag, DataType)> {
        let s = self.data_seed(spec);
        match spec {
            DatasetSpec::Benchmark { bif, n_samples, .. } => {
                let text = fs::read_to_string(bif).map_err(|e| Error::io(bif, e))?;
                let net = parse_bif(&text)?;
                let ds = ancestral_sample(&net, *n_samples, seed::derive(s, "sample"));
                Ok((ds, net.dag, DataType::Discrete))
            }
            DatasetSpec::Synthetic {
                nodes,
                edge_prob,
                n_samples,
                weight_low,
                weight_high,
                noise,
                ..
            } => {
                let dag = generate_er_dag(*nodes, *edge_prob, seed::derive(s, "graph"))?;
                let sample = sample_sem(&dag, *n_samples, *weight_low, *weight_high, *noise, seed::derive(s, "sample"))?;
                Ok((sample.data, dag, DataType::Continuous))
            }
        }
    }

    /// Writes data, truth graph and record for every dataset.
    pub fn generate(&self) -> Result<Vec<DatasetRecord>> {
        let pool = self.pool()?;
        let built: Vec<Result<(DatasetRecord, DatasetEntry)>> = pool.install(|| {
            use rayon::prelude::*;
            self.config
                .datasets
                .par_iter()
                .map(|spec| {
                    let (ds, dag, data_type) = self.materialize(spec)?;
                    let id = spec.id();
                    let csv = self.layout.data_csv(id);
                    if let Some(dir) = csv.parent() {
                        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    }
                    write_dataset(&ds, &csv)?;
                    let graph = dag.graph().to_json();
                    write_atomic(&self.layout.truth_graph(id), serde_json::to_string_pretty(&graph)?.as_bytes())?;
                    let record = DatasetRecord {
                        id: id.to_string(),
                        kind: spec.kind(),
                        n_nodes: ds.d(),
                        n_samples: ds.n(),
                        n_edges: dag.num_edges(),
                        data_type,
                        complexity: spec
                            .complexity()
                            .map(str::to_string)
                            .unwrap_or_else(|| complexity_for(ds.d()).to_string()),
                        names: ds.columns().iter().map(|c| c.name.clone()).collect(),
                    };
                    write_atomic(
                        &self.layout.dataset_record(id),
                        serde_json::to_string_pretty(&record)?.as_bytes(),
                    )?;
                    let bytes = fs::read(&csv).map_err(|e| Error::io(&csv, e))?;
                    Ok((
                        record,
                        DatasetEntry {
                            seed: self.data_seed(spec),
                            data_sha256: sha256_hex(&bytes),
                        },
                    ))
                })
                .collect()
        });
        let built = built.into_iter().collect::<Result<Vec<_>>>()?;
        self.update_manifest(|m| {
            for (r, e) in &built {
                m.datasets.insert(r.id.clone(), e.clone());
            }
            m.mark_phase("generate");
        })?;
        Ok(built.into_iter().map(|(r, _)| r).collect())
    }

    /// Dataset records in config order, as written by `generate`.
    pub fn records(&self) -> Result<Vec<DatasetRecord>> {
        self.config
            .datasets
            .iter()
            .map(|d| {
                let path = self.layout.dataset_record(d.id());
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "dataset {} has not been generated (missing {})",
                        d.id(),
                        path.display()
                    )));
                }
                read_json(&path)
            })
            .collect()
    }

    pub(crate) fn load_dataset(&self, id: &str) -> Result<(Dataset, Dag)> {
        let ds = read_dataset(&self.layout.data_csv(id))?;
        let graph: GraphJson = read_json(&self.layout.truth_graph(id))?;
        let dag = Dag::try_from(MixedGraph::from_json(&graph)?)?;
        Ok((ds, dag))
    }
}
