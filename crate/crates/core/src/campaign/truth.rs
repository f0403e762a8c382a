use rayon::prelude::*;
use serde_json::json;

use super::{manifest::now, read_json, sha256_hex, write_atomic, Campaign, ConditionEntry, TOOL_VERSION};
use crate::discovery::Algorithm;
use crate::error::Result;
use crate::metrics::{ground_truth_condition, run_seed, GroundTruth};
use crate::seed;

fn condition_key(dataset: &str, alg: Algorithm) -> String {
    format!("{dataset}|{}", alg.name())
}

impl Campaign {
    fn condition_seed(&self, dataset: &str, alg: Algorithm) -> u64 {
        seed::derive(self.config.seed, &format!("truth|{}", condition_key(dataset, alg)))
    }

    fn condition_hash(&self, dataset: &str, alg: Algorithm) -> Result<String> {
        let data = self
            .manifest()
            .datasets
            .get(dataset)
            .map(|d| d.data_sha256.clone())
            .unwrap_or_default();
        let spec = self.config.datasets.iter().find(|d| d.id() == dataset).map(|d| d.portable());
        let inputs = json!({
            "tool_version": TOOL_VERSION,
            "dataset": spec,
            "data_sha256": data,
            "algorithm": alg,
            "params": self.config.params,
            "runs": self.config.runs,
            "base_seed": self.condition_seed(dataset, alg),
            "scoring": self.config.scoring,
        });
        Ok(sha256_hex(&serde_json::to_vec(&inputs)?))
    }

    /// Bootstrap ground truth for every (dataset, algorithm). Conditions
    /// whose manifest hash matches an existing file are skipped. Every
    /// condition is attempted; the first failure is returned afterwards.
    pub fn ground_truth(&self) -> Result<Vec<GroundTruth>> {
        let records = self.records()?;
        let conditions: Vec<(String, Algorithm)> = records
            .iter()
            .flat_map(|r| self.config.algorithms.iter().map(move |&a| (r.id.clone(), a)))
            .collect();
        let pool = self.pool()?;
        let results: Vec<Result<GroundTruth>> = pool.install(|| {
            conditions
                .par_iter()
                .map(|(id, alg)| self.ground_truth_one(id, *alg))
                .collect()
        });
        let mut out = Vec::with_capacity(results.len());
        let mut first_err = None;
        for r in results {
            match r {
                Ok(gt) => out.push(gt),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        self.update_manifest(|m| m.mark_phase("ground-truth"))?;
        match first_err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn ground_truth_one(&self, id: &str, alg: Algorithm) -> Result<GroundTruth> {
        let path = self.layout.ground_truth(id, alg);
        let key = condition_key(id, alg);
        let hash = self.condition_hash(id, alg)?;
        let done = self.manifest().conditions.get(&key).is_some_and(|c| c.hash == hash);
        if done && path.exists() {
            return read_json(&path);
        }
        let (ds, dag) = self.load_dataset(id)?;
        let base_seed = self.condition_seed(id, alg);
        let gt = ground_truth_condition(
            id,
            &ds,
            &dag,
            alg,
            &self.config.params,
            self.config.runs,
            base_seed,
            self.config.scoring.into(),
        )?;
        write_atomic(&path, serde_json::to_string_pretty(&gt)?.as_bytes())?;
        self.update_manifest(|m| {
            m.conditions.insert(
                key,
                ConditionEntry {
                    hash,
                    base_seed,
                    run_seeds: (0..self.config.runs).map(|r| run_seed(base_seed, r)).collect(),
                    failed_runs: gt.manifest.failed_runs.len(),
                    completed_at: now(),
                },
            );
        })?;
        Ok(gt)
    }

    /// Ground truth for every configured condition, read back from disk.
    pub fn load_ground_truth(&self) -> Result<(Vec<GroundTruth>, Vec<String>)> {
        let mut truths = Vec::new();
        let mut gaps = Vec::new();
        for d in &self.config.datasets {
            for &alg in &self.config.algorithms {
                let path = self.layout.ground_truth(d.id(), alg);
                if path.exists() {
                    truths.push(read_json(&path)?);
                } else {
                    gaps.push(format!("ground truth {}/{alg} (run ground-truth)", d.id()));
                }
            }
        }
        Ok((truths, gaps))
    }
}
