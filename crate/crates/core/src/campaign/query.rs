use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_jsonl, write_jsonl, Campaign};
use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::predictions::{
    enumerate_cells, parse_response, render_prompt, Cell, Condition, Formulation, Gateway, PredictionRecord, QueryMode,
    ReplayStore,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRow {
    pub key: String,
    pub model: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub formulation: Formulation,
    pub prompt: String,
}

/// A response collected outside the gateway.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestRow {
    pub model: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub formulation: Formulation,
    pub response: String,
}

/// A cell that produced no usable prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarantineRow {
    pub key: String,
    pub model: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub formulation: Formulation,
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct QueryOutcome {
    pub records: Vec<PredictionRecord>,
    pub quarantined: Vec<QuarantineRow>,
}

impl QuarantineRow {
    fn new(key: String, model: &str, dataset: &str, algorithm: Algorithm, formulation: Formulation, error: String, raw: Option<String>) -> Self {
        QuarantineRow {
            key,
            model: model.to_string(),
            dataset: dataset.to_string(),
            algorithm,
            formulation,
            error,
            raw,
        }
    }

    fn for_cell(cell: &Cell, error: String, raw: Option<String>) -> Self {
        Self::new(cell.key(), &cell.model, &cell.dataset, cell.algorithm, cell.formulation, error, raw)
    }
}

fn read_jsonl_or_empty<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<Vec<T>> {
    if path.exists() {
        read_jsonl(path)
    } else {
        Ok(Vec::new())
    }
}

enum CellResult {
    Ok(PredictionRecord),
    Quarantined(QuarantineRow),
    Abort(Error),
}

fn to_record(cell: &Cell, raw: String, timestamp: Option<String>) -> CellResult {
    match parse_response(&raw) {
        Ok(ranges) => CellResult::Ok(PredictionRecord {
            model: cell.model.clone(),
            dataset: cell.dataset.clone(),
            algorithm: cell.algorithm,
            formulation: cell.formulation,
            ranges,
            raw,
            timestamp,
        }),
        Err(e) => CellResult::Quarantined(QuarantineRow::for_cell(cell, e.to_string(), Some(raw))),
    }
}

impl Campaign {
    fn cells(&self) -> Result<Vec<Cell>> {
        let conditions: Vec<Condition> = self
            .config
            .datasets
            .iter()
            .flat_map(|d| {
                self.config.algorithms.iter().map(move |&algorithm| Condition {
                    dataset: d.id().to_string(),
                    algorithm,
                })
            })
            .collect();
        enumerate_cells(&self.model_ids(), &conditions, &self.config.formulations)
    }

    /// Renders every prompt and writes them to `prompts.jsonl`.
    pub fn prompts(&self) -> Result<Vec<PromptRow>> {
        let records: BTreeMap<String, _> = self.records()?.into_iter().map(|r| (r.id.clone(), r)).collect();
        let rows: Vec<PromptRow> = self
            .cells()?
            .into_iter()
            .map(|c| {
                let meta = records[&c.dataset].meta(c.algorithm);
                PromptRow {
                    key: c.key(),
                    prompt: render_prompt(c.formulation, &meta),
                    model: c.model,
                    dataset: c.dataset,
                    algorithm: c.algorithm,
                    formulation: c.formulation,
                }
            })
            .collect();
        write_jsonl(&self.layout.prompts(), &rows)?;
        self.update_manifest(|m| m.mark_phase("prompts"))?;
        Ok(rows)
    }

    /// Sends every prompt through the gateway. Unusable responses are
    /// quarantined; authentication failures abort the phase.
    pub fn query(&self) -> Result<QueryOutcome> {
        let prompts = self.prompts()?;
        let store = Arc::new(ReplayStore::open(&self.config.query.replay_store)?);
        let mode = self.config.query.mode;
        let gateways: BTreeMap<&str, Gateway> = self
            .config
            .models
            .iter()
            .map(|m| (m.id.as_str(), Gateway::new(m.clone(), mode, store.clone(), self.transport.clone())))
            .collect();
        let cells = self.cells()?;
        let pool = self.pool()?;
        let results: Vec<CellResult> = pool.install(|| {
            cells
                .par_iter()
                .zip(prompts.par_iter())
                .map(|(cell, p)| match gateways[cell.model.as_str()].query(&p.prompt) {
                    Ok(raw) => {
                        let ts = (mode == QueryMode::Live).then(super::manifest::now);
                        to_record(cell, raw, ts)
                    }
                    Err(e @ Error::Auth(_)) => CellResult::Abort(e),
                    Err(e) => CellResult::Quarantined(QuarantineRow::for_cell(cell, e.to_string(), None)),
                })
                .collect()
        });
        let mut outcome = QueryOutcome::default();
        for r in results {
            match r {
                CellResult::Ok(rec) => outcome.records.push(rec),
                CellResult::Quarantined(q) => outcome.quarantined.push(q),
                CellResult::Abort(e) => return Err(e),
            }
        }
        self.write_outcome(&outcome, "query")?;
        Ok(outcome)
    }

    /// Reads externally collected responses from the configured ingest file.
    /// Rows for unknown cells and repeated cells are quarantined.
    pub fn ingest(&self) -> Result<QueryOutcome> {
        let path = self
            .config
            .query
            .ingest
            .clone()
            .ok_or_else(|| Error::Config("no [query].ingest file configured".into()))?;
        let rows: Vec<IngestRow> = read_jsonl(&path)?;
        self.ingest_rows(rows)
    }

    pub fn ingest_rows(&self, rows: Vec<IngestRow>) -> Result<QueryOutcome> {
        let cells = self.cells()?;
        let known: BTreeMap<String, &Cell> = cells.iter().map(|c| (c.key(), c)).collect();
        let mut seen = BTreeSet::new();
        let mut parsed: BTreeMap<String, PredictionRecord> = BTreeMap::new();
        let mut outcome = QueryOutcome::default();
        for row in rows {
            let key = Cell {
                model: row.model.clone(),
                dataset: row.dataset.clone(),
                algorithm: row.algorithm,
                formulation: row.formulation,
            }
            .key();
            let quarantine = |error: &str| {
                QuarantineRow::new(key.clone(), &row.model, &row.dataset, row.algorithm, row.formulation, error.to_string(), Some(row.response.clone()))
            };
            let Some(cell) = known.get(&key) else {
                outcome.quarantined.push(quarantine("cell is not part of this campaign"));
                continue;
            };
            if !seen.insert(key.clone()) {
                outcome.quarantined.push(quarantine("duplicate response for cell"));
                if let Some(first) = parsed.remove(&key) {
                    outcome.quarantined.push(QuarantineRow::for_cell(cell, "duplicate response for cell".into(), Some(first.raw)));
                }
                continue;
            }
            match to_record(cell, row.response.clone(), None) {
                CellResult::Ok(rec) => {
                    parsed.insert(key, rec);
                }
                CellResult::Quarantined(q) => outcome.quarantined.push(q),
                CellResult::Abort(e) => return Err(e),
            }
        }
        outcome.records = cells.iter().filter_map(|c| parsed.remove(&c.key())).collect();
        outcome.quarantined.sort_by(|a, b| a.key.cmp(&b.key).then_with(|| a.raw.cmp(&b.raw)));
        self.write_outcome(&outcome, "ingest")?;
        Ok(outcome)
    }

    fn write_outcome(&self, outcome: &QueryOutcome, phase: &str) -> Result<()> {
        write_jsonl(&self.layout.predictions(), &outcome.records)?;
        write_jsonl(&self.layout.quarantine(), &outcome.quarantined)?;
        self.update_manifest(|m| m.mark_phase(phase))
    }

    /// Parsed predictions and quarantined cells as last written.
    pub fn load_outcome(&self) -> Result<QueryOutcome> {
        let records = read_jsonl_or_empty(&self.layout.predictions())?;
        let quarantined = read_jsonl_or_empty(&self.layout.quarantine())?;
        Ok(QueryOutcome { records, quarantined })
    }
}
