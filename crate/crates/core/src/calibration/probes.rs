use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::{mean, registry_map, AggregatedPrediction, BoostRow, CoverageReport, DatasetInfo, DatasetKind};
use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::metrics::MetricName;
use crate::predictions::PredictedRange;

/// Mean absolute bound displacement between two ranges.
pub fn range_distance(r: &PredictedRange, s: &PredictedRange) -> f64 {
    ((r.low - s.low).abs() + (r.high - s.high).abs()) / 2.0
}

/// Mean pairwise distance and the percentage of overlapping pairs over all
/// unordered pairs of ranges.
pub fn cross_model_agreement(ranges: &[PredictedRange]) -> Result<(f64, f64)> {
    if ranges.len() < 2 {
        return Err(Error::Domain(format!(
            "agreement needs at least 2 models, got {}",
            ranges.len()
        )));
    }
    let (mut dist, mut overlap, mut pairs) = (0.0, 0usize, 0usize);
    for (r, s) in ranges.iter().tuple_combinations() {
        dist += range_distance(r, s);
        overlap += usize::from(r.low.max(s.low) <= r.high.min(s.high));
        pairs += 1;
    }
    Ok((dist / pairs as f64, 100.0 * overlap as f64 / pairs as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub model: String,
    pub benchmark_width: f64,
    pub synthetic_width: f64,
    /// Benchmark over synthetic width.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthStats {
    pub by_model: Vec<WidthRow>,
    pub overall: WidthRow,
    /// Mean synthetic range width at each node count.
    pub by_size: Vec<(usize, f64)>,
}

fn width_row(model: &str, preds: &[&AggregatedPrediction], kinds: &BTreeMap<&str, &DatasetInfo>) -> Result<WidthRow> {
    let part = |k: DatasetKind| {
        mean(
            preds
                .iter()
                .filter(|p| kinds[p.dataset.as_str()].kind == k)
                .flat_map(|p| p.ranges.iter().map(|r| r.high - r.low)),
        )
        .ok_or_else(|| Error::Domain(format!("no {} predictions for {model}", k.label().to_lowercase())))
    };
    let benchmark_width = part(DatasetKind::Benchmark)?;
    let synthetic_width = part(DatasetKind::Synthetic)?;
    if synthetic_width == 0.0 {
        return Err(Error::Domain(format!("synthetic ranges of {model} all have zero width")));
    }
    Ok(WidthRow {
        model: model.to_string(),
        benchmark_width,
        synthetic_width,
        ratio: benchmark_width / synthetic_width,
    })
}

/// Mean predicted width over all metrics on benchmark and synthetic
/// datasets, per model and pooled.
pub fn range_width_stats(
    predictions: &[AggregatedPrediction],
    registry: &[DatasetInfo],
    models: &[String],
) -> Result<WidthStats> {
    let kinds = registry_map(registry)?;
    if let Some(p) = predictions.iter().find(|p| !kinds.contains_key(p.dataset.as_str())) {
        return Err(Error::Contract(format!("prediction for unregistered dataset {}", p.dataset)));
    }
    let by_model = models
        .iter()
        .map(|m| {
            let mine: Vec<&AggregatedPrediction> = predictions.iter().filter(|p| &p.model == m).collect();
            width_row(m, &mine, &kinds)
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<&AggregatedPrediction> = predictions.iter().filter(|p| models.contains(&p.model)).collect();
    let overall = width_row("all", &all, &kinds)?;
    let sizes: BTreeSet<usize> = registry
        .iter()
        .filter(|d| d.kind == DatasetKind::Synthetic)
        .map(|d| d.n_nodes)
        .collect();
    let by_size = sizes
        .into_iter()
        .filter_map(|n| {
            mean(
                all.iter()
                    .filter(|p| {
                        let d = kinds[p.dataset.as_str()];
                        d.kind == DatasetKind::Synthetic && d.n_nodes == n
                    })
                    .flat_map(|p| p.ranges.iter().map(|r| r.high - r.low)),
            )
            .map(|w| (n, w))
        })
        .collect();
    Ok(WidthStats {
        by_model,
        overall,
        by_size,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub dataset: String,
    pub kind: DatasetKind,
    pub n_nodes: usize,
    pub mean_distance: f64,
    pub agreement: f64,
}

/// Agreement pooled over every condition of one dataset kind, for one
/// metric or all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementKindRow {
    pub kind: DatasetKind,
    pub metric: Option<MetricName>,
    pub mean_distance: f64,
    pub agreement: f64,
}

struct ConditionAgreement<'a> {
    info: &'a DatasetInfo,
    metric: MetricName,
    distance: f64,
    agreement: f64,
}

fn condition_agreements<'a>(
    predictions: &[AggregatedPrediction],
    registry: &'a [DatasetInfo],
    models: &[String],
    algorithms: &[Algorithm],
) -> Result<Vec<ConditionAgreement<'a>>> {
    let mut index: BTreeMap<(&str, &str, Algorithm), &AggregatedPrediction> = BTreeMap::new();
    for p in predictions {
        index.insert((p.model.as_str(), p.dataset.as_str(), p.algorithm), p);
    }
    let mut out = Vec::new();
    for info in registry {
        for &alg in algorithms {
            for metric in MetricName::ALL {
                let ranges = models
                    .iter()
                    .map(|m| {
                        index
                            .get(&(m.as_str(), info.id.as_str(), alg))
                            .map(|p| *p.ranges.get(metric))
                            .ok_or_else(|| Error::Gaps {
                                gaps: vec![format!("prediction {m}/{}/{alg}", info.id)],
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (distance, agreement) = cross_model_agreement(&ranges)?;
                out.push(ConditionAgreement {
                    info,
                    metric,
                    distance,
                    agreement,
                });
            }
        }
    }
    Ok(out)
}

/// Per-dataset agreement averaged over metrics and algorithms.
pub fn agreement_by_dataset(
    predictions: &[AggregatedPrediction],
    registry: &[DatasetInfo],
    models: &[String],
    algorithms: &[Algorithm],
) -> Result<Vec<AgreementRow>> {
    let conds = condition_agreements(predictions, registry, models, algorithms)?;
    Ok(registry
        .iter()
        .filter_map(|d| {
            let these: Vec<&ConditionAgreement> = conds.iter().filter(|c| c.info.id == d.id).collect();
            Some(AgreementRow {
                dataset: d.id.clone(),
                kind: d.kind,
                n_nodes: d.n_nodes,
                mean_distance: mean(these.iter().map(|c| c.distance))?,
                agreement: mean(these.iter().map(|c| c.agreement))?,
            })
        })
        .collect())
}

/// Memorization probes: width compression, cross-model agreement and the
/// per-algorithm synthetic boost. Probes that cannot be formed on this grid
/// (one dataset kind only, a single model) are left empty with a note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub width: Option<WidthStats>,
    pub agreement: Vec<AgreementRow>,
    pub agreement_by_kind: Vec<AgreementKindRow>,
    pub synthetic_boost: Vec<BoostRow>,
    pub notes: Vec<String>,
}

impl ProbeStats {
    pub fn compute(
        predictions: &[AggregatedPrediction],
        registry: &[DatasetInfo],
        models: &[String],
        algorithms: &[Algorithm],
        report: &CoverageReport,
    ) -> Result<Self> {
        let mut notes = Vec::new();
        let width = match range_width_stats(predictions, registry, models) {
            Ok(w) => Some(w),
            Err(Error::Domain(msg)) => {
                notes.push(format!("range width ratio unavailable: {msg}"));
                None
            }
            Err(e) => return Err(e),
        };
        let (agreement, agreement_by_kind) = match condition_agreements(predictions, registry, models, algorithms) {
            Ok(conds) => {
                let rows = agreement_by_dataset(predictions, registry, models, algorithms)?;
                let mut by_kind = Vec::new();
                for kind in DatasetKind::ALL {
                    for metric in MetricName::ALL.map(Some).into_iter().chain([None]) {
                        let these: Vec<&ConditionAgreement> = conds
                            .iter()
                            .filter(|c| c.info.kind == kind && metric.is_none_or(|m| c.metric == m))
                            .collect();
                        if let (Some(d), Some(a)) = (
                            mean(these.iter().map(|c| c.distance)),
                            mean(these.iter().map(|c| c.agreement)),
                        ) {
                            by_kind.push(AgreementKindRow {
                                kind,
                                metric,
                                mean_distance: d,
                                agreement: a,
                            });
                        }
                    }
                }
                (rows, by_kind)
            }
            Err(Error::Domain(msg)) => {
                notes.push(format!("cross-model agreement unavailable: {msg}"));
                (Vec::new(), Vec::new())
            }
            Err(e) => return Err(e),
        };
        if report.synthetic_boost.is_empty() {
            notes.push("synthetic boost unavailable: needs both benchmark and synthetic datasets".into());
        }
        Ok(ProbeStats {
            width,
            agreement,
            agreement_by_kind,
            synthetic_boost: report.synthetic_boost.clone(),
            notes,
        })
    }
}
