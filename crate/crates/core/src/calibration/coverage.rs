use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean, registry_map, truth_map, AggregatedPrediction, DatasetInfo, DatasetKind};
use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::metrics::{GroundTruth, MetricName};
use crate::predictions::PredictedRange;

/// 1 when `true_mean` lies in the closed interval.
pub fn coverage_indicator(true_mean: f64, range: &PredictedRange) -> Result<u8> {
    if !(range.low <= range.high) {
        return Err(Error::Domain(format!(
            "inverted {} range [{}, {}]",
            range.metric, range.low, range.high
        )));
    }
    Ok(u8::from(range.low <= true_mean && true_mean <= range.high))
}

/// 1 when covered, otherwise one minus the miss distance as a fraction of
/// the domain width, floored at 0.
pub fn mean_score(true_mean: f64, range: &PredictedRange, domain: (f64, f64)) -> Result<f64> {
    if coverage_indicator(true_mean, range)? == 1 {
        return Ok(1.0);
    }
    let miss = if true_mean < range.low {
        range.low - true_mean
    } else {
        true_mean - range.high
    };
    let width = domain.1 - domain.0;
    if width <= 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - (miss / width).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub model: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub metric: MetricName,
    pub true_mean: f64,
    pub low: f64,
    pub high: f64,
    pub covered: u8,
    pub score: f64,
}

/// Coverage over a group of cells. `coverage` is a percentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub key: String,
    pub covered: usize,
    pub total: usize,
    pub coverage: f64,
    pub mean_score: f64,
}

impl Marginal {
    pub fn from_cells<'a>(key: impl Into<String>, cells: impl IntoIterator<Item = &'a CoverageCell>) -> Option<Self> {
        let (mut covered, mut total, mut score) = (0usize, 0usize, 0.0);
        for c in cells {
            covered += usize::from(c.covered);
            total += 1;
            score += c.score;
        }
        (total > 0).then(|| Marginal {
            key: key.into(),
            covered,
            total,
            coverage: 100.0 * covered as f64 / total as f64,
            mean_score: score / total as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub algorithm: Algorithm,
    pub metric: MetricName,
    pub marginal: Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub kind: DatasetKind,
    pub n_nodes: usize,
    pub marginal: Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelKindRow {
    pub model: String,
    pub benchmark: Option<Marginal>,
    pub synthetic: Option<Marginal>,
}

/// Synthetic-network coverage at one node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub n_nodes: usize,
    pub marginal: Marginal,
}

/// Synthetic minus benchmark coverage for one algorithm, in percentage
/// points, pooled over models and per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRow {
    pub algorithm: Algorithm,
    pub benchmark_coverage: f64,
    pub synthetic_coverage: f64,
    pub boost: f64,
    pub per_model: Vec<(String, f64)>,
    /// Spread (max minus min) of the per-model boosts.
    pub range_variation: f64,
}

/// Per (dataset, algorithm, metric): the true mean, the model-averaged range
/// and the share of models whose own range covers the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub metric: MetricName,
    pub true_mean: f64,
    pub mean_low: f64,
    pub mean_high: f64,
    pub model_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub models: Vec<String>,
    pub cells: Vec<CoverageCell>,
    pub overall: Marginal,
    pub by_model: Vec<Marginal>,
    pub by_algorithm: Vec<Marginal>,
    pub by_metric: Vec<Marginal>,
    pub by_dataset: Vec<DatasetRow>,
    pub by_algorithm_metric: Vec<GridCell>,
    pub by_kind: Vec<Marginal>,
    pub by_model_kind: Vec<ModelKindRow>,
    pub size_curve: Vec<SizePoint>,
    pub by_model_size: Vec<(String, Vec<SizePoint>)>,
    pub synthetic_boost: Vec<BoostRow>,
    pub conditions: Vec<ConditionRow>,
}

/// Scores every (model, dataset, algorithm, metric) cell and derives all
/// marginal tables. Datasets follow registry order; models and algorithms
/// follow the given order.
pub fn coverage_report(
    truths: &[GroundTruth],
    predictions: &[AggregatedPrediction],
    registry: &[DatasetInfo],
    models: &[String],
    algorithms: &[Algorithm],
) -> Result<CoverageReport> {
    if models.is_empty() || algorithms.is_empty() || registry.is_empty() {
        return Err(Error::Contract("coverage needs at least one model, algorithm and dataset".into()));
    }
    let datasets = registry_map(registry)?;
    let truth = truth_map(truths)?;
    let mut preds: BTreeMap<(&str, &str, Algorithm), &AggregatedPrediction> = BTreeMap::new();
    for p in predictions {
        if !models.contains(&p.model) || !datasets.contains_key(p.dataset.as_str()) || !algorithms.contains(&p.algorithm)
        {
            return Err(Error::Contract(format!(
                "prediction {}/{}/{} is outside the evaluated grid",
                p.model, p.dataset, p.algorithm
            )));
        }
        if preds.insert((p.model.as_str(), p.dataset.as_str(), p.algorithm), p).is_some() {
            return Err(Error::Contract(format!(
                "prediction {}/{}/{} given twice",
                p.model, p.dataset, p.algorithm
            )));
        }
    }

    let mut gaps = BTreeSet::new();
    let mut jobs = Vec::new();
    for info in registry {
        for &alg in algorithms {
            let gt = truth.get(&(info.id.as_str(), alg));
            if gt.is_none() {
                gaps.insert(format!("ground truth {}/{alg}", info.id));
            }
            for model in models {
                let p = preds.get(&(model.as_str(), info.id.as_str(), alg));
                if p.is_none() {
                    gaps.insert(format!("prediction {model}/{}/{alg}", info.id));
                }
                if let (Some(gt), Some(p)) = (gt, p) {
                    for metric in MetricName::ALL {
                        jobs.push((info, *gt, *p, metric));
                    }
                }
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Gaps {
            gaps: gaps.into_iter().collect(),
        });
    }

    let mut cells = jobs
        .par_iter()
        .map(|&(info, gt, p, metric)| {
            let range = p.ranges.get(metric);
            let true_mean = gt.mean(metric);
            Ok(CoverageCell {
                model: p.model.clone(),
                dataset: info.id.clone(),
                algorithm: p.algorithm,
                metric,
                true_mean,
                low: range.low,
                high: range.high,
                covered: coverage_indicator(true_mean, range)?,
                score: mean_score(true_mean, range, metric.domain(info.n_nodes))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model_rank = |m: &str| models.iter().position(|x| x == m).expect("known model");
    cells.sort_by_key(|c| model_rank(&c.model));

    Ok(assemble(cells, registry, models, algorithms))
}

fn assemble(cells: Vec<CoverageCell>, registry: &[DatasetInfo], models: &[String], algorithms: &[Algorithm]) -> CoverageReport {
    let kind_of: BTreeMap<&str, &DatasetInfo> = registry.iter().map(|d| (d.id.as_str(), d)).collect();
    let is_kind = |c: &CoverageCell, k: DatasetKind| kind_of[c.dataset.as_str()].kind == k;
    let group = |key: String, f: &dyn Fn(&CoverageCell) -> bool| Marginal::from_cells(key, cells.iter().filter(|c| f(c)));

    let overall = Marginal::from_cells("all", &cells).expect("non-empty grid");
    let by_model = models.iter().filter_map(|m| group(m.clone(), &|c| &c.model == m)).collect();
    let by_algorithm = algorithms
        .iter()
        .filter_map(|a| group(a.to_string(), &|c| c.algorithm == *a))
        .collect();
    let by_metric = MetricName::ALL
        .iter()
        .filter_map(|m| group(m.to_string(), &|c| c.metric == *m))
        .collect();
    let by_dataset = registry
        .iter()
        .filter_map(|d| {
            group(d.id.clone(), &|c| c.dataset == d.id).map(|marginal| DatasetRow {
                kind: d.kind,
                n_nodes: d.n_nodes,
                marginal,
            })
        })
        .collect();
    let mut by_algorithm_metric = Vec::new();
    for &algorithm in algorithms {
        for metric in MetricName::ALL {
            if let Some(marginal) = group(format!("{algorithm}|{metric}"), &|c| c.algorithm == algorithm && c.metric == metric) {
                by_algorithm_metric.push(GridCell {
                    algorithm,
                    metric,
                    marginal,
                });
            }
        }
    }
    let by_kind = DatasetKind::ALL
        .iter()
        .filter_map(|&k| group(k.to_string(), &|c| is_kind(c, k)))
        .collect();
    let by_model_kind = models
        .iter()
        .map(|m| ModelKindRow {
            model: m.clone(),
            benchmark: group(m.clone(), &|c| &c.model == m && is_kind(c, DatasetKind::Benchmark)),
            synthetic: group(m.clone(), &|c| &c.model == m && is_kind(c, DatasetKind::Synthetic)),
        })
        .collect();

    let sizes: BTreeSet<usize> = registry
        .iter()
        .filter(|d| d.kind == DatasetKind::Synthetic)
        .map(|d| d.n_nodes)
        .collect();
    let size_points = |f: &dyn Fn(&CoverageCell) -> bool| -> Vec<SizePoint> {
        sizes
            .iter()
            .filter_map(|&n| {
                group(n.to_string(), &|c| {
                    f(c) && is_kind(c, DatasetKind::Synthetic) && kind_of[c.dataset.as_str()].n_nodes == n
                })
                .map(|marginal| SizePoint { n_nodes: n, marginal })
            })
            .collect()
    };
    let size_curve = size_points(&|_| true);
    let by_model_size = models
        .iter()
        .map(|m| (m.clone(), size_points(&|c| &c.model == m)))
        .collect();

    let mut synthetic_boost = Vec::new();
    for &algorithm in algorithms {
        let part = |k: DatasetKind, m: Option<&String>| {
            group(String::new(), &|c| {
                c.algorithm == algorithm && is_kind(c, k) && m.is_none_or(|m| &c.model == m)
            })
        };
        let (Some(b), Some(s)) = (part(DatasetKind::Benchmark, None), part(DatasetKind::Synthetic, None)) else {
            continue;
        };
        let per_model: Vec<(String, f64)> = models
            .iter()
            .filter_map(|m| {
                let b = part(DatasetKind::Benchmark, Some(m))?;
                let s = part(DatasetKind::Synthetic, Some(m))?;
                Some((m.clone(), s.coverage - b.coverage))
            })
            .collect();
        let hi = per_model.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let lo = per_model.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        synthetic_boost.push(BoostRow {
            algorithm,
            benchmark_coverage: b.coverage,
            synthetic_coverage: s.coverage,
            boost: s.coverage - b.coverage,
            range_variation: if per_model.is_empty() { 0.0 } else { hi - lo },
            per_model,
        });
    }

    let mut conditions = Vec::new();
    for d in registry {
        for &algorithm in algorithms {
            for metric in MetricName::ALL {
                let these: Vec<&CoverageCell> = cells
                    .iter()
                    .filter(|c| c.dataset == d.id && c.algorithm == algorithm && c.metric == metric)
                    .collect();
                let Some(first) = these.first() else { continue };
                conditions.push(ConditionRow {
                    dataset: d.id.clone(),
                    algorithm,
                    metric,
                    true_mean: first.true_mean,
                    mean_low: mean(these.iter().map(|c| c.low)).expect("non-empty"),
                    mean_high: mean(these.iter().map(|c| c.high)).expect("non-empty"),
                    model_coverage: Marginal::from_cells("", these.iter().copied()).expect("non-empty").coverage,
                });
            }
        }
    }

    CoverageReport {
        models: models.to_vec(),
        overall,
        by_model,
        by_algorithm,
        by_metric,
        by_dataset,
        by_algorithm_metric,
        by_kind,
        by_model_kind,
        size_curve,
        by_model_size,
        synthetic_boost,
        conditions,
        cells,
    }
}
