use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mean;
use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::metrics::MetricName;
use crate::predictions::{Formulation, PredictionRecord};

/// Population coefficient of variation in percent. `None` when the mean is
/// zero (up to rounding), where the ratio is undefined.
pub fn cv_percent(x: [f64; 3]) -> Option<f64> {
    let m = (x[0] + x[1] + x[2]) / 3.0;
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m.abs() <= 4.0 * f64::EPSILON * scale || scale == 0.0 {
        return None;
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3.0;
    Some(var.sqrt() / m.abs() * 100.0)
}

/// CV% across the three formulations for one (model, condition, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub model: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub metric: MetricName,
    pub midpoint_cv: Option<f64>,
    pub width_cv: Option<f64>,
}

/// Averages over the defined cells of one (model, metric), or over all
/// metrics when `metric` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub model: String,
    pub metric: Option<MetricName>,
    pub mean_midpoint_cv: Option<f64>,
    pub mean_width_cv: Option<f64>,
    pub max_midpoint_cv: Option<f64>,
    pub cells: usize,
    pub undefined_midpoint: usize,
    pub undefined_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub cells: Vec<CvCell>,
    pub rows: Vec<CvRow>,
}

/// Prompt sensitivity from the per-formulation records. Every
/// (model, condition) must carry all three formulations.
pub fn prompt_robustness(records: &[PredictionRecord], models: &[String]) -> Result<CvReport> {
    let mut groups: BTreeMap<(&str, &str, Algorithm), [Option<&PredictionRecord>; 3]> = BTreeMap::new();
    for r in records {
        let slot = Formulation::ALL.iter().position(|f| *f == r.formulation).expect("three formulations");
        let g = groups.entry((r.model.as_str(), r.dataset.as_str(), r.algorithm)).or_default();
        if g[slot].replace(r).is_some() {
            return Err(Error::Contract(format!(
                "formulation {} appears twice for {}/{}/{}",
                r.formulation, r.model, r.dataset, r.algorithm
            )));
        }
    }
    let mut cells = Vec::new();
    for ((model, dataset, algorithm), g) in &groups {
        let missing: Vec<String> = Formulation::ALL
            .iter()
            .zip(g)
            .filter(|(_, r)| r.is_none())
            .map(|(f, _)| f.id().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Aggregation { missing });
        }
        let rs: Vec<&PredictionRecord> = g.iter().flatten().copied().collect();
        for metric in MetricName::ALL {
            let take = |f: &dyn Fn(f64, f64) -> f64| -> [f64; 3] {
                std::array::from_fn(|k| {
                    let r = rs[k].ranges.get(metric);
                    f(r.low, r.high)
                })
            };
            cells.push(CvCell {
                model: model.to_string(),
                dataset: dataset.to_string(),
                algorithm: *algorithm,
                metric,
                midpoint_cv: cv_percent(take(&|l, h| (l + h) / 2.0)),
                width_cv: cv_percent(take(&|l, h| h - l)),
            });
        }
    }

    let summarize = |model: &str, metric: Option<MetricName>| {
        let these: Vec<&CvCell> = cells
            .iter()
            .filter(|c| c.model == model && metric.is_none_or(|m| c.metric == m))
            .collect();
        CvRow {
            model: model.to_string(),
            metric,
            mean_midpoint_cv: mean(these.iter().filter_map(|c| c.midpoint_cv)),
            mean_width_cv: mean(these.iter().filter_map(|c| c.width_cv)),
            max_midpoint_cv: these.iter().filter_map(|c| c.midpoint_cv).reduce(f64::max),
            cells: these.len(),
            undefined_midpoint: these.iter().filter(|c| c.midpoint_cv.is_none()).count(),
            undefined_width: these.iter().filter(|c| c.width_cv.is_none()).count(),
        }
    };
    let mut rows = Vec::new();
    for model in models {
        for metric in MetricName::ALL {
            rows.push(summarize(model, Some(metric)));
        }
        rows.push(summarize(model, None));
    }
    Ok(CvReport { cells, rows })
}
