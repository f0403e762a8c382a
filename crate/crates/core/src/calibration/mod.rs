//! Scoring predicted ranges against ground truth: coverage, baselines,
//! prompt sensitivity, memorization probes and significance tests.

mod baselines;
mod coverage;
mod cv;
mod probes;
mod stats;

pub use baselines::{
    heuristic_baseline_predictions, heuristic_baseline_range, random_baseline_predictions, random_baseline_range,
    HEURISTIC_WIDTH_FACTOR,
};
pub use coverage::{
    coverage_indicator, coverage_report, mean_score, BoostRow, ConditionRow, CoverageCell, CoverageReport,
    DatasetRow, GridCell, Marginal, ModelKindRow, SizePoint,
};
pub use cv::{cv_percent, prompt_robustness, CvCell, CvReport, CvRow};
pub use probes::{
    agreement_by_dataset, cross_model_agreement, range_distance, range_width_stats, AgreementKindRow, AgreementRow,
    ProbeStats, WidthRow, WidthStats,
};
pub use stats::{binomial_test, pairwise_welch_bonferroni, BinomialTest, PairComparison};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::metrics::GroundTruth;
use crate::predictions::RangeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Benchmark,
    Synthetic,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 2] = [DatasetKind::Benchmark, DatasetKind::Synthetic];

    pub fn label(self) -> &'static str {
        match self {
            DatasetKind::Benchmark => "Benchmark",
            DatasetKind::Synthetic => "Synthetic",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Registry entry for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub kind: DatasetKind,
    pub n_nodes: usize,
}

/// A predictor's final ranges for one (dataset, algorithm) condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedPrediction {
    pub model: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub ranges: RangeSet,
}

fn registry_map(registry: &[DatasetInfo]) -> Result<BTreeMap<&str, &DatasetInfo>> {
    let mut out = BTreeMap::new();
    for info in registry {
        if out.insert(info.id.as_str(), info).is_some() {
            return Err(Error::Config(format!("dataset id '{}' registered twice", info.id)));
        }
    }
    Ok(out)
}

fn truth_map(truths: &[GroundTruth]) -> Result<BTreeMap<(&str, Algorithm), &GroundTruth>> {
    let mut out = BTreeMap::new();
    for gt in truths {
        if out.insert((gt.dataset.as_str(), gt.algorithm), gt).is_some() {
            return Err(Error::Contract(format!(
                "ground truth for {}/{} given twice",
                gt.dataset, gt.algorithm
            )));
        }
    }
    Ok(out)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}
