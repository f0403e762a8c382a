//! Per-run edge metrics and bootstrap ground-truth aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{bootstrap_resample, Dataset};
use crate::discovery::{run_algorithm, Algorithm, AlgorithmParams};
use crate::error::{Error, Result};
use crate::graphs::{max_shd, shd, Dag, MixedGraph};
use crate::seed;

/// Fraction of failed runs above which a condition is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricName {
    Precision,
    Recall,
    F1,
    #[serde(rename = "SHD")]
    Shd,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [MetricName::Precision, MetricName::Recall, MetricName::F1, MetricName::Shd];

    pub fn name(self) -> &'static str {
        match self {
            MetricName::Precision => "Precision",
            MetricName::Recall => "Recall",
            MetricName::F1 => "F1",
            MetricName::Shd => "SHD",
        }
    }

    /// Valid value range for a graph on `d` nodes.
    pub fn domain(self, d: usize) -> (f64, f64) {
        match self {
            MetricName::Shd => (0.0, max_shd(d) as f64),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    #[default]
    Skeleton,
    Directed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub shd: usize,
}

impl EdgeMetrics {
    pub fn get(&self, m: MetricName) -> f64 {
        match m {
            MetricName::Precision => self.precision,
            MetricName::Recall => self.recall,
            MetricName::F1 => self.f1,
            MetricName::Shd => self.shd as f64,
        }
    }
}

fn ratio(hits: usize, denom: usize, other_empty: bool) -> f64 {
    match (denom, other_empty) {
        (0, true) => 1.0,
        (0, false) => 0.0,
        _ => hits as f64 / denom as f64,
    }
}

type EdgeSet = BTreeSet<(usize, usize)>;

/// Precision, recall and F1 over the predicted edge set, plus SHD.
pub fn edge_metrics(pred: &MixedGraph, truth: &Dag, mode: MetricMode) -> Result<EdgeMetrics> {
    if pred.d() != truth.d() {
        return Err(Error::Dimension {
            expected: truth.d(),
            actual: pred.d(),
        });
    }
    let (predicted, actual): (EdgeSet, EdgeSet) = match mode {
        MetricMode::Skeleton => (pred.skeleton(), truth.graph().skeleton()),
        MetricMode::Directed => (
            pred.directed_edges().into_iter().collect(),
            truth.edges().into_iter().collect(),
        ),
    };
    let hits = predicted.intersection(&actual).count();
    let precision = ratio(hits, predicted.len(), actual.is_empty());
    let recall = ratio(hits, actual.len(), predicted.is_empty());
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EdgeMetrics {
        precision,
        recall,
        f1,
        shd: shd(pred, truth)?,
    })
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Two-sided percentile interval with linear interpolation between order
/// statistics.
pub fn percentile_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Domain(format!("percentile CI needs ≥ 2 values, got {}", values.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail)))
}

/// `mean ± z · sd` using the sample standard deviation of the run values.
pub fn normal_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Domain(format!("normal CI needs ≥ 2 values, got {}", values.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0);
    Ok((mean - z * sd, mean + z * sd))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Percentile,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MetricSummary {
    pub fn from_values(values: Vec<f64>, method: CiMethod, level: f64) -> Result<Self> {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let (ci_low, ci_high) = match method {
            CiMethod::Percentile => percentile_ci(&values, level)?,
            CiMethod::Normal => normal_ci(&values, level)?,
        };
        Ok(MetricSummary {
            values,
            mean,
            ci_low,
            ci_high,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub run: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub params: AlgorithmParams,
    pub mode: MetricMode,
    pub ci_method: CiMethod,
    pub ci_level: f64,
    pub failed_runs: Vec<FailedRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub metrics: BTreeMap<MetricName, MetricSummary>,
    pub manifest: GroundTruthManifest,
}

impl GroundTruth {
    pub fn mean(&self, m: MetricName) -> f64 {
        self.metrics[&m].mean
    }
}

/// How a condition is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringOptions {
    pub mode: MetricMode,
    pub ci_method: CiMethod,
    pub ci_level: f64,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions {
            mode: MetricMode::Skeleton,
            ci_method: CiMethod::Percentile,
            ci_level: 0.95,
        }
    }
}

pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    seed::derive(base_seed, &format!("run-{run}"))
}

/// Bootstrap ground truth for one (dataset, algorithm) condition. Runs
/// execute in parallel and are folded in run-index order.
#[allow(clippy::too_many_arguments)]
pub fn ground_truth_condition(
    dataset_id: &str,
    ds: &Dataset,
    truth: &Dag,
    algorithm: Algorithm,
    params: &AlgorithmParams,
    runs: usize,
    base_seed: u64,
    scoring: ScoringOptions,
) -> Result<GroundTruth> {
    if runs < 2 {
        return Err(Error::Domain(format!("ground truth needs ≥ 2 runs, got {runs}")));
    }
    if ds.d() != truth.d() {
        return Err(Error::Dimension {
            expected: truth.d(),
            actual: ds.d(),
        });
    }
    let seeds: Vec<u64> = (0..runs).map(|r| run_seed(base_seed, r)).collect();
    let outcomes: Vec<Result<EdgeMetrics>> = seeds
        .par_iter()
        .map(|&s| {
            let sample = bootstrap_resample(ds, s)?;
            let g = run_algorithm(algorithm, &sample, params, s)?;
            edge_metrics(&g, truth, scoring.mode)
        })
        .collect();

    let mut ok = Vec::with_capacity(runs);
    let mut failed_runs = Vec::new();
    for (run, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(m) => ok.push(m),
            Err(e) => failed_runs.push(FailedRun {
                run,
                error: e.to_string(),
            }),
        }
    }
    let condition = format!("{dataset_id}/{algorithm}");
    if failed_runs.len() as f64 > MAX_FAILURE_FRACTION * runs as f64 || ok.len() < 2 {
        let diagnostic = failed_runs
            .first()
            .map(|f| format!("first failure at run {}: {}", f.run, f.error))
            .unwrap_or_default();
        return Err(Error::ConditionFailed {
            condition,
            failed: failed_runs.len(),
            runs,
            diagnostic,
        });
    }
    let mut metrics = BTreeMap::new();
    for m in MetricName::ALL {
        let values: Vec<f64> = ok.iter().map(|r| r.get(m)).collect();
        metrics.insert(m, MetricSummary::from_values(values, scoring.ci_method, scoring.ci_level)?);
    }
    Ok(GroundTruth {
        dataset: dataset_id.to_string(),
        algorithm,
        runs,
        metrics,
        manifest: GroundTruthManifest {
            base_seed,
            seeds,
            params: *params,
            mode: scoring.mode,
            ci_method: scoring.ci_method,
            ci_level: scoring.ci_level,
            failed_runs,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_linear_gaussian;
    use crate::graphs::EndpointMark;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_empty_predictions() {
        let truth = Dag::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let m = edge_metrics(truth.graph(), &truth, MetricMode::Skeleton).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.shd), (1.0, 1.0, 1.0, 0));
        let m = edge_metrics(&MixedGraph::empty(4), &truth, MetricMode::Skeleton).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.shd), (0.0, 0.0, 0.0, 3));
        let m = edge_metrics(&MixedGraph::empty(4), &Dag::empty(4), MetricMode::Directed).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.shd), (1.0, 1.0, 1.0, 0));
    }

    #[test]
    fn hand_arithmetic_example() {
        let truth = Dag::from_edges(5, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut pred = MixedGraph::empty(5);
        pred.add_directed(0, 1);
        pred.add_directed(1, 2);
        pred.add_directed(0, 4);
        pred.add_directed(3, 4);
        let m = edge_metrics(&pred, &truth, MetricMode::Skeleton).unwrap();
        assert_eq!(m.precision, 0.5);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn directed_mode_ignores_unoriented_edges() {
        let truth = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let mut pred = MixedGraph::empty(3);
        pred.add_undirected(0, 1);
        pred.set_edge(1, 2, EndpointMark::Circle, EndpointMark::Arrow);
        let skel = edge_metrics(&pred, &truth, MetricMode::Skeleton).unwrap();
        assert_eq!(skel.f1, 1.0);
        let dir = edge_metrics(&pred, &truth, MetricMode::Directed).unwrap();
        assert_eq!((dir.precision, dir.recall), (0.0, 0.0));
        assert!(edge_metrics(&MixedGraph::empty(2), &truth, MetricMode::Skeleton).is_err());
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile_ci(&[0.4; 100], 0.95).unwrap(), (0.4, 0.4));
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = percentile_ci(&v, 0.95).unwrap();
        assert!((lo - 3.475).abs() < 1e-12 && (hi - 97.525).abs() < 1e-12);
        let sym = [-3.0, -1.0, 0.0, 1.0, 3.0];
        let (lo, hi) = percentile_ci(&sym, 0.95).unwrap();
        assert!((lo + hi).abs() < 1e-9);
        assert!(percentile_ci(&[1.0], 0.95).is_err());
    }

    #[test]
    fn normal_ci_is_symmetric() {
        let (lo, hi) = normal_ci(&[1.0, 2.0, 3.0], 0.95).unwrap();
        assert!((lo + hi - 4.0).abs() < 1e-12);
        assert!((hi - 2.0 - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn degenerate_single_row_bootstrap() {
        let ds = Dataset::continuous(DMatrix::from_row_slice(1, 2, &[0.5, 1.5]));
        let truth = Dag::empty(2);
        // one row: every bootstrap is identical and PC never reaches a test
        let gt = ground_truth_condition(
            "one",
            &ds,
            &truth,
            Algorithm::Pc,
            &AlgorithmParams::default(),
            2,
            7,
            ScoringOptions::default(),
        )
        .unwrap();
        for s in gt.metrics.values() {
            assert_eq!(s.ci_low, s.mean);
            assert_eq!(s.ci_high, s.mean);
        }
    }

    #[test]
    fn chain_ground_truth_is_recoverable_and_deterministic() {
        let truth = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let ds = sample_linear_gaussian(&truth, 5000, 0.8, 1.2, 1.0, 2).unwrap();
        let run = || {
            ground_truth_condition(
                "chain",
                &ds,
                &truth,
                Algorithm::Pc,
                &AlgorithmParams::default(),
                20,
                11,
                ScoringOptions::default(),
            )
            .unwrap()
        };
        let gt = run();
        assert!(gt.mean(MetricName::F1) >= 0.9);
        assert_eq!(gt, run());
        let f1 = &gt.metrics[&MetricName::F1].values;
        let p = &gt.metrics[&MetricName::Precision].values;
        let r = &gt.metrics[&MetricName::Recall].values;
        for k in 0..f1.len() {
            let hm = if p[k] + r[k] > 0.0 { 2.0 * p[k] * r[k] / (p[k] + r[k]) } else { 0.0 };
            assert!((f1[k] - hm).abs() < 1e-12);
        }
    }

    #[test]
    fn failing_condition_reports_diagnostic() {
        // four constant columns: every LiNGAM run hits a singular covariance
        let ds = Dataset::continuous(DMatrix::from_element(50, 4, 1.0));
        let err = ground_truth_condition(
            "flat",
            &ds,
            &Dag::empty(4),
            Algorithm::Lingam,
            &AlgorithmParams::default(),
            5,
            0,
            ScoringOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConditionFailed { failed: 5, runs: 5, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn percentile_matches_sort_oracle(values in prop::collection::vec(-1e3f64..1e3, 2..60)) {
            let mut s = values.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let oracle = |q: f64| {
                let pos = q * (s.len() - 1) as f64;
                let i = pos as usize;
                let frac = pos - i as f64;
                if i + 1 < s.len() { s[i] * (1.0 - frac) + s[i + 1] * frac } else { s[i] }
            };
            let (lo, hi) = percentile_ci(&values, 0.95).unwrap();
            prop_assert!((lo - oracle(0.025)).abs() < 1e-9);
            prop_assert!((hi - oracle(0.975)).abs() < 1e-9);
            prop_assert!(lo <= hi);
        }
    }
}
