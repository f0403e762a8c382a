use std::collections::BTreeMap;
use std::fs;

use serde::{Deserialize, Serialize};

use super::{write_atomic, Campaign, QuarantineRow};
use crate::calibration::{
    binomial_test, coverage_report, heuristic_baseline_predictions, pairwise_welch_bonferroni, prompt_robustness,
    random_baseline_predictions, AggregatedPrediction, CoverageReport, CvReport, DatasetInfo, Marginal, PairComparison,
    ProbeStats,
};
use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::metrics::{GroundTruth, MetricName};
use crate::predictions::{aggregate_formulations, PredictionRecord};
use crate::seed;

pub const EVALUATION_SCHEMA: &str = "cdbench-evaluation/1";
pub const RANDOM_BASELINE: &str = "Random Baseline";
pub const HEURISTIC_BASELINE: &str = "Heuristic Baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub metric: MetricName,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: usize,
    pub failed_runs: usize,
}

/// One metric for one algorithm summarized over datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSummaryRow {
    pub algorithm: Algorithm,
    pub metric: MetricName,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n_datasets: usize,
}

/// A model's coverage tested against the random-baseline rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinomialRow {
    pub model: String,
    pub covered: usize,
    pub total: usize,
    pub null_rate: f64,
    pub z: f64,
    pub p: f64,
}

/// The consolidated result of a campaign. Every table and plot is a
/// projection of this document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub schema: String,
    pub config_hash: String,
    pub registry: Vec<DatasetInfo>,
    pub models: Vec<String>,
    pub algorithms: Vec<Algorithm>,
    pub ground_truth: Vec<GroundTruthRow>,
    pub algorithm_summary: Vec<AlgorithmSummaryRow>,
    pub pairwise_f1: Vec<PairComparison>,
    pub predictions: Vec<AggregatedPrediction>,
    /// Keys of model ranges with a bound outside the metric domain.
    pub out_of_domain: Vec<String>,
    pub coverage: Option<CoverageReport>,
    pub baselines: Vec<Marginal>,
    pub binomial: Vec<BinomialRow>,
    pub prompt_robustness: Option<CvReport>,
    pub probes: Option<ProbeStats>,
    pub quarantined: usize,
    pub notes: Vec<String>,
}

fn gt_rows(truths: &[GroundTruth]) -> Vec<GroundTruthRow> {
    truths
        .iter()
        .flat_map(|gt| {
            gt.metrics.iter().map(move |(&metric, s)| GroundTruthRow {
                dataset: gt.dataset.clone(),
                algorithm: gt.algorithm,
                metric,
                mean: s.mean,
                ci_low: s.ci_low,
                ci_high: s.ci_high,
                runs: gt.runs,
                failed_runs: gt.manifest.failed_runs.len(),
            })
        })
        .collect()
}

fn algorithm_summary(truths: &[GroundTruth], algorithms: &[Algorithm]) -> Vec<AlgorithmSummaryRow> {
    let mut out = Vec::new();
    for &algorithm in algorithms {
        for metric in MetricName::ALL {
            let xs: Vec<f64> = truths.iter().filter(|g| g.algorithm == algorithm).map(|g| g.mean(metric)).collect();
            if xs.is_empty() {
                continue;
            }
            out.push(AlgorithmSummaryRow {
                algorithm,
                metric,
                mean: xs.iter().sum::<f64>() / xs.len() as f64,
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n_datasets: xs.len(),
            });
        }
    }
    out
}

/// Groups records by (model, dataset, algorithm) and averages the
/// formulations. Cells without a complete set are reported as gaps.
fn aggregate(
    records: &[PredictionRecord],
    models: &[String],
    registry: &[DatasetInfo],
    algorithms: &[Algorithm],
    gaps: &mut Vec<String>,
) -> Result<Vec<AggregatedPrediction>> {
    let mut groups: BTreeMap<(&str, &str, Algorithm), Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.model.as_str(), r.dataset.as_str(), r.algorithm)).or_default().push(r);
    }
    let mut out = Vec::new();
    for model in models {
        for d in registry {
            for &alg in algorithms {
                let Some(group) = groups.get(&(model.as_str(), d.id.as_str(), alg)) else {
                    gaps.push(format!("prediction {model}/{}/{alg} (no parsed responses)", d.id));
                    continue;
                };
                match aggregate_formulations(group) {
                    Ok(ranges) => out.push(AggregatedPrediction {
                        model: model.clone(),
                        dataset: d.id.clone(),
                        algorithm: alg,
                        ranges,
                    }),
                    Err(Error::Aggregation { missing }) => {
                        gaps.push(format!("prediction {model}/{}/{alg} missing {}", d.id, missing.join(",")));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(out)
}

/// Builds the consolidated evaluation from loaded inputs.
#[allow(clippy::too_many_arguments)]
pub fn build_evaluation(
    config_hash: &str,
    seed_value: u64,
    registry: Vec<DatasetInfo>,
    models: Vec<String>,
    algorithms: Vec<Algorithm>,
    truths: Vec<GroundTruth>,
    records: &[PredictionRecord],
    quarantined: &[QuarantineRow],
    random_slots: usize,
) -> Result<Evaluation> {
    let mut gaps = Vec::new();
    for d in &registry {
        for &alg in &algorithms {
            if !truths.iter().any(|g| g.dataset == d.id && g.algorithm == alg) {
                gaps.push(format!("ground truth {}/{alg}", d.id));
            }
        }
    }
    let predictions = aggregate(records, &models, &registry, &algorithms, &mut gaps)?;
    if !gaps.is_empty() {
        return Err(Error::Gaps { gaps });
    }
    let mut notes = Vec::new();
    let n_nodes: BTreeMap<&str, usize> = registry.iter().map(|d| (d.id.as_str(), d.n_nodes)).collect();
    let out_of_domain = predictions
        .iter()
        .flat_map(|p| {
            p.ranges
                .iter()
                .filter(|r| r.out_of_domain(n_nodes[p.dataset.as_str()]))
                .map(|r| format!("{}|{}|{}|{}", p.model, p.dataset, p.algorithm, r.metric))
                .collect::<Vec<_>>()
        })
        .collect();

    let (coverage, prompt_cv, probes) = if models.is_empty() {
        notes.push("no models configured; only baselines are scored".into());
        (None, None, None)
    } else {
        let report = coverage_report(&truths, &predictions, &registry, &models, &algorithms)?;
        let cv = prompt_robustness(records, &models)?;
        let probes = ProbeStats::compute(&predictions, &registry, &models, &algorithms, &report)?;
        (Some(report), Some(cv), Some(probes))
    };

    let mut baselines = Vec::new();
    let slot_models: Vec<String> = (0..random_slots).map(|k| format!("{RANDOM_BASELINE}#{k}")).collect();
    let random = random_baseline_predictions(
        RANDOM_BASELINE,
        &registry,
        &algorithms,
        random_slots,
        seed::derive(seed_value, "random-baseline"),
    )?;
    let random_report = coverage_report(&truths, &random, &registry, &slot_models, &algorithms)?;
    let random_rate = random_report.overall.coverage / 100.0;
    baselines.push(Marginal {
        key: RANDOM_BASELINE.into(),
        ..random_report.overall
    });
    if registry.len() >= 2 {
        let heuristic = heuristic_baseline_predictions(HEURISTIC_BASELINE, &registry, &algorithms, &truths)?;
        let r = coverage_report(&truths, &heuristic, &registry, &[HEURISTIC_BASELINE.to_string()], &algorithms)?;
        baselines.push(Marginal {
            key: HEURISTIC_BASELINE.into(),
            ..r.overall
        });
    } else {
        notes.push("heuristic baseline needs at least two datasets".into());
    }

    let mut binomial = Vec::new();
    if let Some(report) = &coverage {
        for m in &report.by_model {
            match binomial_test(m.covered, m.total, random_rate) {
                Ok(t) => binomial.push(BinomialRow {
                    model: m.key.clone(),
                    covered: m.covered,
                    total: m.total,
                    null_rate: random_rate,
                    z: t.z,
                    p: t.p,
                }),
                Err(Error::DegenerateTest(msg)) => {
                    notes.push(format!("binomial test for {} skipped: {msg}", m.key));
                }
                Err(e) => return Err(e),
            }
        }
    }

    let f1_groups: Vec<(Algorithm, Vec<f64>)> = algorithms
        .iter()
        .map(|&a| {
            let xs = registry
                .iter()
                .filter_map(|d| truths.iter().find(|g| g.dataset == d.id && g.algorithm == a))
                .map(|g| g.mean(MetricName::F1))
                .collect();
            (a, xs)
        })
        .collect();
    let pairwise_f1 = match pairwise_welch_bonferroni(&f1_groups) {
        Ok(rows) => rows,
        Err(e @ (Error::Domain(_) | Error::Contract(_) | Error::DegenerateTest(_))) => {
            notes.push(format!("pairwise comparisons skipped: {e}"));
            Vec::new()
        }
        Err(e) => return Err(e),
    };

    let order: BTreeMap<&str, usize> = registry.iter().enumerate().map(|(k, d)| (d.id.as_str(), k)).collect();
    let mut truths = truths;
    truths.sort_by_key(|g| {
        (
            order[g.dataset.as_str()],
            algorithms.iter().position(|a| *a == g.algorithm).expect("configured algorithm"),
        )
    });

    Ok(Evaluation {
        schema: EVALUATION_SCHEMA.into(),
        config_hash: config_hash.into(),
        ground_truth: gt_rows(&truths),
        algorithm_summary: algorithm_summary(&truths, &algorithms),
        pairwise_f1,
        predictions,
        out_of_domain,
        coverage,
        baselines,
        binomial,
        prompt_robustness: prompt_cv,
        probes,
        quarantined: quarantined.len(),
        notes,
        registry,
        models,
        algorithms,
    })
}

impl Evaluation {
    /// Parses and checks the schema tag. Unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let e: Evaluation = serde_json::from_str(text)?;
        if e.schema != EVALUATION_SCHEMA {
            return Err(Error::Contract(format!("unsupported evaluation schema '{}'", e.schema)));
        }
        Ok(e)
    }

    /// Re-derives every coverage marginal from the cells and checks the cell
    /// count. Returns the list of inconsistencies.
    pub fn check_marginals(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let Some(r) = &self.coverage else {
            return bad;
        };
        let expected = self.models.len() * self.registry.len() * self.algorithms.len() * MetricName::ALL.len();
        if r.cells.len() != expected {
            bad.push(format!("{} cells, expected {expected}", r.cells.len()));
        }
        let kind: BTreeMap<&str, &DatasetInfo> = self.registry.iter().map(|d| (d.id.as_str(), d)).collect();
        let mut check = |what: String, m: &Marginal, pred: &dyn Fn(&crate::calibration::CoverageCell) -> bool| {
            let again = Marginal::from_cells(m.key.clone(), r.cells.iter().filter(|c| pred(c)));
            let ok = again.as_ref().is_some_and(|a| {
                a.covered == m.covered && a.total == m.total && (a.coverage - m.coverage).abs() < 1e-9
                    && (a.mean_score - m.mean_score).abs() < 1e-9
            });
            if !ok {
                bad.push(what);
            }
        };
        check("overall".into(), &r.overall, &|_| true);
        for m in &r.by_model {
            check(format!("model {}", m.key), m, &|c| c.model == m.key);
        }
        for m in &r.by_algorithm {
            check(format!("algorithm {}", m.key), m, &|c| c.algorithm.name() == m.key);
        }
        for m in &r.by_metric {
            check(format!("metric {}", m.key), m, &|c| c.metric.name() == m.key);
        }
        for row in &r.by_dataset {
            let m = &row.marginal;
            check(format!("dataset {}", m.key), m, &|c| c.dataset == m.key);
        }
        for g in &r.by_algorithm_metric {
            check(format!("grid {}/{}", g.algorithm, g.metric), &g.marginal, &|c| {
                c.algorithm == g.algorithm && c.metric == g.metric
            });
        }
        for m in &r.by_kind {
            check(format!("kind {}", m.key), m, &|c| kind[c.dataset.as_str()].kind.label() == m.key);
        }
        let total: usize = r.by_model.iter().map(|m| m.total).sum();
        let covered: usize = r.by_model.iter().map(|m| m.covered).sum();
        if total != r.overall.total || covered != r.overall.covered {
            bad.push("per-model totals do not sum to overall".into());
        }
        bad
    }
}

impl Campaign {
    /// Scores everything on disk and writes `evaluation.json` plus tables.
    pub fn evaluate(&self) -> Result<Evaluation> {
        let registry: Vec<DatasetInfo> = self.records()?.iter().map(|r| r.info()).collect();
        let (truths, mut gaps) = self.load_ground_truth()?;
        let outcome = self.load_outcome()?;
        if !self.config.models.is_empty() && !self.layout.predictions().exists() {
            gaps.push(format!("predictions {} (run query or ingest)", self.layout.predictions().display()));
        }
        if !gaps.is_empty() {
            return Err(Error::Gaps { gaps });
        }
        let models = self.model_ids();
        let slots = self.config.random_baseline_slots.unwrap_or(models.len().max(1));
        let eval = build_evaluation(
            &self.config.result_hash(),
            self.config.seed,
            registry,
            models,
            self.config.algorithms.clone(),
            truths,
            &outcome.records,
            &outcome.quarantined,
            slots,
        )?;
        write_atomic(&self.layout.evaluation(), serde_json::to_string_pretty(&eval)?.as_bytes())?;
        write_tables(&eval, &self.layout.tables_dir())?;
        self.update_manifest(|m| m.mark_phase("evaluate"))?;
        Ok(eval)
    }

    pub fn load_evaluation(&self) -> Result<Evaluation> {
        let path = self.layout.evaluation();
        if !path.exists() {
            return Err(Error::Gaps {
                gaps: vec![format!("evaluation {} (run evaluate)", path.display())],
            });
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Evaluation::from_json(&text)
    }
}

type Table = (&'static str, Vec<&'static str>, Vec<Vec<String>>);

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn marginal_cells(m: &Marginal) -> Vec<String> {
    vec![m.key.clone(), m.covered.to_string(), m.total.to_string(), num(m.coverage), num(m.mean_score)]
}

/// Every CSV table as (file stem, header, rows), derived from the evaluation only.
pub fn tables(e: &Evaluation) -> Vec<Table> {
    const MARGINAL: [&str; 5] = ["key", "covered", "total", "coverage_pct", "mean_score"];
    let mut out: Vec<Table> = Vec::new();
    out.push((
        "ground_truth",
        vec!["dataset", "algorithm", "metric", "mean", "ci_low", "ci_high", "runs", "failed_runs"],
        e.ground_truth
            .iter()
            .map(|r| {
                vec![
                    r.dataset.clone(),
                    r.algorithm.to_string(),
                    r.metric.to_string(),
                    num(r.mean),
                    num(r.ci_low),
                    num(r.ci_high),
                    r.runs.to_string(),
                    r.failed_runs.to_string(),
                ]
            })
            .collect(),
    ));
    out.push((
        "algorithm_summary",
        vec!["algorithm", "metric", "mean", "min", "max", "n_datasets"],
        e.algorithm_summary
            .iter()
            .map(|r| {
                vec![r.algorithm.to_string(), r.metric.to_string(), num(r.mean), num(r.min), num(r.max), r.n_datasets.to_string()]
            })
            .collect(),
    ));
    out.push((
        "pairwise_f1",
        vec!["a", "b", "mean_difference", "t", "df", "p", "corrected_p", "cohens_d", "significant", "degenerate"],
        e.pairwise_f1
            .iter()
            .map(|r| {
                vec![
                    r.a.to_string(),
                    r.b.to_string(),
                    num(r.mean_difference),
                    opt(r.t),
                    opt(r.df),
                    num(r.p),
                    num(r.corrected_p),
                    opt(r.cohens_d),
                    r.significant.to_string(),
                    r.degenerate.to_string(),
                ]
            })
            .collect(),
    ));
    let mut by_model: Vec<Vec<String>> = Vec::new();
    if let Some(r) = &e.coverage {
        by_model.extend(r.by_model.iter().map(marginal_cells));
    }
    by_model.extend(e.baselines.iter().map(marginal_cells));
    out.push(("coverage_by_model", MARGINAL.to_vec(), by_model));
    out.push((
        "binomial",
        vec!["model", "covered", "total", "null_rate", "z", "p"],
        e.binomial
            .iter()
            .map(|b| vec![b.model.clone(), b.covered.to_string(), b.total.to_string(), num(b.null_rate), num(b.z), num(b.p)])
            .collect(),
    ));
    if let Some(r) = &e.coverage {
        out.push(("coverage_by_algorithm", MARGINAL.to_vec(), r.by_algorithm.iter().map(marginal_cells).collect()));
        out.push(("coverage_by_metric", MARGINAL.to_vec(), r.by_metric.iter().map(marginal_cells).collect()));
        out.push((
            "coverage_by_dataset",
            vec!["key", "covered", "total", "coverage_pct", "mean_score", "kind", "n_nodes"],
            r.by_dataset
                .iter()
                .map(|d| {
                    let mut row = marginal_cells(&d.marginal);
                    row.push(d.kind.to_string());
                    row.push(d.n_nodes.to_string());
                    row
                })
                .collect(),
        ));
        out.push((
            "coverage_algorithm_metric",
            vec!["algorithm", "metric", "covered", "total", "coverage_pct", "mean_score"],
            r.by_algorithm_metric
                .iter()
                .map(|g| {
                    let mut row = vec![g.algorithm.to_string(), g.metric.to_string()];
                    row.extend(marginal_cells(&g.marginal).into_iter().skip(1));
                    row
                })
                .collect(),
        ));
        out.push(("coverage_by_kind", MARGINAL.to_vec(), r.by_kind.iter().map(marginal_cells).collect()));
        out.push((
            "coverage_model_kind",
            vec!["model", "benchmark_pct", "synthetic_pct"],
            r.by_model_kind
                .iter()
                .map(|m| {
                    vec![
                        m.model.clone(),
                        opt(m.benchmark.as_ref().map(|x| x.coverage)),
                        opt(m.synthetic.as_ref().map(|x| x.coverage)),
                    ]
                })
                .collect(),
        ));
        out.push((
            "size_curve",
            vec!["n_nodes", "covered", "total", "coverage_pct"],
            r.size_curve
                .iter()
                .map(|p| vec![p.n_nodes.to_string(), p.marginal.covered.to_string(), p.marginal.total.to_string(), num(p.marginal.coverage)])
                .collect(),
        ));
        out.push((
            "synthetic_boost",
            vec!["algorithm", "benchmark_pct", "synthetic_pct", "boost", "range_variation"],
            r.synthetic_boost
                .iter()
                .map(|b| {
                    vec![
                        b.algorithm.to_string(),
                        num(b.benchmark_coverage),
                        num(b.synthetic_coverage),
                        num(b.boost),
                        num(b.range_variation),
                    ]
                })
                .collect(),
        ));
        out.push((
            "conditions",
            vec!["dataset", "algorithm", "metric", "true_mean", "mean_low", "mean_high", "model_coverage_pct"],
            r.conditions
                .iter()
                .map(|c| {
                    vec![
                        c.dataset.clone(),
                        c.algorithm.to_string(),
                        c.metric.to_string(),
                        num(c.true_mean),
                        num(c.mean_low),
                        num(c.mean_high),
                        num(c.model_coverage),
                    ]
                })
                .collect(),
        ));
    }
    if let Some(cv) = &e.prompt_robustness {
        out.push((
            "prompt_robustness",
            vec!["model", "metric", "mean_midpoint_cv", "mean_width_cv", "max_midpoint_cv", "cells", "undefined_midpoint", "undefined_width"],
            cv.rows
                .iter()
                .map(|r| {
                    vec![
                        r.model.clone(),
                        r.metric.map(|m| m.to_string()).unwrap_or_else(|| "all".into()),
                        opt(r.mean_midpoint_cv),
                        opt(r.mean_width_cv),
                        opt(r.max_midpoint_cv),
                        r.cells.to_string(),
                        r.undefined_midpoint.to_string(),
                        r.undefined_width.to_string(),
                    ]
                })
                .collect(),
        ));
    }
    if let Some(p) = &e.probes {
        if let Some(w) = &p.width {
            out.push((
                "range_width",
                vec!["model", "benchmark_width", "synthetic_width", "ratio"],
                w.by_model
                    .iter()
                    .map(|r| vec![r.model.clone(), num(r.benchmark_width), num(r.synthetic_width), num(r.ratio)])
                    .collect(),
            ));
        }
        out.push((
            "agreement",
            vec!["dataset", "kind", "n_nodes", "mean_distance", "agreement_pct"],
            p.agreement
                .iter()
                .map(|a| vec![a.dataset.clone(), a.kind.to_string(), a.n_nodes.to_string(), num(a.mean_distance), num(a.agreement)])
                .collect(),
        ));
    }
    out
}

fn write_tables(e: &Evaluation, dir: &std::path::Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|err| Error::io(dir, err))?;
    }
    for (stem, header, rows) in tables(e) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|err| Error::io(dir, err.into_error()))?;
        write_atomic(&dir.join(format!("{stem}.csv")), &bytes)?;
    }
    Ok(())
}
