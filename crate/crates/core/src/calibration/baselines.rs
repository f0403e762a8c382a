use rand::Rng as _;

use super::{mean, registry_map, truth_map, AggregatedPrediction, DatasetInfo};
use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::metrics::{GroundTruth, MetricName};
use crate::predictions::{PredictedRange, RangeSet};
use crate::seed;

/// Half-width of the heuristic band in units of the mean bootstrap CI
/// half-width.
pub const HEURISTIC_WIDTH_FACTOR: f64 = 3.0;

/// Two independent uniform draws on the domain, sorted.
pub fn random_baseline_range(metric: MetricName, domain: (f64, f64), seed: u64) -> Result<PredictedRange> {
    let (a, b) = domain;
    if !(a < b) {
        return Err(Error::Domain(format!("empty domain [{a}, {b}] for {metric}")));
    }
    let mut rng = seed::stream(seed, "random-baseline");
    let u: f64 = rng.random_range(a..=b);
    let v: f64 = rng.random_range(a..=b);
    Ok(PredictedRange {
        metric,
        low: u.min(v),
        high: u.max(v),
    })
}

/// Random ranges for every registered dataset and algorithm, one set per
/// slot. Slot `k` is reported as model `"{name}#{k}"`.
pub fn random_baseline_predictions(
    name: &str,
    registry: &[DatasetInfo],
    algorithms: &[Algorithm],
    slots: usize,
    base_seed: u64,
) -> Result<Vec<AggregatedPrediction>> {
    let mut out = Vec::with_capacity(slots * registry.len() * algorithms.len());
    for k in 0..slots {
        for info in registry {
            for &algorithm in algorithms {
                let ranges = MetricName::ALL
                    .into_iter()
                    .map(|metric| {
                        let s = seed::derive(base_seed, &format!("{k}|{}|{algorithm}|{metric}", info.id));
                        random_baseline_range(metric, metric.domain(info.n_nodes), s)
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.push(AggregatedPrediction {
                    model: format!("{name}#{k}"),
                    dataset: info.id.clone(),
                    algorithm,
                    ranges: RangeSet::new(ranges)?,
                });
            }
        }
    }
    Ok(out)
}

/// Leave-one-out band: the mean of this metric for `algorithm` over every
/// other dataset, widened by the mean bootstrap CI half-width and clamped to
/// the held-out dataset's domain.
pub fn heuristic_baseline_range(
    metric: MetricName,
    algorithm: Algorithm,
    held_out: &DatasetInfo,
    truths: &[GroundTruth],
) -> Result<PredictedRange> {
    let others: Vec<&GroundTruth> = truths
        .iter()
        .filter(|gt| gt.algorithm == algorithm && gt.dataset != held_out.id)
        .collect();
    if others.is_empty() {
        return Err(Error::Domain(format!(
            "heuristic baseline for {}/{algorithm} needs ground truth on at least one other dataset",
            held_out.id
        )));
    }
    let center = mean(others.iter().map(|gt| gt.mean(metric))).expect("non-empty");
    let half = HEURISTIC_WIDTH_FACTOR
        * mean(others.iter().map(|gt| {
            let s = &gt.metrics[&metric];
            (s.ci_high - s.ci_low) / 2.0
        }))
        .expect("non-empty");
    let (lo, hi) = metric.domain(held_out.n_nodes);
    Ok(PredictedRange {
        metric,
        low: (center - half).clamp(lo, hi),
        high: (center + half).clamp(lo, hi),
    })
}

pub fn heuristic_baseline_predictions(
    name: &str,
    registry: &[DatasetInfo],
    algorithms: &[Algorithm],
    truths: &[GroundTruth],
) -> Result<Vec<AggregatedPrediction>> {
    registry_map(registry)?;
    truth_map(truths)?;
    let mut out = Vec::with_capacity(registry.len() * algorithms.len());
    for info in registry {
        for &algorithm in algorithms {
            let ranges = MetricName::ALL
                .into_iter()
                .map(|metric| heuristic_baseline_range(metric, algorithm, info, truths))
                .collect::<Result<Vec<_>>>()?;
            out.push(AggregatedPrediction {
                model: name.to_string(),
                dataset: info.id.clone(),
                algorithm,
                ranges: RangeSet::new(ranges)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{coverage_indicator, DatasetKind};

    fn info(id: &str, n: usize) -> DatasetInfo {
        DatasetInfo {
            id: id.into(),
            kind: DatasetKind::Benchmark,
            n_nodes: n,
        }
    }

    fn gt(dataset: &str, mean: f64, half: f64) -> GroundTruth {
        let mut g = crate::calibration::fixtures::truth(dataset, Algorithm::Pc, [mean; 4]);
        for s in g.metrics.values_mut() {
            s.ci_low = mean - half;
            s.ci_high = mean + half;
        }
        g
    }

    #[test]
    fn random_monte_carlo_matches_order_statistics() {
        for mu in [0.1, 0.5, 0.9] {
            let draws = 100_000;
            let hits = (0..draws)
                .filter(|&s| {
                    let r = random_baseline_range(MetricName::F1, (0.0, 1.0), s).unwrap();
                    coverage_indicator(mu, &r).unwrap() == 1
                })
                .count();
            let rate = hits as f64 / draws as f64;
            assert!((rate - 2.0 * mu * (1.0 - mu)).abs() < 0.01, "mu {mu}: {rate}");
        }
        let r0 = (0..10_000)
            .filter(|&s| coverage_indicator(0.0, &random_baseline_range(MetricName::F1, (0.0, 1.0), s).unwrap()).unwrap() == 1)
            .count();
        assert_eq!(r0, 0);
    }

    #[test]
    fn random_is_seeded_and_within_domain() {
        let a = random_baseline_range(MetricName::Shd, MetricName::Shd.domain(12), 7).unwrap();
        assert_eq!(a, random_baseline_range(MetricName::Shd, (0.0, 66.0), 7).unwrap());
        assert!(0.0 <= a.low && a.low <= a.high && a.high <= 66.0);
        assert!(random_baseline_range(MetricName::F1, (1.0, 1.0), 0).is_err());
        let preds = random_baseline_predictions("random", &[info("x", 5)], &Algorithm::ALL, 3, 1).unwrap();
        assert_eq!(preds.len(), 12);
        assert_ne!(preds[0].ranges, preds[4].ranges);
    }

    #[test]
    fn heuristic_formula() {
        let truths = vec![gt("a", 0.5, 0.05), gt("b", 0.5, 0.05), gt("held", 0.55, 0.01)];
        let r = heuristic_baseline_range(MetricName::F1, Algorithm::Pc, &info("held", 8), &truths).unwrap();
        assert!((r.low - 0.35).abs() < 1e-12 && (r.high - 0.65).abs() < 1e-12);
        assert_eq!(coverage_indicator(0.55, &r).unwrap(), 1);

        let single = vec![gt("a", 0.2, 0.1), gt("held", 0.9, 0.0)];
        let r = heuristic_baseline_range(MetricName::Recall, Algorithm::Pc, &info("held", 8), &single).unwrap();
        // 0.2 ± 0.3, clamped at zero
        assert_eq!(r.low, 0.0);
        assert!((r.high - 0.5).abs() < 1e-12);

        let alone = vec![gt("held", 0.9, 0.0)];
        assert!(heuristic_baseline_range(MetricName::F1, Algorithm::Pc, &info("held", 8), &alone).is_err());
    }
}
