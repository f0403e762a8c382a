use super::{Formulation, PredictedRange, PredictionRecord, RangeSet};
use crate::error::{Error, Result};
use crate::metrics::MetricName;

/// Per-metric mean of the lows and of the highs over the three
/// formulations of one (model, condition).
pub fn aggregate_formulations(records: &[&PredictionRecord]) -> Result<RangeSet> {
    let mut by_formulation: [Option<&PredictionRecord>; 3] = [None; 3];
    for r in records {
        let k = Formulation::ALL.iter().position(|f| *f == r.formulation).expect("three formulations");
        if by_formulation[k].replace(r).is_some() {
            return Err(Error::Contract(format!(
                "formulation {} appears twice for {}/{}/{}",
                r.formulation, r.model, r.dataset, r.algorithm
            )));
        }
    }
    if let Some(first) = records.first() {
        if records
            .iter()
            .any(|r| r.model != first.model || r.dataset != first.dataset || r.algorithm != first.algorithm)
        {
            return Err(Error::Contract("records span more than one (model, condition)".into()));
        }
    }
    let missing: Vec<String> = Formulation::ALL
        .iter()
        .zip(&by_formulation)
        .filter(|(_, r)| r.is_none())
        .map(|(f, _)| f.id().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Aggregation { missing });
    }
    let present: Vec<&PredictionRecord> = by_formulation.into_iter().flatten().collect();
    let n = present.len() as f64;
    let ranges = MetricName::ALL
        .into_iter()
        .map(|metric| {
            let low = present.iter().map(|r| r.ranges.get(metric).low).sum::<f64>() / n;
            let high = present.iter().map(|r| r.ranges.get(metric).high).sum::<f64>() / n;
            PredictedRange { metric, low, high }
        })
        .collect();
    RangeSet::new(ranges)
}
