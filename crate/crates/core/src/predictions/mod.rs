//! Prompt rendering, response parsing, cross-formulation aggregation and
//! the model gateway.

mod aggregate;
mod cells;
mod gateway;
mod parse;
mod prompts;

pub use aggregate::aggregate_formulations;
pub use cells::{enumerate_cells, Cell, Condition};
pub use gateway::{
    chat_request_body, EndpointConfig, Gateway, QueryMode, ReplayEntry, ReplayStore, Transport, UreqTransport,
};
pub use parse::{parse_response, render_answer};
pub use prompts::render_prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discovery::Algorithm;
use crate::error::{Error, Result};
use crate::metrics::MetricName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    F1,
    F2,
    F3,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [Formulation::F1, Formulation::F2, Formulation::F3];

    pub fn id(self) -> &'static str {
        match self {
            Formulation::F1 => "f1",
            Formulation::F2 => "f2",
            Formulation::F3 => "f3",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formulation::ALL
            .into_iter()
            .find(|f| f.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown formulation '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Discrete,
    Continuous,
}

impl DataType {
    pub fn label(self) -> &'static str {
        match self {
            DataType::Discrete => "discrete",
            DataType::Continuous => "continuous",
        }
    }
}

/// Default complexity label from the node count.
pub fn complexity_for(n_nodes: usize) -> &'static str {
    match n_nodes {
        0..=10 => "low",
        11..=30 => "medium",
        _ => "high",
    }
}

/// What a prompt is allowed to know about one (dataset, algorithm) condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionMeta {
    pub dataset: String,
    pub n_nodes: usize,
    pub n_samples: usize,
    pub data_type: DataType,
    pub complexity: String,
    pub algorithm: Algorithm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedRange {
    pub metric: MetricName,
    pub low: f64,
    pub high: f64,
}

impl PredictedRange {
    /// Whether either bound falls outside the metric's valid domain. Such
    /// ranges are kept as stated and only reported.
    pub fn out_of_domain(&self, n_nodes: usize) -> bool {
        let (lo, hi) = self.metric.domain(n_nodes);
        self.low < lo || self.high > hi
    }
}

/// Exactly one range per metric, in metric order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PredictedRange>", into = "Vec<PredictedRange>")]
pub struct RangeSet([PredictedRange; 4]);

impl RangeSet {
    pub fn new(ranges: Vec<PredictedRange>) -> Result<Self> {
        let mut slots: [Option<PredictedRange>; 4] = [None; 4];
        for r in ranges {
            let k = MetricName::ALL.iter().position(|m| *m == r.metric).expect("four metrics");
            if slots[k].replace(r).is_some() {
                return Err(Error::Contract(format!("duplicate range for {}", r.metric)));
            }
        }
        let mut out = Vec::with_capacity(4);
        for (k, slot) in slots.into_iter().enumerate() {
            out.push(slot.ok_or_else(|| Error::Contract(format!("missing range for {}", MetricName::ALL[k])))?);
        }
        Ok(RangeSet(out.try_into().expect("four ranges")))
    }

    pub fn get(&self, m: MetricName) -> &PredictedRange {
        &self.0[MetricName::ALL.iter().position(|x| *x == m).expect("four metrics")]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredictedRange> {
        self.0.iter()
    }
}

impl TryFrom<Vec<PredictedRange>> for RangeSet {
    type Error = Error;

    fn try_from(v: Vec<PredictedRange>) -> Result<Self> {
        RangeSet::new(v)
    }
}

impl From<RangeSet> for Vec<PredictedRange> {
    fn from(r: RangeSet) -> Self {
        r.0.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub model: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub formulation: Formulation,
    pub ranges: RangeSet,
    pub raw: String,
    /// Only set for live queries; replayed and ingested records stay
    /// timestamp-free so outputs are reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}
