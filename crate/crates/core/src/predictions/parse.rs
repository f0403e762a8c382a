use std::sync::OnceLock;

use regex::Regex;

use super::{PredictedRange, RangeSet};
use crate::error::{Error, Result};
use crate::metrics::MetricName;

fn metric_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // optional markdown decoration around the label, e.g. "**Precision:**" or "- SHD:"
        Regex::new(r"(?im)^[\s>*_#\-]*(precision|recall|f1|shd)[\s*_]*:[\s*_]*\[([^\]\n]*)\]")
            .expect("static regex")
    })
}

fn metric_from_label(label: &str) -> MetricName {
    match label.to_ascii_lowercase().as_str() {
        "precision" => MetricName::Precision,
        "recall" => MetricName::Recall,
        "f1" => MetricName::F1,
        _ => MetricName::Shd,
    }
}

fn number(token: &str, metric: MetricName) -> Result<f64> {
    let t = token.trim().trim_matches(|c| c == '*' || c == '_');
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Response(format!("non-numeric bound '{t}' for {metric}")))
}

/// Extracts the four metric ranges. The last line for each metric wins, so
/// reasoning before the final answer is tolerated.
pub fn parse_response(text: &str) -> Result<RangeSet> {
    let mut last: [Option<(String, String)>; 4] = Default::default();
    for cap in metric_line().captures_iter(text) {
        let m = metric_from_label(&cap[1]);
        let k = MetricName::ALL.iter().position(|x| *x == m).expect("four metrics");
        let body = &cap[2];
        let parts: Vec<&str> = body.split(',').collect();
        let (a, b) = if parts.len() == 2 {
            (parts[0], parts[1])
        } else {
            (body, "")
        };
        last[k] = Some((a.to_string(), b.to_string()));
    }
    let mut ranges = Vec::with_capacity(4);
    for (k, slot) in last.into_iter().enumerate() {
        let metric = MetricName::ALL[k];
        let Some((a, b)) = slot else {
            return Err(Error::Response(format!("missing {metric} line")));
        };
        if b.is_empty() {
            return Err(Error::Response(format!("{metric} range '[{a}]' needs two bounds")));
        }
        let (low, high) = (number(&a, metric)?, number(&b, metric)?);
        if low > high {
            return Err(Error::Response(format!("inverted bounds for {metric}: [{low}, {high}]")));
        }
        ranges.push(PredictedRange { metric, low, high });
    }
    RangeSet::new(ranges)
}

/// The four lines a compliant response consists of.
pub fn render_answer(ranges: &RangeSet) -> String {
    ranges
        .iter()
        .map(|r| format!("{}: [{:?}, {:?}]", r.metric, r.low, r.high))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ANSWER: &str = "Precision: [0.70, 0.87]\nRecall: [0.63, 0.81]\nF1: [0.66, 0.83]\nSHD: [2, 6]";

    #[test]
    fn direct_echo() {
        let r = parse_response(ANSWER).unwrap();
        assert_eq!((r.get(MetricName::Precision).low, r.get(MetricName::Precision).high), (0.70, 0.87));
        assert_eq!((r.get(MetricName::Shd).low, r.get(MetricName::Shd).high), (2.0, 6.0));
    }

    #[test]
    fn reasoning_preamble_last_occurrence_wins() {
        let text = format!(
            "PC assumes faithfulness. A first guess:\nPrecision: [0.1, 0.2]\nRecall: [0.1, 0.2]\n\nFinal answer:\n{ANSWER}\n"
        );
        assert_eq!(parse_response(&text).unwrap(), parse_response(ANSWER).unwrap());
    }

    #[test]
    fn markdown_decoration_accepted() {
        let text = "**Precision:** [0.5, 0.6]\n- **Recall**: [0.4, 0.7]\n**F1:** [0.45, 0.65]\n**SHD:** [3.5, 8]";
        let r = parse_response(text).unwrap();
        assert_eq!(r.get(MetricName::Shd).low, 3.5);
    }

    #[test]
    fn failures() {
        let inverted = ANSWER.replace("[0.70, 0.87]", "[0.9, 0.1]");
        assert!(matches!(parse_response(&inverted), Err(Error::Response(m)) if m.contains("inverted")));
        let missing = "Precision: [0.1, 0.2]\nF1: [0.1, 0.2]\nSHD: [1, 2]";
        assert!(matches!(parse_response(missing), Err(Error::Response(m)) if m.contains("Recall")));
        let placeholder = ANSWER.replace("[2, 6]", "[X, X]");
        assert!(matches!(parse_response(&placeholder), Err(Error::Response(m)) if m.contains("non-numeric")));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn render_then_parse_is_identity(
            bounds in prop::array::uniform4((0.0f64..1.0, 0.0f64..1.0)),
            shd in (0.0f64..100.0, 0.0f64..100.0),
        ) {
            let mut ranges = Vec::new();
            for (k, (a, b)) in bounds.iter().take(3).enumerate() {
                ranges.push(PredictedRange { metric: MetricName::ALL[k], low: a.min(*b), high: a.max(*b) });
            }
            ranges.push(PredictedRange { metric: MetricName::Shd, low: shd.0.min(shd.1).round(), high: shd.0.max(shd.1).round() });
            let set = RangeSet::new(ranges).unwrap();
            prop_assert_eq!(parse_response(&render_answer(&set)).unwrap(), set);
        }
    }
}
