//! Deterministic stand-in for a chat endpoint. Answers depend only on the
//! model name and the prompt text.

use std::time::Duration;

use cdbench::predictions::Transport;
use cdbench::Result;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub struct MockTransport;

fn unit(seed: &[u8], k: usize) -> f64 {
    let h = Sha256::digest(seed);
    let b = u16::from_le_bytes([h[2 * k], h[2 * k + 1]]);
    b as f64 / u16::MAX as f64
}

fn field<'a>(prompt: &'a str, label: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(label)).map(str::trim)
}

fn r2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn mock_answer(model: &str, prompt: &str) -> String {
    let seed = format!("{model}\n{prompt}");
    let u = |k| unit(seed.as_bytes(), k);
    let n: f64 = field(prompt, "Variables:").and_then(|v| v.parse().ok()).unwrap_or(10.0);
    let wide = model.contains("reasoner");
    let half = if wide { 0.2 } else { 0.08 };
    let mut lines = Vec::new();
    for (k, name) in ["Precision", "Recall", "F1"].iter().enumerate() {
        let c = 0.25 + 0.5 * u(k);
        lines.push(format!("{name}: [{:.2}, {:.2}]", r2((c - half).max(0.0)), r2((c + half).min(1.0))));
    }
    let c = n * (0.4 + 0.8 * u(3));
    let h = n * if wide { 0.5 } else { 0.2 };
    lines.push(format!("SHD: [{}, {}]", (c - h).max(0.0).round(), (c + h).round()));
    let answer = lines.join("\n");
    if wide {
        format!(
            "The algorithm's assumptions hold only partially here, so a first guess would be\n\
             Precision: [0.0, 1.0]\nbut that is too vague. Settling on:\n\n{answer}"
        )
    } else {
        answer
    }
}

impl Transport for MockTransport {
    fn post_json(&self, _url: &str, _bearer: Option<&str>, body: &Value, _timeout: Duration) -> Result<Value> {
        let model = body["model"].as_str().unwrap_or_default();
        let prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
        Ok(json!({"choices": [{"message": {"role": "assistant", "content": mock_answer(model, prompt)}}]}))
    }
}
