use super::{ConditionMeta, Formulation};

const FORMAT_BLOCK: &str = "Precision: [X.XX, X.XX]\nRecall: [X.XX, X.XX]\nF1: [X.XX, X.XX]\nSHD: [X, X]";

const EXPERT: &str = "You are an expert in causal discovery algorithms.";

/// Fills one of the three prompt templates. Paragraphs are separated by a
/// blank line.
pub fn render_prompt(formulation: Formulation, meta: &ConditionMeta) -> String {
    let alg = meta.algorithm.name();
    let paragraphs: Vec<String> = match formulation {
        Formulation::F1 => vec![
            EXPERT.to_string(),
            format!(
                "Dataset: {}\nVariables: {}\nSamples: {}\nData type: {}",
                meta.dataset,
                meta.n_nodes,
                meta.n_samples,
                meta.data_type.label()
            ),
            format!("Algorithm: {alg}"),
            "Estimate performance ranges for all four metrics:".to_string(),
            FORMAT_BLOCK.to_string(),
            "CRITICAL: Output ONLY these four lines. No reasoning, no explanations, no preamble.".to_string(),
        ],
        Formulation::F2 => vec![
            EXPERT.to_string(),
            format!(
                "Dataset: {}\nVariables: {}\nSamples: {}\nComplexity: {}",
                meta.dataset, meta.n_nodes, meta.n_samples, meta.complexity
            ),
            format!("Algorithm: {alg}"),
            "Before predicting, reason through:".to_string(),
            "Core assumptions of the algorithm?\nDoes the dataset satisfy these assumptions?\n\
             How does complexity affect reliability?\nWhat range is realistic?"
                .to_string(),
            "CRITICAL: After reasoning, output ONLY:".to_string(),
            FORMAT_BLOCK.to_string(),
        ],
        Formulation::F3 => vec![
            "You are a statistician evaluating causal discovery algorithms.".to_string(),
            format!(
                "A researcher repeatedly runs {alg} on {} with different random seeds.",
                meta.dataset
            ),
            format!(
                "Dataset characteristics:\nVariables: {}\nSamples: {}\nData type: {}",
                meta.n_nodes,
                meta.n_samples,
                meta.data_type.label()
            ),
            "What ranges capture 95% of typical outcomes?".to_string(),
            "CRITICAL: Output ONLY:".to_string(),
            FORMAT_BLOCK.to_string(),
        ],
    };
    paragraphs.join("\n\n")
}
