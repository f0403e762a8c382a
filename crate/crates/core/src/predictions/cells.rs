use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Formulation;
use crate::discovery::Algorithm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub dataset: String,
    pub algorithm: Algorithm,
}

/// One prompt to send: a model, a condition and a formulation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub dataset: String,
    pub algorithm: Algorithm,
    pub formulation: Formulation,
}

impl Cell {
    pub fn key(&self) -> String {
        format!("{}|{}|{}|{}", self.model, self.dataset, self.algorithm, self.formulation)
    }
}

/// Cartesian product models × conditions × formulations in input order.
/// Duplicate cells are rejected.
pub fn enumerate_cells(models: &[String], conditions: &[Condition], formulations: &[Formulation]) -> Result<Vec<Cell>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(models.len() * conditions.len() * formulations.len());
    for model in models {
        for c in conditions {
            for &formulation in formulations {
                let cell = Cell {
                    model: model.clone(),
                    dataset: c.dataset.clone(),
                    algorithm: c.algorithm,
                    formulation,
                };
                if !seen.insert(cell.clone()) {
                    return Err(Error::Config(format!("duplicate cell {}", cell.key())));
                }
                out.push(cell);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_manifest() {
        let models: Vec<String> = (0..8).map(|i| format!("model-{i}")).collect();
        let conditions: Vec<Condition> = (0..13)
            .flat_map(|d| {
                Algorithm::ALL.into_iter().map(move |algorithm| Condition {
                    dataset: format!("ds-{d}"),
                    algorithm,
                })
            })
            .collect();
        assert_eq!(conditions.len(), 52);
        let cells = enumerate_cells(&models, &conditions, &Formulation::ALL).unwrap();
        assert_eq!(cells.len(), 1248);
        let keys: BTreeSet<String> = cells.iter().map(Cell::key).collect();
        assert_eq!(keys.len(), 1248);
    }

    #[test]
    fn duplicates_rejected() {
        let c = Condition {
            dataset: "a".into(),
            algorithm: Algorithm::Pc,
        };
        assert!(enumerate_cells(&["m".into()], &[c.clone(), c], &Formulation::ALL).is_err());
    }
}
