//! Datasets, benchmark-network ingestion and the samplers that feed the
//! ground-truth runs.

mod bif;
mod io;
mod sampling;

pub use bif::{parse_bif, BayesNet, Cpt};
pub use io::{read_dataset, write_dataset, DatasetMeta};
pub use sampling::{
    ancestral_sample, sample_linear_gaussian, sample_linear_nongaussian, sample_sem, NoiseSpec,
    SemSample,
};

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Discrete { cardinality: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// An `n × d` sample matrix with per-column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    columns: Vec<Column>,
}

impl Dataset {
    pub fn new(values: DMatrix<f64>, columns: Vec<Column>) -> Result<Self> {
        if values.ncols() != columns.len() {
            return Err(Error::Dimension {
                expected: columns.len(),
                actual: values.ncols(),
            });
        }
        for (j, col) in columns.iter().enumerate() {
            if let ColumnKind::Discrete { cardinality } = col.kind {
                if let Some(bad) = values
                    .column(j)
                    .iter()
                    .find(|&&v| v.fract() != 0.0 || v < 0.0 || v >= cardinality as f64)
                {
                    return Err(Error::Domain(format!(
                        "column {} holds {bad}, outside [0, {cardinality})",
                        col.name
                    )));
                }
            }
        }
        Ok(Dataset { values, columns })
    }

    /// All-continuous dataset with columns named `x0, x1, …`.
    pub fn continuous(values: DMatrix<f64>) -> Self {
        let columns = (0..values.ncols())
            .map(|j| Column {
                name: format!("x{j}"),
                kind: ColumnKind::Continuous,
            })
            .collect();
        Dataset { values, columns }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn col(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub fn is_all_discrete(&self) -> bool {
        self.columns
            .iter()
            .all(|c| matches!(c.kind, ColumnKind::Discrete { .. }))
    }

    pub fn cardinality(&self, j: usize) -> Option<usize> {
        match self.columns[j].kind {
            ColumnKind::Discrete { cardinality } => Some(cardinality),
            ColumnKind::Continuous => None,
        }
    }

    /// Same values, all columns relabelled continuous (integer codes become reals).
    pub fn as_numeric(&self) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: ColumnKind::Continuous,
            })
            .collect();
        Dataset {
            values: self.values.clone(),
            columns,
        }
    }

    fn with_rows(&self, rows: &[usize]) -> Dataset {
        let values = DMatrix::from_fn(rows.len(), self.d(), |r, j| self.values[(rows[r], j)]);
        Dataset {
            values,
            columns: self.columns.clone(),
        }
    }
}

/// Draws `n` rows uniformly with replacement.
pub fn bootstrap_resample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let n = ds.n();
    if n == 0 {
        return Err(Error::Domain("cannot bootstrap an empty dataset".into()));
    }
    let mut rng = seed::stream(seed, "bootstrap");
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    Ok(ds.with_rows(&rows))
}

/// Zero-mean, unit population-variance columns. Constant columns are only
/// centred. The result is always marked continuous.
pub fn standardize(ds: &Dataset) -> Dataset {
    let n = ds.n() as f64;
    let mut values = ds.values.clone();
    for mut col in values.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n;
        col.iter_mut().for_each(|v| *v -= mean);
        let var = col.iter().map(|v| v * v).sum::<f64>() / n;
        if var > 0.0 {
            let sd = var.sqrt();
            col.iter_mut().for_each(|v| *v /= sd);
        }
    }
    Dataset {
        values,
        columns: ds.as_numeric().columns,
    }
}
