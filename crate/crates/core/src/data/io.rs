//! CSV persistence with a JSON sidecar holding column metadata.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Column, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub columns: Vec<Column>,
}

fn sidecar(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_dataset(ds: &Dataset, csv_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(ds.columns().iter().map(|c| c.name.as_str()))?;
    for r in 0..ds.n() {
        w.write_record((0..ds.d()).map(|j| {
            let v = ds.values()[(r, j)];
            // `{:?}` on f64 is the shortest representation that round-trips
            format!("{v:?}")
        }))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;
    let meta = DatasetMeta {
        n: ds.n(),
        columns: ds.columns().to_vec(),
    };
    let path = sidecar(csv_path);
    fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let path = sidecar(csv_path);
    let meta: DatasetMeta =
        serde_json::from_str(&fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?)?;
    let mut r = csv::Reader::from_path(csv_path)?;
    let d = meta.columns.len();
    let mut flat = Vec::with_capacity(meta.n * d);
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: rec.len(),
            });
        }
        for field in rec.iter() {
            flat.push(field.parse::<f64>().map_err(|_| {
                Error::Domain(format!("non-numeric value '{field}' in {}", csv_path.display()))
            })?);
        }
    }
    let n = flat.len() / d.max(1);
    if n != meta.n {
        return Err(Error::Dimension {
            expected: meta.n,
            actual: n,
        });
    }
    Dataset::new(DMatrix::from_row_slice(n, d, &flat), meta.columns)
}
