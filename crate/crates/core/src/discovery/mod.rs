//! Causal-discovery algorithms: PC, FCI, ICA-LiNGAM and NOTEARS.

mod fci;
mod ica;
mod lingam;
mod notears;
mod pc;
mod skeleton;

pub use fci::fci;
pub use ica::{fastica, IcaFit};
pub use lingam::{causal_order_from_b, lingam, permute_unmixing, LingamFit};
pub use notears::{acyclicity_h, expm, notears, NotearsIter, NotearsTrace};
pub use pc::{meek_orient, pc};
pub use skeleton::{skeleton, Skeleton};

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::citests::{CiTest, DEFAULT_ALPHA};
use crate::data::{standardize, Dataset};
use crate::error::{Error, Result};
use crate::graphs::{adjacency_is_acyclic, Dag, MixedGraph};

/// Weighted adjacency `W` with `W[(child, parent)]` the weight on
/// `parent → child`, so a linear model reads `x = W x + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDag {
    pub w: DMatrix<f64>,
    pub threshold_used: f64,
}

impl WeightedDag {
    pub fn d(&self) -> usize {
        self.w.nrows()
    }

    /// Edges `(parent, child)` whose weight magnitude exceeds the threshold.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let d = self.d();
        let mut out = Vec::new();
        for parent in 0..d {
            for child in 0..d {
                if parent != child && self.w[(child, parent)].abs() > self.threshold_used {
                    out.push((parent, child));
                }
            }
        }
        out
    }

    pub fn is_acyclic(&self) -> bool {
        adjacency_is_acyclic(self.d(), |p, c| {
            p != c && self.w[(c, p)].abs() > self.threshold_used
        })
    }

    pub fn to_dag(&self) -> Result<Dag> {
        Dag::from_edges(self.d(), &self.support())
    }
}

/// Conditioning sets that separated each removed pair, keyed by `(min, max)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SepsetTable(BTreeMap<(usize, usize), Vec<usize>>);

impl SepsetTable {
    fn key(i: usize, j: usize) -> (usize, usize) {
        (i.min(j), i.max(j))
    }

    pub fn insert(&mut self, i: usize, j: usize, s: Vec<usize>) {
        self.0.insert(Self::key(i, j), s);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.0.get(&Self::key(i, j)).map(Vec::as_slice)
    }

    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        self.get(i, j).is_some_and(|s| s.contains(&k))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "FCI")]
    Fci,
    #[serde(rename = "LiNGAM")]
    Lingam,
    #[serde(rename = "NOTEARS")]
    Notears,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Pc, Algorithm::Fci, Algorithm::Lingam, Algorithm::Notears];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pc => "PC",
            Algorithm::Fci => "FCI",
            Algorithm::Lingam => "LiNGAM",
            Algorithm::Notears => "NOTEARS",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Flat algorithm parameter section. Every field has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmParams {
    pub alpha: f64,
    pub ci_test: CiTest,
    pub lambda1: f64,
    pub w_threshold: f64,
    pub h_tol: f64,
    pub rho_max: f64,
    pub notears_max_outer: usize,
    pub prune_threshold: f64,
    pub ica_tol: f64,
    pub ica_max_iter: usize,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams {
            alpha: DEFAULT_ALPHA,
            ci_test: CiTest::Auto,
            lambda1: 0.1,
            w_threshold: 0.3,
            h_tol: 1e-8,
            rho_max: 1e16,
            notears_max_outer: 100,
            prune_threshold: 0.05,
            ica_tol: 1e-6,
            ica_max_iter: 200,
        }
    }
}

/// Runs one algorithm and returns the graph that is scored against truth.
/// Score-based methods see standardized numeric data.
pub fn run_algorithm(alg: Algorithm, ds: &Dataset, params: &AlgorithmParams, seed: u64) -> Result<MixedGraph> {
    match alg {
        Algorithm::Pc => pc(ds, params.alpha, params.ci_test).map(|(g, _)| g),
        Algorithm::Fci => fci(ds, params.alpha, params.ci_test),
        Algorithm::Lingam => {
            let fit = lingam(&standardize(ds), seed, params.prune_threshold, params.ica_max_iter, params.ica_tol)?;
            Ok(fit.dag.to_dag()?.into_graph())
        }
        Algorithm::Notears => {
            let (wd, _) = notears(
                &standardize(ds),
                params.lambda1,
                params.w_threshold,
                params.h_tol,
                params.rho_max,
                params.notears_max_outer,
                seed,
            )?;
            Ok(wd.to_dag()?.into_graph())
        }
    }
}
