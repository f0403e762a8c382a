use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::{BayesNet, Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::seed;

/// Exogenous noise law of a linear SEM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum NoiseSpec {
    Gaussian { std: f64 },
    Uniform { half_width: f64 },
}

/// Data drawn from a linear SEM together with the coefficients used.
///
/// `coefficients[(child, parent)]` is the weight on the edge `parent → child`,
/// so the model reads `x = B x + e`.
#[derive(Debug, Clone)]
pub struct SemSample {
    pub data: Dataset,
    pub coefficients: DMatrix<f64>,
}

/// Forward sampling of a discrete Bayesian network in topological order.
pub fn ancestral_sample(net: &BayesNet, n: usize, seed: u64) -> Dataset {
    let d = net.d();
    let order = net.dag.topological_order();
    let mut rng = seed::stream(seed, "ancestral");
    let mut values = DMatrix::<f64>::zeros(n, d);
    let mut row_states = vec![0usize; d];
    for r in 0..n {
        for &j in &order {
            let cpt = &net.cpts[j];
            let cfg = cpt.config_index(cpt.parents.iter().map(|&q| row_states[q]));
            let probs = cpt.row(cfg);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut state = probs.len() - 1;
            for (s, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    state = s;
                    break;
                }
            }
            // zero-probability trailing states must never be chosen by rounding slack
            while probs[state] == 0.0 && state > 0 {
                state -= 1;
            }
            row_states[j] = state;
            values[(r, j)] = state as f64;
        }
    }
    let columns = (0..d)
        .map(|j| Column {
            name: net.names[j].clone(),
            kind: ColumnKind::Discrete {
                cardinality: net.cardinality(j),
            },
        })
        .collect();
    Dataset::new(values, columns).expect("ancestral samples respect cardinalities")
}

/// Linear SEM sampling with edge weights drawn uniformly on
/// `±[weight_low, weight_high]` (sign chosen uniformly).
pub fn sample_sem(
    dag: &Dag,
    n: usize,
    weight_low: f64,
    weight_high: f64,
    noise: NoiseSpec,
    seed: u64,
) -> Result<SemSample> {
    if !(weight_low <= weight_high) || weight_low < 0.0 {
        return Err(Error::Domain(format!(
            "weight range [{weight_low}, {weight_high}] is invalid"
        )));
    }
    let d = dag.d();
    let mut wrng = seed::stream(seed, "sem-weights");
    let mut coefficients = DMatrix::<f64>::zeros(d, d);
    for (parent, child) in dag.edges() {
        let magnitude = if weight_high > weight_low {
            wrng.random_range(weight_low..=weight_high)
        } else {
            weight_low
        };
        let sign = if wrng.random::<bool>() { 1.0 } else { -1.0 };
        coefficients[(child, parent)] = sign * magnitude;
    }

    let mut nrng = seed::stream(seed, "sem-noise");
    let mut noise_draw: Box<dyn FnMut() -> f64> = match noise {
        NoiseSpec::Gaussian { std } => {
            if !(std > 0.0) {
                return Err(Error::Domain(format!("noise std {std} must be positive")));
            }
            let law = Normal::new(0.0, std).expect("positive std");
            Box::new(move || law.sample(&mut nrng))
        }
        NoiseSpec::Uniform { half_width } => {
            if !(half_width > 0.0) {
                return Err(Error::Domain(format!("noise half-width {half_width} must be positive")));
            }
            let law = Uniform::new_inclusive(-half_width, half_width).expect("valid bounds");
            Box::new(move || law.sample(&mut nrng))
        }
    };

    let order = dag.topological_order();
    let parents: Vec<Vec<usize>> = (0..d).map(|j| dag.parents(j)).collect();
    let mut values = DMatrix::<f64>::zeros(n, d);
    for r in 0..n {
        for &j in &order {
            let mut x = noise_draw();
            for &q in &parents[j] {
                x += coefficients[(j, q)] * values[(r, q)];
            }
            values[(r, j)] = x;
        }
    }
    Ok(SemSample {
        data: Dataset::continuous(values),
        coefficients,
    })
}

pub fn sample_linear_gaussian(
    dag: &Dag,
    n: usize,
    weight_low: f64,
    weight_high: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    sample_sem(dag, n, weight_low, weight_high, NoiseSpec::Gaussian { std: noise_std }, seed)
        .map(|s| s.data)
}

/// Linear SEM with noise uniform on `[−half_width, half_width]`.
pub fn sample_linear_nongaussian(
    dag: &Dag,
    n: usize,
    weight_low: f64,
    weight_high: f64,
    half_width: f64,
    seed: u64,
) -> Result<Dataset> {
    sample_sem(dag, n, weight_low, weight_high, NoiseSpec::Uniform { half_width }, seed)
        .map(|s| s.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_bif;

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    fn cov(x: &[f64], y: &[f64]) -> f64 {
        let (mx, my) = (mean(x), mean(y));
        x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64
    }

    const COIN: &str = "variable A { type discrete [ 2 ] { a0, a1 }; }
        variable B { type discrete [ 2 ] { b0, b1 }; }
        probability ( A ) { table 0.7, 0.3; }
        probability ( B | A ) { (a0) 1.0, 0.0; (a1) 0.0, 1.0; }";

    #[test]
    fn ancestral_marginal_and_copy_mechanism() {
        let net = parse_bif(COIN).unwrap();
        let ds = ancestral_sample(&net, 100_000, 3);
        assert!((mean(ds.col(0)) - 0.3).abs() < 0.01);
        assert_eq!(ds.col(0), ds.col(1));
        assert_eq!(ds, ancestral_sample(&net, 100_000, 3));
    }

    #[test]
    fn deterministic_cpts_give_one_configuration() {
        let net = parse_bif(
            "variable A { type discrete [ 3 ] { x, y, z }; }\nprobability ( A ) { table 0.0, 1.0, 0.0; }",
        )
        .unwrap();
        let ds = ancestral_sample(&net, 500, 1);
        assert!(ds.col(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gaussian_single_edge_variance() {
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let ds = sample_linear_gaussian(&dag, 100_000, 1.0, 1.0, 1.0, 4).unwrap();
        assert!((cov(ds.col(1), ds.col(1)) - 2.0).abs() < 0.05);
    }

    #[test]
    fn empty_dag_columns_uncorrelated() {
        let ds = sample_linear_gaussian(&Dag::empty(3), 100_000, 0.5, 2.0, 1.0, 8).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(cov(ds.col(i), ds.col(j)).abs() < 0.02);
            }
        }
    }

    #[test]
    fn uniform_noise_excess_kurtosis() {
        let ds = sample_linear_nongaussian(&Dag::empty(2), 100_000, 0.5, 2.0, 1.0, 5).unwrap();
        for j in 0..2 {
            let x = ds.col(j);
            let m = mean(x);
            let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
            let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / x.len() as f64;
            assert!((m4 / (m2 * m2) - 3.0 + 1.2).abs() < 0.1);
        }
        let single = sample_linear_nongaussian(&Dag::empty(1), 1000, 0.5, 2.0, 0.5, 5).unwrap();
        assert!(single.col(0).iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn nongaussian_slope_recovered() {
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let s = sample_sem(&dag, 100_000, 2.0, 2.0, NoiseSpec::Uniform { half_width: 1.0 }, 6).unwrap();
        let w = s.coefficients[(1, 0)];
        let slope = cov(s.data.col(0), s.data.col(1)) / cov(s.data.col(0), s.data.col(0));
        assert!((slope - w).abs() < 0.05, "{slope} vs {w}");
    }

    #[test]
    fn sem_covariance_matches_analytic() {
        for (d, seed) in [(3usize, 1u64), (4, 2), (5, 3)] {
            let dag = crate::graphs::generate_er_dag(d, 0.6, seed).unwrap();
            let s = sample_sem(&dag, 100_000, 0.5, 1.0, NoiseSpec::Gaussian { std: 1.0 }, seed).unwrap();
            let inv = (DMatrix::<f64>::identity(d, d) - &s.coefficients)
                .try_inverse()
                .unwrap();
            let analytic = &inv * inv.transpose();
            for i in 0..d {
                for j in 0..d {
                    let emp = cov(s.data.col(i), s.data.col(j));
                    assert!(
                        (emp - analytic[(i, j)]).abs() < 0.05,
                        "d={d} ({i},{j}): {emp} vs {}",
                        analytic[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let dag = Dag::empty(2);
        assert!(sample_linear_gaussian(&dag, 10, 2.0, 1.0, 1.0, 0).is_err());
        assert!(sample_linear_gaussian(&dag, 10, 0.5, 1.0, 0.0, 0).is_err());
    }
}
