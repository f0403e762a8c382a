use itertools::Itertools;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::citests::normal_two_sided_p;
use crate::discovery::Algorithm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialTest {
    pub z: f64,
    pub p: f64,
}

/// One-sample test of an observed success rate against `p0` using the
/// normal approximation.
pub fn binomial_test(k: usize, n: usize, p0: f64) -> Result<BinomialTest> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::DegenerateTest(format!("null rate {p0} must lie in (0, 1)")));
    }
    if n == 0 || k > n {
        return Err(Error::Domain(format!("need 0 ≤ k ≤ n and n > 0, got k={k}, n={n}")));
    }
    let rate = k as f64 / n as f64;
    let z = (rate - p0) / (p0 * (1.0 - p0) / n as f64).sqrt();
    Ok(BinomialTest {
        z,
        p: normal_two_sided_p(z),
    })
}

/// Welch comparison of two algorithms. `mean_difference` is `a − b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: Algorithm,
    pub b: Algorithm,
    pub mean_difference: f64,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: f64,
    pub corrected_p: f64,
    pub cohens_d: Option<f64>,
    pub significant: bool,
    /// Both groups had zero variance.
    pub degenerate: bool,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn welch(a: Algorithm, xa: &[f64], b: Algorithm, xb: &[f64], pairs: usize) -> Result<PairComparison> {
    let (ma, va) = mean_var(xa);
    let (mb, vb) = mean_var(xb);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let diff = ma - mb;
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    let (t, df, p, d, degenerate) = if va == 0.0 && vb == 0.0 {
        let p = if diff == 0.0 { 1.0 } else { 0.0 };
        (None, None, p, (diff == 0.0).then_some(0.0), true)
    } else {
        let se2 = va / na + vb / nb;
        let t = diff / se2.sqrt();
        let df = se2.powi(2) / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::DegenerateTest(e.to_string()))?;
        let p = (2.0 * dist.sf(t.abs())).min(1.0);
        (Some(t), Some(df), p, Some(diff / pooled), false)
    };
    let corrected_p = (p * pairs as f64).min(1.0);
    Ok(PairComparison {
        a,
        b,
        mean_difference: diff,
        t,
        df,
        p,
        corrected_p,
        cohens_d: d,
        significant: corrected_p < 0.05,
        degenerate,
    })
}

/// All pairwise Welch tests with Bonferroni correction over the number of
/// pairs. Pairs are ordered by algorithm name, first name alphabetically
/// first.
pub fn pairwise_welch_bonferroni(groups: &[(Algorithm, Vec<f64>)]) -> Result<Vec<PairComparison>> {
    if let Some((alg, xs)) = groups.iter().find(|(_, xs)| xs.len() < 2) {
        return Err(Error::Domain(format!("{alg} has {} datasets, need at least 2", xs.len())));
    }
    let mut sorted: Vec<&(Algorithm, Vec<f64>)> = groups.iter().collect();
    sorted.sort_by_key(|(a, _)| a.name());
    if sorted.iter().map(|(a, _)| a).duplicates().next().is_some() {
        return Err(Error::Contract("an algorithm appears twice in the comparison".into()));
    }
    let pairs = sorted.len() * sorted.len().saturating_sub(1) / 2;
    let mut out: Vec<PairComparison> = sorted
        .iter()
        .tuple_combinations()
        .map(|((a, xa), (b, xb))| welch(*a, xa, *b, xb, pairs))
        .collect::<Result<_>>()?;
    out.sort_by(|x, y| (x.a.name(), x.b.name()).cmp(&(y.a.name(), y.b.name())));
    Ok(out)
}
