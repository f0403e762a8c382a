//! Conditional-independence tests used by the constraint-based learners.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::{erf, gamma};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    FisherZ,
    GSquare,
}

/// Test selection for a learner. `Auto` picks G² when every column is
/// discrete and Fisher-z on the numeric coding otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiTest {
    FisherZ,
    GSquare,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiDecision {
    pub independent: bool,
    pub statistic: f64,
    pub p_value: f64,
    pub test_kind: TestKind,
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided normal tail `2(1 − Φ(|z|))`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Upper tail of the chi-square law, `Q(df/2, x/2)`.
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("chi-square needs df ≥ 1".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("chi-square statistic {x} must be ≥ 0")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma::gamma_ur(df as f64 / 2.0, x / 2.0))
}

/// `½ ln((1+ρ)/(1−ρ)) · √(n − |S| − 3)`.
pub fn fisher_z(rho: f64, n: usize, s_size: usize) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("|rho| = {} must be < 1", rho.abs())));
    }
    if n <= s_size + 3 {
        return Err(Error::Domain(format!(
            "n = {n} too small for conditioning set of size {s_size}"
        )));
    }
    Ok(0.5 * ((1.0 + rho) / (1.0 - rho)).ln() * ((n - s_size - 3) as f64).sqrt())
}

fn check_sizes(ds: &Dataset, i: usize, j: usize, s: &[usize]) -> Result<()> {
    let d = ds.d();
    if i >= d || j >= d || s.iter().any(|&k| k >= d) {
        return Err(Error::Dimension {
            expected: d,
            actual: i.max(j).max(s.iter().copied().max().unwrap_or(0)) + 1,
        });
    }
    if ds.n() <= s.len() + 3 {
        return Err(Error::Domain(format!(
            "n = {} too small for conditioning set of size {}",
            ds.n(),
            s.len()
        )));
    }
    Ok(())
}

/// Partial correlation of columns `i` and `j` given `s`, by least-squares
/// residualization of both columns on `[1, X_s]`.
pub fn partial_correlation(ds: &Dataset, i: usize, j: usize, s: &[usize]) -> Result<f64> {
    check_sizes(ds, i, j, s)?;
    if i == j {
        return Ok(1.0);
    }
    let n = ds.n();
    let design = DMatrix::from_fn(n, s.len() + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            ds.values()[(r, s[c - 1])]
        }
    });
    let qr = design.qr();
    let rdiag = qr.r().diagonal();
    let scale = rdiag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if rdiag.iter().any(|v| v.abs() <= 1e-10 * scale.max(1.0)) {
        return Err(Error::Singular(format!("conditioning set {s:?} is collinear")));
    }
    let q = qr.q();
    let residual = |col: usize| {
        let y = DVector::from_column_slice(ds.col(col));
        let fitted = &q * (q.transpose() * &y);
        y - fitted
    };
    let ri = residual(i);
    let rj = residual(j);
    let (ni, nj) = (ri.norm(), rj.norm());
    if ni == 0.0 || nj == 0.0 {
        return Err(Error::Singular(format!(
            "column {} has no variance after conditioning",
            if ni == 0.0 { i } else { j }
        )));
    }
    Ok((ri.dot(&rj) / (ni * nj)).clamp(-1.0, 1.0))
}

/// Partial correlation from a covariance (or correlation) matrix via the
/// inverse of the `{i, j} ∪ s` block: `−P₀₁ / √(P₀₀ P₁₁)`.
pub fn partial_correlation_from_cov(cov: &DMatrix<f64>, i: usize, j: usize, s: &[usize]) -> Result<f64> {
    if i == j {
        return Ok(1.0);
    }
    let idx: Vec<usize> = [i, j].into_iter().chain(s.iter().copied()).collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |a, b| cov[(idx[a], idx[b])]);
    let chol = sub
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("covariance block for {idx:?} is not positive definite")))?;
    let p = chol.inverse();
    let denom = (p[(0, 0)] * p[(1, 1)]).sqrt();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Singular(format!("degenerate precision block for {idx:?}")));
    }
    Ok((-p[(0, 1)] / denom).clamp(-1.0, 1.0))
}

fn fisher_decision(rho: f64, n: usize, s_size: usize, alpha: f64) -> Result<CiDecision> {
    let (statistic, p_value) = if rho.abs() >= 1.0 {
        (rho.signum() * f64::INFINITY, 0.0)
    } else {
        let z = fisher_z(rho, n, s_size)?;
        (z, normal_two_sided_p(z))
    };
    Ok(CiDecision {
        independent: p_value > alpha,
        statistic,
        p_value,
        test_kind: TestKind::FisherZ,
    })
}

pub fn ci_test_fisher_z(ds: &Dataset, i: usize, j: usize, s: &[usize], alpha: f64) -> Result<CiDecision> {
    let rho = partial_correlation(ds, i, j, s)?;
    fisher_decision(rho, ds.n(), s.len(), alpha)
}

fn discrete_codes(ds: &Dataset, col: usize) -> Result<(Vec<usize>, usize)> {
    let card = ds.cardinality(col).ok_or_else(|| {
        Error::Contract(format!("G² test needs discrete columns; column {col} is continuous"))
    })?;
    Ok((ds.col(col).iter().map(|&v| v as usize).collect(), card))
}

fn gsquare_from_codes(
    codes: &[Vec<usize>],
    cards: &[usize],
    i: usize,
    j: usize,
    s: &[usize],
    alpha: f64,
) -> Result<CiDecision> {
    let (ri, rj) = (cards[i], cards[j]);
    let strata: usize = s.iter().map(|&k| cards[k]).product();
    let df = (ri.saturating_sub(1)) * (rj.saturating_sub(1)) * strata;
    if df == 0 {
        return Err(Error::DegenerateTest(format!(
            "G² for ({i}, {j} | {s:?}) has zero degrees of freedom"
        )));
    }
    let n = codes[i].len();
    let mut counts = vec![0u64; strata * ri * rj];
    for r in 0..n {
        let stratum = s.iter().fold(0, |acc, &k| acc * cards[k] + codes[k][r]);
        counts[(stratum * ri + codes[i][r]) * rj + codes[j][r]] += 1;
    }
    let mut g2 = 0.0;
    for table in counts.chunks(ri * rj) {
        let total: u64 = table.iter().sum();
        if total == 0 {
            continue;
        }
        let rows: Vec<u64> = (0..ri).map(|a| table[a * rj..(a + 1) * rj].iter().sum()).collect();
        let cols: Vec<u64> = (0..rj).map(|b| (0..ri).map(|a| table[a * rj + b]).sum()).collect();
        for a in 0..ri {
            for b in 0..rj {
                let o = table[a * rj + b];
                if o > 0 {
                    let e = rows[a] as f64 * cols[b] as f64 / total as f64;
                    g2 += o as f64 * (o as f64 / e).ln();
                }
            }
        }
    }
    let statistic = (2.0 * g2).max(0.0);
    let p_value = chi_square_sf(statistic, df)?;
    Ok(CiDecision {
        independent: p_value > alpha,
        statistic,
        p_value,
        test_kind: TestKind::GSquare,
    })
}

/// G² likelihood-ratio test on the stratified contingency table.
pub fn ci_test_gsquare(ds: &Dataset, i: usize, j: usize, s: &[usize], alpha: f64) -> Result<CiDecision> {
    if ds.n() == 0 {
        return Err(Error::Domain("G² test on empty dataset".into()));
    }
    let d = ds.d();
    let mut codes = vec![Vec::new(); d];
    let mut cards = vec![0; d];
    for k in [i, j].iter().chain(s) {
        let (c, card) = discrete_codes(ds, *k)?;
        codes[*k] = c;
        cards[*k] = card;
    }
    gsquare_from_codes(&codes, &cards, i, j, s, alpha)
}

/// A CI test bound to one dataset, with per-dataset precomputation done once.
pub struct CiTester {
    kind: TestKind,
    alpha: f64,
    n: usize,
    corr: Option<DMatrix<f64>>,
    codes: Vec<Vec<usize>>,
    cards: Vec<usize>,
}

impl CiTester {
    pub fn new(ds: &Dataset, test: CiTest, alpha: f64) -> Result<Self> {
        let kind = match test {
            CiTest::FisherZ => TestKind::FisherZ,
            CiTest::GSquare => TestKind::GSquare,
            CiTest::Auto if ds.is_all_discrete() => TestKind::GSquare,
            CiTest::Auto => TestKind::FisherZ,
        };
        let mut tester = CiTester {
            kind,
            alpha,
            n: ds.n(),
            corr: None,
            codes: Vec::new(),
            cards: Vec::new(),
        };
        match kind {
            TestKind::FisherZ => tester.corr = Some(correlation_matrix(ds)),
            TestKind::GSquare => {
                for j in 0..ds.d() {
                    let (c, card) = discrete_codes(ds, j)?;
                    tester.codes.push(c);
                    tester.cards.push(card);
                }
            }
        }
        Ok(tester)
    }

    pub fn kind(&self) -> TestKind {
        self.kind
    }

    pub fn test(&self, i: usize, j: usize, s: &[usize]) -> Result<CiDecision> {
        match self.kind {
            TestKind::FisherZ => {
                if self.n <= s.len() + 3 {
                    return Err(Error::Domain(format!(
                        "n = {} too small for conditioning set of size {}",
                        self.n,
                        s.len()
                    )));
                }
                let corr = self.corr.as_ref().expect("fisher-z tester holds correlations");
                let rho = match partial_correlation_from_cov(corr, i, j, s) {
                    Ok(r) => r,
                    // perfectly collinear blocks: treat as maximal dependence
                    Err(Error::Singular(_)) => 1.0,
                    Err(e) => return Err(e),
                };
                fisher_decision(rho, self.n, s.len(), self.alpha)
            }
            TestKind::GSquare => gsquare_from_codes(&self.codes, &self.cards, i, j, s, self.alpha),
        }
    }
}

/// Pearson correlation matrix; constant columns get unit diagonal and zero
/// off-diagonal entries.
pub fn correlation_matrix(ds: &Dataset) -> DMatrix<f64> {
    let (n, d) = (ds.n() as f64, ds.d());
    let means: Vec<f64> = (0..d).map(|j| ds.col(j).iter().sum::<f64>() / n).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let (xa, xb) = (ds.col(a), ds.col(b));
            let c = xa
                .iter()
                .zip(xb)
                .map(|(u, v)| (u - means[a]) * (v - means[b]))
                .sum::<f64>()
                / n;
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    let sd: Vec<f64> = (0..d).map(|j| cov[(j, j)].sqrt()).collect();
    DMatrix::from_fn(d, d, |a, b| {
        if a == b {
            1.0
        } else if sd[a] > 0.0 && sd[b] > 0.0 {
            cov[(a, b)] / (sd[a] * sd[b])
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_linear_gaussian, Column, ColumnKind};
    use crate::graphs::Dag;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_ds(n: usize, d: usize, seed_value: u64) -> Dataset {
        let mut rng = seed::stream(seed_value, "test-gauss");
        Dataset::continuous(DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng)))
    }

    #[test]
    fn fisher_z_values() {
        assert_eq!(fisher_z(0.0, 50, 0).unwrap(), 0.0);
        let expect = 0.5 * 3f64.ln() * 96f64.sqrt();
        assert!((fisher_z(0.5, 100, 1).unwrap() - 5.3822).abs() < 1e-3);
        assert!((fisher_z(0.5, 100, 1).unwrap() - expect).abs() < 1e-12);
        assert_eq!(fisher_z(-0.5, 100, 1).unwrap(), -fisher_z(0.5, 100, 1).unwrap());
        assert!(matches!(fisher_z(1.0, 100, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn normal_tail_at_1_96() {
        assert!((normal_two_sided_p(1.959964) - 0.05).abs() < 1e-6);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-10, "{}", normal_cdf(1.0));
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_sf(0.0, 3).unwrap(), 1.0);
        assert!((chi_square_sf(2.0 * 2f64.ln(), 2).unwrap() - 0.5).abs() < 1e-12);
        // df=1: Q = erfc(√(x/2))
        let q = chi_square_sf(3.841, 1).unwrap();
        assert!((q - 0.05).abs() < 5e-4);
        assert!((q - erf::erfc((3.841f64 / 2.0).sqrt())).abs() < 1e-8);
        assert!(chi_square_sf(1.0, 0).is_err());
    }

    #[test]
    fn partial_correlation_definitions() {
        let ds = gaussian_ds(200, 3, 1);
        let r = partial_correlation(&ds, 0, 1, &[]).unwrap();
        let c = correlation_matrix(&ds);
        assert!((r - c[(0, 1)]).abs() < 1e-12);
        assert_eq!(partial_correlation(&ds, 2, 2, &[]).unwrap(), 1.0);
    }

    #[test]
    fn chain_partial_correlation_vanishes() {
        let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let ds = sample_linear_gaussian(&dag, 100_000, 0.8, 1.2, 1.0, 3).unwrap();
        assert!(partial_correlation(&ds, 0, 2, &[1]).unwrap().abs() < 0.02);
        assert!(partial_correlation(&ds, 0, 2, &[]).unwrap().abs() > 0.2);
    }

    #[test]
    fn collinear_conditioning_set_is_singular() {
        let mut values = DMatrix::<f64>::zeros(20, 4);
        for r in 0..20 {
            values[(r, 0)] = r as f64;
            values[(r, 1)] = (r * r) as f64;
            values[(r, 2)] = 2.0 * r as f64;
            values[(r, 3)] = (r % 3) as f64;
        }
        let ds = Dataset::continuous(values);
        assert!(matches!(
            partial_correlation(&ds, 1, 3, &[0, 2]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn perfectly_correlated_is_dependent() {
        let x: Vec<f64> = (0..100).map(|v| v as f64).collect();
        let values = DMatrix::from_fn(100, 2, |r, c| x[r] * (c as f64 + 1.0));
        let ds = Dataset::continuous(values);
        let dec = ci_test_fisher_z(&ds, 0, 1, &[], 0.05).unwrap();
        assert!(!dec.independent && dec.p_value < 1e-10);
    }

    fn coin_ds(n: usize, seed_value: u64, copy: bool) -> Dataset {
        let mut rng = seed::stream(seed_value, "coins");
        let mut values = DMatrix::<f64>::zeros(n, 2);
        for r in 0..n {
            values[(r, 0)] = rng.random_range(0..2) as f64;
            values[(r, 1)] = if copy { values[(r, 0)] } else { rng.random_range(0..2) as f64 };
        }
        let col = |name: &str| Column {
            name: name.into(),
            kind: ColumnKind::Discrete { cardinality: 2 },
        };
        Dataset::new(values, vec![col("a"), col("b")]).unwrap()
    }

    #[test]
    fn gsquare_examples() {
        let dec = ci_test_gsquare(&coin_ds(1000, 1, true), 0, 1, &[], 0.05).unwrap();
        assert!(!dec.independent && dec.p_value < 1e-6);

        let values = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let col = |name: &str| Column {
            name: name.into(),
            kind: ColumnKind::Discrete { cardinality: 2 },
        };
        let ds = Dataset::new(values, vec![col("a"), col("b")]).unwrap();
        let dec = ci_test_gsquare(&ds, 0, 1, &[], 0.05).unwrap();
        assert_eq!(dec.statistic, 0.0);
        assert_eq!(dec.p_value, 1.0);
    }

    #[test]
    fn gsquare_degenerate_df() {
        let values = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let cols = vec![
            Column {
                name: "a".into(),
                kind: ColumnKind::Discrete { cardinality: 1 },
            },
            Column {
                name: "b".into(),
                kind: ColumnKind::Discrete { cardinality: 2 },
            },
        ];
        let ds = Dataset::new(values, cols).unwrap();
        assert!(matches!(
            ci_test_gsquare(&ds, 0, 1, &[], 0.05),
            Err(Error::DegenerateTest(_))
        ));
    }

    #[test]
    fn tester_matches_direct_tests() {
        let ds = gaussian_ds(500, 4, 9);
        let t = CiTester::new(&ds, CiTest::Auto, 0.05).unwrap();
        assert_eq!(t.kind(), TestKind::FisherZ);
        let a = t.test(0, 1, &[2, 3]).unwrap();
        let b = ci_test_fisher_z(&ds, 0, 1, &[2, 3], 0.05).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-7);

        let coins = coin_ds(300, 2, false);
        let t = CiTester::new(&coins, CiTest::Auto, 0.05).unwrap();
        assert_eq!(t.kind(), TestKind::GSquare);
        assert_eq!(t.test(0, 1, &[]).unwrap(), ci_test_gsquare(&coins, 0, 1, &[], 0.05).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn fisher_z_monotone_and_odd(a in -0.99f64..0.99, b in -0.99f64..0.99) {
            let (za, zb) = (fisher_z(a, 60, 2).unwrap(), fisher_z(b, 60, 2).unwrap());
            if a < b { prop_assert!(za < zb); }
            prop_assert!((fisher_z(-a, 60, 2).unwrap() + za).abs() < 1e-12);
        }

        #[test]
        fn chi_square_sf_decreasing(x in 0.0f64..50.0, dx in 0.01f64..5.0, df in 1usize..20) {
            prop_assert!(chi_square_sf(x + dx, df).unwrap() < chi_square_sf(x, df).unwrap());
        }

        /// Residualization and precision-matrix routes agree on random
        /// well-conditioned covariances.
        #[test]
        fn partial_correlation_routes_agree(seed_value in any::<u64>()) {
            let d = 5;
            let mut rng = seed::stream(seed_value, "mix");
            let mix = DMatrix::from_fn(d, d, |i, j| {
                let v: f64 = StandardNormal.sample(&mut rng);
                if i == j { 2.0 + v.abs() } else { 0.5 * v }
            });
            let base = gaussian_ds(300, d, seed_value);
            let ds = Dataset::continuous(base.values() * mix.transpose());
            let corr = correlation_matrix(&ds);
            for (i, j, s) in [(0usize, 1usize, vec![]), (0, 4, vec![1, 2]), (2, 3, vec![0, 1, 4])] {
                let a = partial_correlation(&ds, i, j, &s).unwrap();
                let b = partial_correlation_from_cov(&corr, i, j, &s).unwrap();
                prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
            }
        }
    }
}
