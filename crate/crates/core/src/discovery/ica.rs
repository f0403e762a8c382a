use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Result of a FastICA run. `unmixing` maps centred observations to
/// sources: `s = unmixing · (x − mean)`.
#[derive(Debug, Clone)]
pub struct IcaFit {
    pub unmixing: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// `(W Wᵀ)^{-1/2} W`.
fn sym_decorrelate(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(w * w.transpose());
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-300)) {
        return Err(Error::Singular("ICA rows became linearly dependent".into()));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w)
}

/// Symmetric FastICA with the `tanh` contrast on eigen-whitened data.
pub fn fastica(ds: &Dataset, n_components: usize, seed_value: u64, max_iter: usize, tol: f64) -> Result<IcaFit> {
    let (n, d) = (ds.n(), ds.d());
    if n_components == 0 || n_components > d {
        return Err(Error::Domain(format!("n_components {n_components} must lie in 1..={d}")));
    }
    if n < 2 {
        return Err(Error::Domain("ICA needs at least two samples".into()));
    }
    let mut x = ds.values().clone();
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    let cov = x.transpose() * &x / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[idx[0]];
    let floor = eig.eigenvalues[idx[n_components - 1]];
    if !(top > 0.0) || floor <= 1e-10 * top {
        return Err(Error::Singular(format!(
            "covariance is rank deficient (eigenvalue {floor:e} vs {top:e})"
        )));
    }
    let k = n_components;
    let whitening = DMatrix::from_fn(k, d, |r, c| eig.eigenvectors[(c, idx[r])] / eig.eigenvalues[idx[r]].sqrt());
    let z = &x * whitening.transpose();

    let mut rng = seed::stream(seed_value, "fastica-init");
    let init = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let mut w = sym_decorrelate(&init)?;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let y = &z * w.transpose();
        let g = y.map(f64::tanh);
        let g_prime_mean: Vec<f64> = (0..k)
            .map(|c| g.column(c).iter().map(|v| 1.0 - v * v).sum::<f64>() / n as f64)
            .collect();
        let mut w_new = g.transpose() * &z / n as f64;
        for r in 0..k {
            let row = w.row(r) * g_prime_mean[r];
            let mut target = w_new.row_mut(r);
            target -= row;
        }
        let w_new = sym_decorrelate(&w_new)?;
        let lim = (&w_new * w.transpose())
            .diagonal()
            .iter()
            .map(|v| (v.abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = w_new;
        if lim < tol {
            converged = true;
            break;
        }
    }
    Ok(IcaFit {
        unmixing: w * whitening,
        converged,
        iterations,
    })
}
