use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::WeightedDag;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graphs::adjacency_is_acyclic;
use crate::seed;

/// Largest `‖W∘W‖₁` accepted by the matrix exponential.
pub const EXPM_NORM_BOUND: f64 = 100.0;

const MAX_INNER: usize = 5000;
const LBFGS_MEMORY: usize = 10;
const PG_TOL: f64 = 1e-5;
const F_TOL: f64 = 2.2e-9;
const ARMIJO: f64 = 1e-4;
const INIT_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotearsIter {
    pub h: f64,
    pub rho: f64,
    pub alpha: f64,
    pub objective: f64,
}

/// Accepted outer iterations of the augmented Lagrangian and the final
/// (unthresholded) weights, row = child.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NotearsTrace {
    pub iterations: Vec<NotearsIter>,
    pub final_w: Vec<Vec<f64>>,
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring on a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let norm = one_norm(a);
    let mut s = 0i32;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let scaled = a / 2f64.powi(s);
    let mut term = DMatrix::<f64>::identity(d, d);
    let mut sum = term.clone();
    // ‖A‖ ≤ 0.5 so 0.5^k / k! drops below 1e-18 well before k = 18
    for k in 1..=18 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `h(W) = tr(e^{W∘W}) − d` and its gradient `(e^{W∘W})ᵀ ∘ 2W`.
pub fn acyclicity_h(w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let e = expm(&w.component_mul(w));
    let h = e.trace() - w.nrows() as f64;
    let grad = e.transpose().component_mul(w) * 2.0;
    (h, grad)
}

struct Problem {
    cov: DMatrix<f64>,
    lambda1: f64,
    rho: f64,
    alpha: f64,
}

struct Eval {
    smooth: f64,
    grad: DMatrix<f64>,
    h: f64,
}

impl Problem {
    /// Smooth part `½ tr((I−W) C (I−W)ᵀ) + ρ/2 h² + α h`, or `None` when W
    /// leaves the region where the exponential is trusted.
    fn eval(&self, w: &DMatrix<f64>) -> Option<Eval> {
        if one_norm(&w.component_mul(w)) > EXPM_NORM_BOUND {
            return None;
        }
        let d = w.nrows();
        let resid = DMatrix::<f64>::identity(d, d) - w;
        let rc = &resid * &self.cov;
        let loss = 0.5 * rc.component_mul(&resid).sum();
        let (h, grad_h) = acyclicity_h(w);
        let smooth = loss + 0.5 * self.rho * h * h + self.alpha * h;
        if !smooth.is_finite() {
            return None;
        }
        let mut grad = -rc + grad_h * (self.rho * h + self.alpha);
        grad.fill_diagonal(0.0);
        Some(Eval { smooth, grad, h })
    }

    fn objective(&self, w: &DMatrix<f64>, smooth: f64) -> f64 {
        smooth + self.lambda1 * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Value and gradient over the split `W = W⁺ − W⁻` with both parts
    /// nonnegative, where the L1 penalty becomes linear.
    fn eval_split(&self, x: &[f64]) -> Option<(f64, Vec<f64>, f64)> {
        let d = self.cov.nrows();
        let dd = d * d;
        let w = DMatrix::from_fn(d, d, |i, j| x[i * d + j] - x[dd + i * d + j]);
        let e = self.eval(&w)?;
        let f = e.smooth + self.lambda1 * x.iter().sum::<f64>();
        let mut g = vec![0.0; 2 * dd];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                g[k] = e.grad[(i, j)] + self.lambda1;
                g[dd + k] = -e.grad[(i, j)] + self.lambda1;
            }
        }
        Some((f, g, e.h))
    }

    /// Projected limited-memory BFGS on the nonnegative split. Diagonal
    /// entries stay pinned at zero.
    fn solve(&self, start: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64, f64)> {
        let d = start.nrows();
        let dd = d * d;
        let fixed = |k: usize| (k % dd) / d == (k % dd) % d;
        let mut x = vec![0.0; 2 * dd];
        for i in 0..d {
            for j in 0..d {
                let v = start[(i, j)];
                x[i * d + j] = v.max(0.0);
                x[dd + i * d + j] = (-v).max(0.0);
            }
        }
        let (mut f, mut g, mut h) = self.eval_split(&x)?;
        let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(LBFGS_MEMORY);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        for _ in 0..MAX_INNER {
            // variables held at their bound by the gradient are frozen this step
            let active: Vec<bool> = (0..2 * dd).map(|k| fixed(k) || (x[k] <= 0.0 && g[k] > 0.0)).collect();
            let pg_max = (0..2 * dd).filter(|&k| !active[k]).map(|k| g[k].abs()).fold(0.0, f64::max);
            if pg_max < PG_TOL {
                break;
            }
            let mut q: Vec<f64> = (0..2 * dd).map(|k| if active[k] { 0.0 } else { g[k] }).collect();
            let mut coef = Vec::with_capacity(mem.len());
            for (sv, yv, rho) in mem.iter().rev() {
                let a = rho * dot(sv, &q);
                q.iter_mut().zip(yv).for_each(|(qk, yk)| *qk -= a * yk);
                coef.push(a);
            }
            if let Some((sv, yv, _)) = mem.last() {
                let gamma = dot(sv, yv) / dot(yv, yv);
                q.iter_mut().for_each(|v| *v *= gamma);
            }
            for ((sv, yv, rho), a) in mem.iter().zip(coef.iter().rev()) {
                let b = rho * dot(yv, &q);
                q.iter_mut().zip(sv).for_each(|(qk, sk)| *qk += (a - b) * sk);
            }
            let mut dir: Vec<f64> = (0..2 * dd).map(|k| if active[k] { 0.0 } else { -q[k] }).collect();
            if dot(&dir, &g) >= 0.0 {
                mem.clear();
                dir = (0..2 * dd).map(|k| if active[k] { 0.0 } else { -g[k] }).collect();
            }
            let mut t = if mem.is_empty() { 1.0 / pg_max.max(1.0) } else { 1.0 };
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = x.iter().zip(&dir).map(|(xk, dk)| (xk + t * dk).max(0.0)).collect();
                if let Some((fc, gc, hc)) = self.eval_split(&cand) {
                    let step: Vec<f64> = cand.iter().zip(&x).map(|(c, xk)| c - xk).collect();
                    if fc <= f + ARMIJO * dot(&g, &step) {
                        accepted = Some((cand, fc, gc, hc, step));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((cand, fc, gc, hc, step)) = accepted else {
                break;
            };
            let yv: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&step, &yv);
            if sy > 1e-12 * dot(&yv, &yv).max(f64::MIN_POSITIVE) {
                if mem.len() == LBFGS_MEMORY {
                    mem.remove(0);
                }
                mem.push((step, yv, 1.0 / sy));
            }
            let rel = (f - fc) / f.abs().max(fc.abs()).max(1.0);
            x = cand;
            f = fc;
            g = gc;
            h = hc;
            if rel <= F_TOL {
                break;
            }
        }
        let w = DMatrix::from_fn(d, d, |i, j| x[i * d + j] - x[dd + i * d + j]);
        let obj = self.objective(&w, f - self.lambda1 * x.iter().sum::<f64>());
        Some((w, h, obj))
    }
}

fn trace_with(iterations: &[NotearsIter], w: &DMatrix<f64>) -> Box<NotearsTrace> {
    Box::new(NotearsTrace {
        iterations: iterations.to_vec(),
        final_w: w.row_iter().map(|r| r.iter().copied().collect()).collect(),
    })
}

/// Zeroes weights at or below `threshold`, raising it until the support is
/// acyclic.
fn threshold_to_dag(w: &DMatrix<f64>, threshold: f64) -> WeightedDag {
    let d = w.nrows();
    let acyclic_at = |t: f64| adjacency_is_acyclic(d, |p, c| p != c && w[(c, p)].abs() > t);
    let mut used = threshold;
    if !acyclic_at(used) {
        let mut mags: Vec<f64> = w.iter().map(|v| v.abs()).filter(|&v| v > threshold).collect();
        mags.sort_by(f64::total_cmp);
        mags.dedup();
        used = mags
            .into_iter()
            .find(|&t| acyclic_at(t))
            .expect("the empty support is acyclic");
    }
    WeightedDag {
        w: w.map(|v| if v.abs() > used { v } else { 0.0 }),
        threshold_used: used,
    }
}

/// Linear NOTEARS by augmented Lagrangian on standardized data.
pub fn notears(
    ds: &Dataset,
    lambda1: f64,
    w_threshold: f64,
    h_tol: f64,
    rho_max: f64,
    max_outer: usize,
    seed_value: u64,
) -> Result<(WeightedDag, NotearsTrace)> {
    let (n, d) = (ds.n(), ds.d());
    if n == 0 {
        return Err(Error::Domain("NOTEARS on an empty dataset".into()));
    }
    let x = ds.values();
    let cov = x.transpose() * x / n as f64;
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite data".into()));
    }

    // tiny seeded asymmetry so standardized, transpose-symmetric problems do not sit on a saddle
    let mut rng = seed::stream(seed_value, "notears-init");
    let mut w = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            0.0
        } else {
            rng.random_range(-INIT_SCALE..INIT_SCALE)
        }
    });

    let mut problem = Problem {
        cov,
        lambda1,
        rho: 1.0,
        alpha: 0.0,
    };
    let mut h = f64::INFINITY;
    let mut iterations: Vec<NotearsIter> = Vec::new();
    for _ in 0..max_outer {
        let (w_new, h_new, obj_new) = loop {
            let Some(sol) = problem.solve(&w) else {
                return Err(Error::Optimization {
                    message: format!("objective diverged at rho = {:e}", problem.rho),
                    trace: trace_with(&iterations, &w),
                });
            };
            if sol.1 > 0.25 * h && problem.rho < rho_max {
                problem.rho = (problem.rho * 10.0).min(rho_max);
            } else {
                break sol;
            }
        };
        if !obj_new.is_finite() {
            return Err(Error::Optimization {
                message: "non-finite objective".into(),
                trace: trace_with(&iterations, &w_new),
            });
        }
        if h_new <= h {
            w = w_new;
            h = h_new;
            problem.alpha += problem.rho * h;
            iterations.push(NotearsIter {
                h,
                rho: problem.rho,
                alpha: problem.alpha,
                objective: obj_new,
            });
        }
        if h <= h_tol || problem.rho >= rho_max {
            break;
        }
    }
    let trace = NotearsTrace {
        iterations,
        final_w: w.row_iter().map(|r| r.iter().copied().collect()).collect(),
    };
    Ok((threshold_to_dag(&w, w_threshold), trace))
}
