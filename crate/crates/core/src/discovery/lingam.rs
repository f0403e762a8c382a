use itertools::Itertools;
use nalgebra::DMatrix;

use super::{fastica, WeightedDag};
use crate::data::Dataset;
use crate::error::Result;

const EXHAUSTIVE_MAX_D: usize = 8;

#[derive(Debug, Clone)]
pub struct LingamFit {
    pub dag: WeightedDag,
    pub causal_order: Vec<usize>,
    pub converged: bool,
}

/// Row permutation of the unmixing matrix that puts large entries on the
/// diagonal (minimizing Σ 1/|Wᵢᵢ|), followed by row normalization so the
/// diagonal is one.
pub fn permute_unmixing(w: &DMatrix<f64>) -> DMatrix<f64> {
    let d = w.nrows();
    let cost = |row: usize, col: usize| {
        let v = w[(row, col)].abs();
        if v > 0.0 {
            1.0 / v
        } else {
            f64::INFINITY
        }
    };
    // rows[col] = which source row lands on diagonal position col
    let rows: Vec<usize> = if d <= EXHAUSTIVE_MAX_D {
        let mut best = (f64::INFINITY, (0..d).collect::<Vec<_>>());
        for perm in (0..d).permutations(d) {
            let c: f64 = perm.iter().enumerate().map(|(col, &row)| cost(row, col)).sum();
            if c < best.0 {
                best = (c, perm);
            }
        }
        best.1
    } else {
        let mut rows = vec![usize::MAX; d];
        let mut used = vec![false; d];
        let mut cells: Vec<(usize, usize)> = (0..d).cartesian_product(0..d).collect();
        cells.sort_by(|a, b| cost(a.0, a.1).total_cmp(&cost(b.0, b.1)).then(a.cmp(b)));
        for (row, col) in cells {
            if !used[row] && rows[col] == usize::MAX {
                used[row] = true;
                rows[col] = row;
            }
        }
        rows
    };
    DMatrix::from_fn(d, d, |i, j| {
        let diag = w[(rows[i], i)];
        w[(rows[i], j)] / diag
    })
}

/// Causal order (roots first) that makes `B` as close to strictly lower
/// triangular as possible. Exact subset search up to 16 nodes, the
/// zero-smallest-entries heuristic beyond that.
pub fn causal_order_from_b(b: &DMatrix<f64>) -> Vec<usize> {
    let d = b.nrows();
    if d <= 16 {
        exact_order(b)
    } else {
        heuristic_order(b)
    }
}

/// Minimizes the sum of squared entries `B[earlier, later]` with a dynamic
/// program over placed-node subsets. Ties resolve to the lexicographically
/// smallest order.
fn exact_order(b: &DMatrix<f64>) -> Vec<usize> {
    let d = b.nrows();
    let full = 1usize << d;
    let sq = b.map(|v| v * v);
    let mut best = vec![f64::INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    // best[S]: min cost with the nodes of S placed first
    for set in 0..full {
        if !best[set].is_finite() {
            continue;
        }
        for v in 0..d {
            if set & (1 << v) != 0 {
                continue;
            }
            let next = set | (1 << v);
            // v precedes every node not yet placed: those entries sit above the diagonal
            let add: f64 = (0..d).filter(|&u| next & (1 << u) == 0).map(|u| sq[(v, u)]).sum();
            let c = best[set] + add;
            if c < best[next] - 1e-300 {
                best[next] = c;
                choice[next] = v;
            }
        }
    }
    let mut order = Vec::with_capacity(d);
    let mut set = full - 1;
    while set != 0 {
        let v = choice[set];
        order.push(v);
        set &= !(1 << v);
    }
    order.reverse();
    order
}

fn heuristic_order(b: &DMatrix<f64>) -> Vec<usize> {
    let d = b.nrows();
    let mut work = b.clone();
    for i in 0..d {
        work[(i, i)] = 0.0;
    }
    let mut cells: Vec<(usize, usize)> = (0..d)
        .cartesian_product(0..d)
        .filter(|(i, j)| i != j)
        .collect();
    cells.sort_by(|a, b| work[*a].abs().total_cmp(&work[*b].abs()).then(a.cmp(b)));
    let initial = d * (d - 1) / 2;
    for &cell in &cells[..initial] {
        work[cell] = 0.0;
    }
    let mut next = initial;
    loop {
        if let Some(order) = lower_triangular_order(&work) {
            return order;
        }
        work[cells[next]] = 0.0;
        next += 1;
    }
}

/// Peels off nodes whose rows are zero among the remaining columns.
fn lower_triangular_order(b: &DMatrix<f64>) -> Option<Vec<usize>> {
    let d = b.nrows();
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut order = Vec::with_capacity(d);
    while !remaining.is_empty() {
        let pos = remaining
            .iter()
            .position(|&i| remaining.iter().all(|&j| j == i || b[(i, j)] == 0.0))?;
        order.push(remaining.remove(pos));
    }
    Some(order)
}

/// ICA-LiNGAM on standardized data.
pub fn lingam(ds: &Dataset, seed: u64, prune_threshold: f64, max_iter: usize, tol: f64) -> Result<LingamFit> {
    let d = ds.d();
    if d <= 1 {
        return Ok(LingamFit {
            dag: WeightedDag {
                w: DMatrix::zeros(d, d),
                threshold_used: prune_threshold,
            },
            causal_order: (0..d).collect(),
            converged: true,
        });
    }
    let fit = fastica(ds, d, seed, max_iter, tol)?;
    let normalized = permute_unmixing(&fit.unmixing);
    let mut b = DMatrix::<f64>::identity(d, d) - normalized;
    let order = causal_order_from_b(&b);
    let mut pos = vec![0; d];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    for i in 0..d {
        for j in 0..d {
            if i == j || pos[j] >= pos[i] || b[(i, j)].abs() <= prune_threshold {
                b[(i, j)] = 0.0;
            }
        }
    }
    Ok(LingamFit {
        dag: WeightedDag {
            w: b,
            threshold_used: prune_threshold,
        },
        causal_order: order,
        converged: fit.converged,
    })
}
