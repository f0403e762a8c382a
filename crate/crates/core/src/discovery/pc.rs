use super::skeleton::{skeleton, Skeleton};
use super::SepsetTable;
use crate::citests::{CiTest, CiTester};
use crate::data::Dataset;
use crate::error::Result;
use crate::graphs::MixedGraph;

/// PC: skeleton search, collider orientation, then Meek propagation.
/// Returns the CPDAG and the separating sets.
pub fn pc(ds: &Dataset, alpha: f64, test: CiTest) -> Result<(MixedGraph, SepsetTable)> {
    let tester = CiTester::new(ds, test, alpha)?;
    let sk = skeleton(ds.d(), ds.n(), &tester)?;
    let mut g = pattern_from_skeleton(&sk);
    Ok((meek_orient_in_place(&mut g).clone(), sk.sepsets))
}

fn pattern_from_skeleton(sk: &Skeleton) -> MixedGraph {
    let d = sk.adj.len();
    let mut g = MixedGraph::empty(d);
    for (i, j) in sk.edges() {
        g.add_undirected(i, j);
    }
    for (i, j) in sk.sepsets.pairs() {
        for k in 0..d {
            if !(sk.adjacent(i, k) && sk.adjacent(j, k)) || sk.sepsets.contains(i, j, k) {
                continue;
            }
            // an earlier collider that points the other way wins
            if g.is_directed(k, i) || g.is_directed(k, j) {
                continue;
            }
            g.add_directed(i, k);
            g.add_directed(j, k);
        }
    }
    g
}

/// Applies Meek rules R1 to R4 until nothing changes.
pub fn meek_orient(g: &MixedGraph) -> MixedGraph {
    let mut out = g.clone();
    meek_orient_in_place(&mut out);
    out
}

fn meek_orient_in_place(g: &mut MixedGraph) -> &mut MixedGraph {
    let d = g.d();
    loop {
        let mut changed = false;
        for a in 0..d {
            for b in 0..d {
                if a != b && g.is_undirected(a, b) && should_orient(g, a, b) {
                    g.add_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

/// Whether one of the four rules forces `a → b` on the undirected edge `a – b`.
fn should_orient(g: &MixedGraph, a: usize, b: usize) -> bool {
    let d = g.d();
    // R1: c → a – b, c and b nonadjacent
    if (0..d).any(|c| c != b && g.is_directed(c, a) && !g.adjacent(c, b)) {
        return true;
    }
    // R2: a → c → b
    if (0..d).any(|c| g.is_directed(a, c) && g.is_directed(c, b)) {
        return true;
    }
    let und: Vec<usize> = (0..d).filter(|&c| c != b && g.is_undirected(a, c)).collect();
    // R3: a – c → b, a – e → b, c and e nonadjacent
    for (x, &c) in und.iter().enumerate() {
        if !g.is_directed(c, b) {
            continue;
        }
        if und[x + 1..].iter().any(|&e| g.is_directed(e, b) && !g.adjacent(c, e)) {
            return true;
        }
    }
    // R4: a – c → e → b, c and b nonadjacent, a adjacent to e
    for &c in &und {
        if g.adjacent(c, b) {
            continue;
        }
        if (0..d).any(|e| e != a && g.is_directed(c, e) && g.is_directed(e, b) && g.adjacent(a, e)) {
            return true;
        }
    }
    false
}
