use std::collections::VecDeque;

use super::skeleton::{skeleton, Skeleton};
use crate::citests::{CiTest, CiTester};
use crate::data::Dataset;
use crate::error::Result;
use crate::graphs::{EndpointMark, MixedGraph};

use EndpointMark::{Arrow, Circle, Tail};

/// FCI without the possible-d-sep refinement: shared skeleton, collider
/// arrowheads, then orientation rules R1 to R4. Returns a PAG.
pub fn fci(ds: &Dataset, alpha: f64, test: CiTest) -> Result<MixedGraph> {
    let tester = CiTester::new(ds, test, alpha)?;
    let sk = skeleton(ds.d(), ds.n(), &tester)?;
    let mut g = circle_pattern(&sk);
    orient_pag(&mut g, &sk);
    Ok(g)
}

fn circle_pattern(sk: &Skeleton) -> MixedGraph {
    let d = sk.adj.len();
    let mut g = MixedGraph::empty(d);
    for (i, j) in sk.edges() {
        g.set_edge(i, j, Circle, Circle);
    }
    for (i, j) in sk.sepsets.pairs() {
        for k in 0..d {
            if sk.adjacent(i, k) && sk.adjacent(j, k) && !sk.sepsets.contains(i, j, k) {
                g.set_mark(i, k, Arrow);
                g.set_mark(j, k, Arrow);
            }
        }
    }
    g
}

fn m(g: &MixedGraph, i: usize, j: usize) -> Option<EndpointMark> {
    g.mark(i, j)
}

fn orient_pag(g: &mut MixedGraph, sk: &Skeleton) {
    let d = g.d();
    loop {
        let mut changed = false;
        for a in 0..d {
            for b in 0..d {
                if a == b || !g.adjacent(a, b) {
                    continue;
                }
                for c in 0..d {
                    if c == a || c == b || !g.adjacent(b, c) {
                        continue;
                    }
                    // R1: a *→ b o–* c, a and c nonadjacent ⇒ b → c
                    if m(g, a, b) == Some(Arrow) && m(g, c, b) == Some(Circle) && !g.adjacent(a, c) {
                        g.set_mark(c, b, Tail);
                        g.set_mark(b, c, Arrow);
                        changed = true;
                    }
                    // R2: a → b *→ c or a *→ b → c, with a *–o c ⇒ a *→ c
                    if g.adjacent(a, c) && m(g, a, c) == Some(Circle) {
                        let first = g.is_directed(a, b) && m(g, b, c) == Some(Arrow);
                        let second = m(g, a, b) == Some(Arrow) && g.is_directed(b, c);
                        if first || second {
                            g.set_mark(a, c, Arrow);
                            changed = true;
                        }
                    }
                }
            }
        }
        changed |= rule3(g);
        changed |= rule4(g, sk);
        if !changed {
            return;
        }
    }
}

/// R3: a *→ b ←* c, a *–o e o–* c, a and c nonadjacent, e *–o b ⇒ e *→ b.
fn rule3(g: &mut MixedGraph) -> bool {
    let d = g.d();
    let mut changed = false;
    for e in 0..d {
        for b in 0..d {
            if e == b || m(g, e, b) != Some(Circle) {
                continue;
            }
            let fires = (0..d).any(|a| {
                a != e
                    && a != b
                    && m(g, a, b) == Some(Arrow)
                    && m(g, a, e) == Some(Circle)
                    && (a + 1..d).any(|c| {
                        c != e
                            && c != b
                            && m(g, c, b) == Some(Arrow)
                            && m(g, c, e) == Some(Circle)
                            && !g.adjacent(a, c)
                    })
            });
            if fires {
                g.set_mark(e, b, Arrow);
                changed = true;
            }
        }
    }
    changed
}

/// R4 on discriminating paths `⟨t, …, a, b, c⟩` for `b` with `b o–* c`:
/// `b → c` when `b` is in sepset(t, c), otherwise `a ↔ b ↔ c`.
fn rule4(g: &mut MixedGraph, sk: &Skeleton) -> bool {
    let d = g.d();
    for b in 0..d {
        for c in 0..d {
            if b == c || m(g, c, b) != Some(Circle) {
                continue;
            }
            for a in 0..d {
                if a == b || a == c {
                    continue;
                }
                // a is a collider on the path and a parent of c
                if m(g, b, a) != Some(Arrow) || !g.is_directed(a, c) || !g.adjacent(a, b) {
                    continue;
                }
                if let Some(t) = discriminating_start(g, a, b, c) {
                    if sk.sepsets.contains(t, c, b) {
                        g.set_mark(c, b, Tail);
                        g.set_mark(b, c, Arrow);
                    } else {
                        g.set_mark(a, b, Arrow);
                        g.set_mark(b, a, Arrow);
                        g.set_mark(c, b, Arrow);
                        g.set_mark(b, c, Arrow);
                    }
                    return true;
                }
            }
        }
    }
    false
}

/// Breadth-first search backwards from `a` for the start `t` of a
/// discriminating path. Every interior vertex is a collider and a parent of `c`.
fn discriminating_start(g: &MixedGraph, a: usize, b: usize, c: usize) -> Option<usize> {
    let d = g.d();
    let mut visited = vec![false; d];
    visited[b] = true;
    visited[c] = true;
    visited[a] = true;
    let mut queue = VecDeque::from([a]);
    while let Some(v) = queue.pop_front() {
        for t in 0..d {
            if visited[t] || !g.adjacent(t, v) || m(g, t, v) != Some(Arrow) {
                continue;
            }
            if !g.adjacent(t, c) {
                return Some(t);
            }
            if g.is_directed(t, c) && m(g, v, t) == Some(Arrow) {
                visited[t] = true;
                queue.push_back(t);
            }
        }
    }
    None
}
