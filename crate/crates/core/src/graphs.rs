//! Graph representations shared by DAGs, CPDAGs and PAGs, plus SHD and random
//! DAG generation.
//!
//! A [`MixedGraph`] stores, for every ordered pair `(i, j)`, the endpoint mark
//! found at `j`'s end of the edge `i – j`. A directed edge `i → j` is therefore
//! `mark(i, j) == Arrow` and `mark(j, i) == Tail`.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointMark {
    Tail,
    Arrow,
    Circle,
}

/// One edge seen from a canonical orientation, as stored in graph JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub mark_from: EndpointMark,
    pub mark_to: EndpointMark,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixedGraph {
    d: usize,
    marks: Vec<Option<EndpointMark>>,
}

impl MixedGraph {
    pub fn empty(d: usize) -> Self {
        MixedGraph {
            d,
            marks: vec![None; d * d],
        }
    }

    /// Complete graph with the given mark at every endpoint.
    pub fn complete(d: usize, mark: EndpointMark) -> Self {
        let mut g = Self::empty(d);
        for i in 0..d {
            for j in (i + 1)..d {
                g.set_edge(i, j, mark, mark);
            }
        }
        g
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Mark at `j`'s end of the edge `i – j`, if the edge exists.
    #[inline]
    pub fn mark(&self, i: usize, j: usize) -> Option<EndpointMark> {
        self.marks[i * self.d + j]
    }

    /// Inserts or replaces the edge `i – j`; `at_i` and `at_j` are the marks at each end.
    pub fn set_edge(&mut self, i: usize, j: usize, at_i: EndpointMark, at_j: EndpointMark) {
        assert!(i != j, "self-edges are not representable");
        self.marks[i * self.d + j] = Some(at_j);
        self.marks[j * self.d + i] = Some(at_i);
    }

    /// Changes the mark at `j`'s end of an existing edge `i – j`.
    pub fn set_mark(&mut self, i: usize, j: usize, at_j: EndpointMark) {
        debug_assert!(self.adjacent(i, j));
        self.marks[i * self.d + j] = Some(at_j);
    }

    pub fn add_directed(&mut self, from: usize, to: usize) {
        self.set_edge(from, to, EndpointMark::Tail, EndpointMark::Arrow);
    }

    pub fn add_undirected(&mut self, i: usize, j: usize) {
        self.set_edge(i, j, EndpointMark::Tail, EndpointMark::Tail);
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.marks[i * self.d + j] = None;
        self.marks[j * self.d + i] = None;
    }

    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.mark(i, j).is_some()
    }

    /// `i → j`: tail at `i`, arrowhead at `j`.
    #[inline]
    pub fn is_directed(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) == Some(EndpointMark::Arrow) && self.mark(j, i) == Some(EndpointMark::Tail)
    }

    /// `i – j` with tails at both ends.
    #[inline]
    pub fn is_undirected(&self, i: usize, j: usize) -> bool {
        self.mark(i, j) == Some(EndpointMark::Tail) && self.mark(j, i) == Some(EndpointMark::Tail)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).filter(move |&j| self.adjacent(i, j))
    }

    pub fn parents(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).filter(move |&i| self.is_directed(i, j))
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).filter(move |&j| self.is_directed(i, j))
    }

    /// Every edge once, seen from its lower-indexed endpoint.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                if let (Some(at_j), Some(at_i)) = (self.mark(i, j), self.mark(j, i)) {
                    out.push(Edge {
                        from: i,
                        to: j,
                        mark_from: at_i,
                        mark_to: at_j,
                    });
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.marks.iter().filter(|m| m.is_some()).count() / 2
    }

    /// Ordered pairs `(i, j)` for every directed edge `i → j`.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in 0..self.d {
                if self.is_directed(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Unordered adjacencies `{i, j}` as `(min, max)`, marks ignored.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().map(|e| (e.from, e.to)).collect()
    }

    /// Acyclicity of a fully directed graph.
    pub fn is_acyclic(&self) -> Result<bool> {
        if let Some(e) = self
            .edges()
            .into_iter()
            .find(|e| !(self.is_directed(e.from, e.to) || self.is_directed(e.to, e.from)))
        {
            return Err(Error::Contract(format!(
                "is_acyclic requires directed edges only; edge {}–{} is {:?}/{:?}",
                e.from, e.to, e.mark_from, e.mark_to
            )));
        }
        Ok(self.topological_order().is_some())
    }

    /// Whether the directed part (edges `i → j`) contains a cycle; other edges are ignored.
    pub fn has_directed_cycle(&self) -> bool {
        self.topological_order().is_none()
    }

    /// Kahn ordering over the directed part; `None` if it is cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let d = self.d;
        let mut indegree = vec![0usize; d];
        for (_, j) in self.directed_edges() {
            indegree[j] += 1;
        }
        let mut queue: VecDeque<usize> = (0..d).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(d);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for c in 0..d {
                if self.is_directed(v, c) {
                    indegree[c] -= 1;
                    if indegree[c] == 0 {
                        queue.push_back(c);
                    }
                }
            }
        }
        (order.len() == d).then_some(order)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            d: self.d,
            edges: self.edges(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let mut g = Self::empty(json.d);
        for e in &json.edges {
            if e.from >= json.d || e.to >= json.d {
                return Err(Error::Contract(format!(
                    "edge {}–{} out of range for d={}",
                    e.from, e.to, json.d
                )));
            }
            if e.from == e.to {
                return Err(Error::Contract(format!("self-edge at node {}", e.from)));
            }
            if g.adjacent(e.from, e.to) {
                return Err(Error::Contract(format!("duplicate edge {}–{}", e.from, e.to)));
            }
            g.set_edge(e.from, e.to, e.mark_from, e.mark_to);
        }
        Ok(g)
    }
}

/// Wire form: `{"d": int, "edges": [{"from", "to", "mark_from", "mark_to"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub d: usize,
    pub edges: Vec<Edge>,
}

/// A fully directed acyclic graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dag(MixedGraph);

impl Dag {
    pub fn empty(d: usize) -> Self {
        Dag(MixedGraph::empty(d))
    }

    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = MixedGraph::empty(d);
        for &(i, j) in edges {
            if i >= d || j >= d || i == j {
                return Err(Error::Contract(format!("invalid edge {i}→{j} for d={d}")));
            }
            if g.adjacent(i, j) {
                return Err(Error::Contract(format!("duplicate adjacency {i}–{j}")));
            }
            g.add_directed(i, j);
        }
        Self::try_from(g)
    }

    pub fn d(&self) -> usize {
        self.0.d()
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.0
    }

    pub fn into_graph(self) -> MixedGraph {
        self.0
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.0.directed_edges()
    }

    pub fn num_edges(&self) -> usize {
        self.0.num_edges()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        self.0.parents(j).collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.0.is_directed(i, j)
    }

    pub fn topological_order(&self) -> Vec<usize> {
        self.0
            .topological_order()
            .expect("Dag invariant: acyclic")
    }

    /// Whether `order` lists every node before its children.
    pub fn is_consistent_order(&self, order: &[usize]) -> bool {
        if order.len() != self.d() {
            return false;
        }
        let mut pos = vec![usize::MAX; self.d()];
        for (k, &v) in order.iter().enumerate() {
            if v >= self.d() || pos[v] != usize::MAX {
                return false;
            }
            pos[v] = k;
        }
        self.edges().into_iter().all(|(i, j)| pos[i] < pos[j])
    }
}

impl TryFrom<MixedGraph> for Dag {
    type Error = Error;

    fn try_from(g: MixedGraph) -> Result<Self> {
        if !g.is_acyclic()? {
            return Err(Error::Contract("graph contains a directed cycle".into()));
        }
        Ok(Dag(g))
    }
}

/// Per-category SHD counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShdBreakdown {
    pub missing: usize,
    pub extra: usize,
    pub reversed: usize,
}

impl ShdBreakdown {
    pub fn total(&self) -> usize {
        self.missing + self.extra + self.reversed
    }
}

/// Acyclicity of an arbitrary directed adjacency relation (which, unlike a
/// [`MixedGraph`], may hold both `i → j` and `j → i`).
pub fn adjacency_is_acyclic(d: usize, has_edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut indegree = vec![0usize; d];
    for i in 0..d {
        for j in 0..d {
            if i != j && has_edge(i, j) {
                indegree[j] += 1;
            }
        }
    }
    let mut stack: Vec<usize> = (0..d).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for c in 0..d {
            if c != v && has_edge(v, c) {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    stack.push(c);
                }
            }
        }
    }
    seen == d
}

/// Structural Hamming distance with a per-category breakdown.
///
/// A shared adjacency counts as reversed only when the predicted edge is
/// strictly oriented against the truth: arrowhead at the true source and tail
/// at the true sink. Undirected and circle-marked edges on a correct adjacency
/// contribute nothing.
pub fn shd_breakdown(pred: &MixedGraph, truth: &Dag) -> Result<ShdBreakdown> {
    if pred.d() != truth.d() {
        return Err(Error::Dimension {
            expected: truth.d(),
            actual: pred.d(),
        });
    }
    let t = truth.graph();
    let mut out = ShdBreakdown::default();
    for i in 0..t.d() {
        for j in (i + 1)..t.d() {
            match (pred.adjacent(i, j), t.adjacent(i, j)) {
                (false, true) => out.missing += 1,
                (true, false) => out.extra += 1,
                (true, true) => {
                    let (src, dst) = if t.is_directed(i, j) { (i, j) } else { (j, i) };
                    if pred.mark(dst, src) == Some(EndpointMark::Arrow)
                        && pred.mark(src, dst) == Some(EndpointMark::Tail)
                    {
                        out.reversed += 1;
                    }
                }
                (false, false) => {}
            }
        }
    }
    Ok(out)
}

pub fn shd(pred: &MixedGraph, truth: &Dag) -> Result<usize> {
    shd_breakdown(pred, truth).map(|b| b.total())
}

/// Upper end of the SHD domain used for baselines and scoring: `d(d−1)/2`.
pub fn max_shd(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// Erdős–Rényi DAG: a seeded random permutation fixes the topological order and
/// each forward pair is included independently with probability `edge_prob`.
pub fn generate_er_dag(d: usize, edge_prob: f64, seed: u64) -> Result<Dag> {
    if d == 0 {
        return Err(Error::Domain("node count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Domain(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = seed::stream(seed, "er-dag");
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let mut g = MixedGraph::empty(d);
    for a in 0..d {
        for b in (a + 1)..d {
            if rng.random::<f64>() < edge_prob {
                g.add_directed(order[a], order[b]);
            }
        }
    }
    Ok(Dag(g))
}
