//! Triangulated Laman graphs and their Henneberg (vertex-add) sequences.
//!
//! Vertex ids are 1-based labels. The main graph of a formation system uses
//! the labels `1..=n`; subgraphs produced by partitioning or reduction keep
//! the labels of the parent graph, so a graph carries its own sorted label
//! list. Configurations are indexed by the position of a label in that list
//! (see [`TriangulatedLamanGraph::index_of`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Graphs with at most this many vertices are enumerated exhaustively.
pub const EXHAUSTIVE_BOUND: usize = 8;

/// Undirected edge with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub lo: usize,
    pub hi: usize,
}

impl Edge {
    /// Canonical edge between two distinct vertices.
    ///
    /// Panics when `a == b`.
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "self-loop {a}-{b}");
        if a < b {
            Edge { lo: a, hi: b }
        } else {
            Edge { lo: b, hi: a }
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.lo == v || self.hi == v
    }

    /// The endpoint that is not `v`.
    pub fn other(&self, v: usize) -> usize {
        if self.lo == v {
            self.hi
        } else {
            self.lo
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for Edge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("edge key {s:?} is not of the form \"i-j\""));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a == b {
            return Err(bad());
        }
        Ok(Edge::new(a, b))
    }
}

impl Serialize for Edge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One vertex-add move: `new_vertex` is linked to both ends of `anchor`.
///
/// Serialized as `[new_vertex, [i, j]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, (usize, usize))", into = "(usize, (usize, usize))")]
pub struct HennebergStep {
    pub new_vertex: usize,
    pub anchor: (usize, usize),
}

impl HennebergStep {
    pub fn new(new_vertex: usize, anchor: (usize, usize)) -> Self {
        HennebergStep { new_vertex, anchor }
    }
}

impl From<(usize, (usize, usize))> for HennebergStep {
    fn from((new_vertex, anchor): (usize, (usize, usize))) -> Self {
        HennebergStep { new_vertex, anchor }
    }
}

impl From<HennebergStep> for (usize, (usize, usize)) {
    fn from(s: HennebergStep) -> Self {
        (s.new_vertex, s.anchor)
    }
}

/// A graph built from a single edge by vertex-add moves onto existing edges,
/// together with the construction witness that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangulatedLamanGraph {
    vertices: Vec<usize>,
    edges: Vec<Edge>,
    base: (usize, usize),
    steps: Vec<HennebergStep>,
    cycles3: Vec<[usize; 3]>,
    adjacency: BTreeMap<usize, BTreeSet<usize>>,
}

/// Builds the graph on labels `1..=n` described by `steps`.
///
/// For `n == 2` the step list is empty and the graph is the edge `1-2`.
/// Otherwise the base edge is the anchor of the first step, and every label
/// in `1..=n` must appear exactly once (as a base vertex or a new vertex).
pub fn build_from_henneberg(n: usize, steps: &[HennebergStep]) -> Result<TriangulatedLamanGraph> {
    if n < 2 {
        return Err(Error::TooFewVertices(n));
    }
    if steps.len() != n - 2 {
        return Err(Error::WrongStepCount { expected: n - 2, got: steps.len() });
    }
    for s in steps {
        for v in [s.new_vertex, s.anchor.0, s.anchor.1] {
            if v == 0 || v > n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
        }
    }
    let base = steps.first().map_or((1, 2), |s| s.anchor);
    TriangulatedLamanGraph::from_witness(base, steps)
}

impl TriangulatedLamanGraph {
    /// Replays a witness starting from the base edge `base`.
    pub fn from_witness(base: (usize, usize), steps: &[HennebergStep]) -> Result<Self> {
        if base.0 == base.1 {
            return Err(Error::DuplicateVertex(base.0));
        }
        let mut adjacency: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        adjacency.entry(base.0).or_default().insert(base.1);
        adjacency.entry(base.1).or_default().insert(base.0);
        for step in steps {
            let (i, j) = step.anchor;
            if adjacency.contains_key(&step.new_vertex) {
                return Err(Error::DuplicateVertex(step.new_vertex));
            }
            let anchored = i != j && adjacency.get(&i).is_some_and(|nb| nb.contains(&j));
            if !anchored {
                return Err(Error::AnchorNotEdge { step: *step });
            }
            let k = step.new_vertex;
            adjacency.entry(k).or_default().extend([i, j]);
            adjacency.get_mut(&i).unwrap().insert(k);
            adjacency.get_mut(&j).unwrap().insert(k);
        }

        let vertices: Vec<usize> = adjacency.keys().copied().collect();
        let mut edges = Vec::with_capacity(2 * vertices.len() - 3);
        let mut cycles3 = Vec::new();
        for (&a, nb) in &adjacency {
            for &b in nb.range(a + 1..) {
                edges.push(Edge::new(a, b));
                for &c in adjacency[&b].range(b + 1..) {
                    if nb.contains(&c) {
                        cycles3.push([a, b, c]);
                    }
                }
            }
        }
        let g = TriangulatedLamanGraph {
            vertices,
            edges,
            base,
            steps: steps.to_vec(),
            cycles3,
            adjacency,
        };
        debug_assert_eq!(g.edges.len(), 2 * g.n() - 3);
        Ok(g)
    }

    /// Recognizes a triangulated Laman graph from its edge set and builds a
    /// witness for it by peeling degree-2 vertices.
    pub fn from_edges(edges: &[Edge]) -> Result<Self> {
        let mut adjacency: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for e in edges {
            adjacency.entry(e.lo).or_default().insert(e.hi);
            adjacency.entry(e.hi).or_default().insert(e.lo);
        }
        let n = adjacency.len();
        let distinct: BTreeSet<Edge> = edges.iter().copied().collect();
        if n < 2 || distinct.len() != 2 * n - 3 {
            return Err(Error::NotTriangulatedLaman(format!(
                "{} edges on {} vertices",
                distinct.len(),
                n
            )));
        }
        let all: BTreeSet<usize> = adjacency.keys().copied().collect();
        let order = peel_order(&all, &adjacency, &BTreeSet::new()).ok_or_else(|| {
            Error::NotTriangulatedLaman("no removable degree-2 vertex".to_string())
        })?;
        let (base, steps) = witness_from_order(&order, &adjacency);
        Self::from_witness(base, &steps)
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    /// Sorted vertex labels.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Edges in canonical (lexicographic) order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn base(&self) -> (usize, usize) {
        self.base
    }

    /// The stored construction witness.
    pub fn steps(&self) -> &[HennebergStep] {
        &self.steps
    }

    /// All vertex triples forming 3-cycles, each sorted ascending.
    pub fn cycles3(&self) -> &[[usize; 3]] {
        &self.cycles3
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.get(&v).into_iter().flatten().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency.get(&v).map_or(0, BTreeSet::len)
    }

    pub fn has_vertex(&self, v: usize) -> bool {
        self.adjacency.contains_key(&v)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(&a).is_some_and(|nb| nb.contains(&b))
    }

    /// Position of a vertex label in [`vertices`](Self::vertices).
    pub fn index_of(&self, v: usize) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Position of an edge in [`edges`](Self::edges).
    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        self.edges.binary_search(&e).ok()
    }

    /// Vertices in the order in which the stored witness introduces them.
    pub fn appearance_order(&self) -> Vec<usize> {
        let mut order = vec![self.base.0, self.base.1];
        order.extend(self.steps.iter().map(|s| s.new_vertex));
        order
    }

    pub(crate) fn adjacency(&self) -> &BTreeMap<usize, BTreeSet<usize>> {
        &self.adjacency
    }
}

/// Converts a valid vertex ordering into a witness. Anchors are listed in the
/// order in which their endpoints appear.
fn witness_from_order(
    order: &[usize],
    adjacency: &BTreeMap<usize, BTreeSet<usize>>,
) -> ((usize, usize), Vec<HennebergStep>) {
    let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let steps = order[2..]
        .iter()
        .enumerate()
        .map(|(offset, &k)| {
            let mut earlier: Vec<usize> = adjacency[&k]
                .iter()
                .copied()
                .filter(|u| pos[u] < offset + 2)
                .collect();
            earlier.sort_by_key(|u| pos[u]);
            debug_assert_eq!(earlier.len(), 2);
            HennebergStep::new(k, (earlier[0], earlier[1]))
        })
        .collect();
    ((order[0], order[1]), steps)
}

/// Removes degree-2 vertices (with adjacent neighbours) from the subgraph
/// induced by `vertices`, never touching `protected` until everything else
/// is gone, and returns a construction order (the reverse of the removals).
///
/// Returns `None` when the induced subgraph cannot be reduced to a single
/// edge this way.
fn peel_order(
    vertices: &BTreeSet<usize>,
    adjacency: &BTreeMap<usize, BTreeSet<usize>>,
    protected: &BTreeSet<usize>,
) -> Option<Vec<usize>> {
    let mut alive = vertices.clone();
    let mut removed = Vec::new();
    let induced = |alive: &BTreeSet<usize>, v: usize| -> Vec<usize> {
        adjacency[&v].iter().copied().filter(|u| alive.contains(u)).collect()
    };
    while alive.len() > 2 {
        let unprotected_left = alive.iter().any(|v| !protected.contains(v));
        let candidate = alive.iter().copied().find(|&v| {
            if unprotected_left && protected.contains(&v) {
                return false;
            }
            let nb = induced(&alive, v);
            nb.len() == 2 && adjacency[&nb[0]].contains(&nb[1])
        })?;
        alive.remove(&candidate);
        removed.push(candidate);
    }
    let rest: Vec<usize> = alive.into_iter().collect();
    if rest.len() != 2 || !adjacency[&rest[0]].contains(&rest[1]) {
        return None;
    }
    let mut order = rest;
    order.extend(removed.into_iter().rev());
    Some(order)
}

/// Lists Henneberg sequences of `g` as step lists over its fixed labels.
///
/// Two sequences are equal when their step lists are identical; anchors are
/// written in order of appearance, so a sequence and its vertex ordering
/// determine each other (for `n >= 3`). Exhaustive for `n <= 8`; larger
/// graphs need an explicit `limit`.
pub fn enumerate_henneberg_sequences(
    g: &TriangulatedLamanGraph,
    limit: Option<usize>,
) -> Result<Vec<Vec<HennebergStep>>> {
    if g.n() > EXHAUSTIVE_BOUND && limit.is_none() {
        return Err(Error::TooLarge { n: g.n(), bound: EXHAUSTIVE_BOUND });
    }
    let cap = limit.unwrap_or(usize::MAX);
    let mut found: BTreeSet<Vec<HennebergStep>> = BTreeSet::new();
    let mut order = Vec::with_capacity(g.n());
    let mut placed = BTreeSet::new();
    for e in g.edges() {
        for (a, b) in [(e.lo, e.hi), (e.hi, e.lo)] {
            order.clear();
            order.extend([a, b]);
            placed.clear();
            placed.extend([a, b]);
            extend_orders(g, &mut order, &mut placed, &mut found, cap);
            if found.len() >= cap {
                return Ok(found.into_iter().collect());
            }
        }
    }
    Ok(found.into_iter().collect())
}

fn extend_orders(
    g: &TriangulatedLamanGraph,
    order: &mut Vec<usize>,
    placed: &mut BTreeSet<usize>,
    found: &mut BTreeSet<Vec<HennebergStep>>,
    cap: usize,
) {
    if found.len() >= cap {
        return;
    }
    if order.len() == g.n() {
        found.insert(witness_from_order(order, g.adjacency()).1);
        return;
    }
    for &v in g.vertices() {
        if placed.contains(&v) {
            continue;
        }
        let earlier: Vec<usize> = g.neighbors(v).filter(|u| placed.contains(u)).collect();
        if earlier.len() != 2 || !g.has_edge(earlier[0], earlier[1]) {
            continue;
        }
        order.push(v);
        placed.insert(v);
        extend_orders(g, order, placed, found, cap);
        placed.remove(&v);
        order.pop();
        if found.len() >= cap {
            return;
        }
    }
}

/// Vertex ordering of `g` in which the vertices of `sub` come first and
/// induce exactly `sub`.
pub fn leading_order(g: &TriangulatedLamanGraph, sub: &TriangulatedLamanGraph) -> Result<Vec<usize>> {
    for &v in sub.vertices() {
        if !g.has_vertex(v) {
            return Err(Error::NotSubgraph(format!("vertex {v} not in graph")));
        }
    }
    for e in sub.edges() {
        if !g.has_edge(e.lo, e.hi) {
            return Err(Error::NotSubgraph(format!("edge {e} not in graph")));
        }
    }
    let sub_vertices: BTreeSet<usize> = sub.vertices().iter().copied().collect();
    // A triangulated Laman subgraph already spans the maximal 2k - 3 edges on
    // its vertices, so it is induced; checking the count guards malformed input.
    let induced = g
        .edges()
        .iter()
        .filter(|e| sub_vertices.contains(&e.lo) && sub_vertices.contains(&e.hi))
        .count();
    if induced != sub.edges().len() {
        return Err(Error::NotTriangulatedLaman(format!(
            "subgraph is not induced ({} of {induced} edges)",
            sub.edges().len()
        )));
    }
    let all: BTreeSet<usize> = g.vertices().iter().copied().collect();
    let order = peel_order(&all, g.adjacency(), &sub_vertices)
        .ok_or_else(|| Error::NotSubgraph("peeling stalled".to_string()))?;
    debug_assert!(order[..sub.n()].iter().all(|v| sub_vertices.contains(v)));
    Ok(order)
}

/// Henneberg sequence of `g` whose first `|V(sub)|` vertices induce `sub`.
pub fn leading_subgraph_sequence(
    g: &TriangulatedLamanGraph,
    sub: &TriangulatedLamanGraph,
) -> Result<Vec<HennebergStep>> {
    let order = leading_order(g, sub)?;
    Ok(witness_from_order(&order, g.adjacency()).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(k: usize, i: usize, j: usize) -> HennebergStep {
        HennebergStep::new(k, (i, j))
    }

    pub(crate) fn strip5() -> TriangulatedLamanGraph {
        build_from_henneberg(5, &[step(3, 1, 2), step(4, 2, 3), step(5, 3, 4)]).unwrap()
    }

    #[test]
    fn k3_edges() {
        let g = build_from_henneberg(3, &[step(3, 1, 2)]).unwrap();
        assert_eq!(g.edges(), &[Edge::new(1, 2), Edge::new(1, 3), Edge::new(2, 3)]);
        assert_eq!(g.cycles3(), &[[1, 2, 3]]);
    }

    #[test]
    fn strip5_graph() {
        let g = strip5();
        assert_eq!(g.edges().len(), 7);
        let keys: Vec<String> = g.edges().iter().map(ToString::to_string).collect();
        assert_eq!(keys, ["1-2", "1-3", "2-3", "2-4", "3-4", "3-5", "4-5"]);
        assert_eq!(g.cycles3(), &[[1, 2, 3], [2, 3, 4], [3, 4, 5]]);
        assert_eq!(g.degree(5), 2);
        assert_eq!(g.degree(1), 2);
    }

    #[test]
    fn edge_count_identity() {
        let g = build_from_henneberg(4, &[step(3, 1, 2), step(4, 1, 3)]).unwrap();
        assert_eq!(g.edges().len(), 2 * 4 - 3);
    }

    #[test]
    fn build_errors() {
        assert_eq!(
            build_from_henneberg(4, &[step(3, 1, 2)]),
            Err(Error::WrongStepCount { expected: 2, got: 1 })
        );
        assert!(matches!(
            build_from_henneberg(4, &[step(3, 1, 2), step(4, 1, 5)]),
            Err(Error::VertexOutOfRange { vertex: 5, .. })
        ));
        assert!(matches!(
            build_from_henneberg(5, &[step(3, 1, 2), step(4, 2, 3), step(5, 1, 4)]),
            Err(Error::AnchorNotEdge { .. })
        ));
        assert_eq!(
            build_from_henneberg(4, &[step(3, 1, 2), step(3, 1, 2)]),
            Err(Error::DuplicateVertex(3))
        );
        assert_eq!(build_from_henneberg(1, &[]), Err(Error::TooFewVertices(1)));
    }

    #[test]
    fn single_edge() {
        let g = build_from_henneberg(2, &[]).unwrap();
        assert_eq!(g.edges(), &[Edge::new(1, 2)]);
        assert!(g.cycles3().is_empty());
        assert_eq!(enumerate_henneberg_sequences(&g, None).unwrap(), vec![Vec::new()]);
    }

    #[test]
    fn k3_has_six_sequences() {
        let g = build_from_henneberg(3, &[step(3, 1, 2)]).unwrap();
        let seqs = enumerate_henneberg_sequences(&g, None).unwrap();
        assert_eq!(seqs.len(), 6);
        for s in &seqs {
            assert_eq!(build_from_henneberg(3, s).unwrap().edges(), g.edges());
        }
    }

    #[test]
    fn enumeration_limit_and_bound() {
        let g = strip5();
        assert_eq!(enumerate_henneberg_sequences(&g, Some(3)).unwrap().len(), 3);
        let mut steps = vec![step(3, 1, 2)];
        for k in 4..=9 {
            steps.push(step(k, k - 2, k - 1));
        }
        let big = build_from_henneberg(9, &steps).unwrap();
        assert!(matches!(enumerate_henneberg_sequences(&big, None), Err(Error::TooLarge { .. })));
        assert_eq!(enumerate_henneberg_sequences(&big, Some(10)).unwrap().len(), 10);
    }

    #[test]
    fn from_edges_roundtrip() {
        let g = strip5();
        let h = TriangulatedLamanGraph::from_edges(g.edges()).unwrap();
        assert_eq!(h.edges(), g.edges());
        let square = [Edge::new(1, 2), Edge::new(2, 3), Edge::new(3, 4), Edge::new(1, 4), Edge::new(1, 3)];
        assert_eq!(TriangulatedLamanGraph::from_edges(&square).unwrap().n(), 4);
        let k4 = [
            Edge::new(1, 2),
            Edge::new(1, 3),
            Edge::new(1, 4),
            Edge::new(2, 3),
            Edge::new(2, 4),
        ];
        assert!(TriangulatedLamanGraph::from_edges(&k4).is_ok());
        let path = [Edge::new(1, 2), Edge::new(2, 3), Edge::new(3, 4)];
        assert!(matches!(
            TriangulatedLamanGraph::from_edges(&path),
            Err(Error::NotTriangulatedLaman(_))
        ));
    }

    #[test]
    fn leading_triangle_of_strip5() {
        let g = strip5();
        let sub = TriangulatedLamanGraph::from_edges(&[Edge::new(3, 4), Edge::new(3, 5), Edge::new(4, 5)])
            .unwrap();
        let seq = leading_subgraph_sequence(&g, &sub).unwrap();
        let replay = build_from_henneberg(5, &seq).unwrap();
        assert_eq!(replay.edges(), g.edges());
        let order = replay.appearance_order();
        let first: BTreeSet<usize> = order[..3].iter().copied().collect();
        assert_eq!(first, BTreeSet::from([3, 4, 5]));
    }

    #[test]
    fn leading_edge_of_k3() {
        let g = build_from_henneberg(3, &[step(3, 1, 2)]).unwrap();
        let sub = TriangulatedLamanGraph::from_edges(&[Edge::new(2, 3)]).unwrap();
        let seq = leading_subgraph_sequence(&g, &sub).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq[0].new_vertex, 1);
        let (a, b) = seq[0].anchor;
        assert_eq!(Edge::new(a, b), Edge::new(2, 3));

        let whole = leading_subgraph_sequence(&g, &g).unwrap();
        assert_eq!(build_from_henneberg(3, &whole).unwrap().edges(), g.edges());
    }

    #[test]
    fn leading_rejects_foreign_subgraph() {
        let g = strip5();
        let sub = TriangulatedLamanGraph::from_edges(&[Edge::new(1, 5)]).unwrap();
        assert!(matches!(leading_subgraph_sequence(&g, &sub), Err(Error::NotSubgraph(_))));
    }

    #[test]
    fn step_json_shape() {
        let s = step(3, 1, 2);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[3,[1,2]]");
        let back: HennebergStep = serde_json::from_str("[4,[2,3]]").unwrap();
        assert_eq!(back, step(4, 2, 3));
        assert_eq!("2-1".parse::<Edge>().unwrap(), Edge::new(1, 2));
        assert!("2-2".parse::<Edge>().is_err());
    }
}
