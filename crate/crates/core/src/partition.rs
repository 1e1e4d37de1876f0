//! Independent partitions of the edge set and the partition-adapted
//! perturbation maps `eta_i`.
//!
//! The partition is built along the stored Henneberg witness: a new vertex
//! aligned with its anchor edge joins the anchor's part, otherwise its two
//! edges start two singleton parts. Parts are the maximal line sub-frameworks
//! and do not depend on the witness.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{aligned, is_line_configuration, Configuration};
use crate::graph::{leading_order, Edge, TriangulatedLamanGraph};

/// Largest graph for which [`partition_is_coarsest`] enumerates exhaustively.
pub const COARSEST_CHECK_BOUND: usize = 7;

pub const ETA_MAX_ITERATIONS: usize = 50;
pub const ETA_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IndependentPartition {
    parts: Vec<Vec<Edge>>,
    subgraphs: Vec<TriangulatedLamanGraph>,
    subconfigs: Vec<Configuration>,
    align_tol: f64,
}

impl IndependentPartition {
    /// Edge sets, each sorted; parts ordered by their smallest edge.
    pub fn parts(&self) -> &[Vec<Edge>] {
        &self.parts
    }

    pub fn subgraphs(&self) -> &[TriangulatedLamanGraph] {
        &self.subgraphs
    }

    pub fn subconfigs(&self) -> &[Configuration] {
        &self.subconfigs
    }

    pub fn align_tol(&self) -> f64 {
        self.align_tol
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn singletons(&self) -> usize {
        self.parts.iter().filter(|p| p.len() == 1).count()
    }

    pub fn part_of(&self, e: Edge) -> Option<usize> {
        self.parts.iter().position(|p| p.binary_search(&e).is_ok())
    }

    pub fn report(&self) -> PartitionReport {
        PartitionReport {
            parts: self.parts.clone(),
            line_parts: self.len(),
            singletons: self.singletons(),
        }
    }

    /// Assembles a partition from explicit edge sets (used to pose candidates
    /// to [`partition_is_coarsest`]).
    pub fn from_parts(
        g: &TriangulatedLamanGraph,
        p: &Configuration,
        parts: Vec<Vec<Edge>>,
        align_tol: f64,
    ) -> Result<Self> {
        p.check_len(g.n())?;
        let mut parts: Vec<Vec<Edge>> = parts
            .into_iter()
            .map(|mut part| {
                part.sort();
                part
            })
            .collect();
        parts.sort();
        let mut seen = BTreeSet::new();
        for e in parts.iter().flatten() {
            if g.edge_index(*e).is_none() || !seen.insert(*e) {
                return Err(Error::InvalidPartition(format!("edge {e} is foreign or repeated")));
            }
        }
        if seen.len() != g.edges().len() {
            return Err(Error::InvalidPartition("parts do not cover the edge set".to_string()));
        }
        let subgraphs = parts
            .iter()
            .map(|part| TriangulatedLamanGraph::from_edges(part))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidPartition(e.to_string()))?;
        let subconfigs = subgraphs.iter().map(|s| p.restrict(g, s)).collect();
        Ok(IndependentPartition { parts, subgraphs, subconfigs, align_tol })
    }
}

/// Serialized partition summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub parts: Vec<Vec<Edge>>,
    /// Number of parts; every part is a line sub-framework.
    pub line_parts: usize,
    pub singletons: usize,
}

/// The independent partition of `(g, p)`, computed along `g`'s witness.
pub fn independent_partition(
    g: &TriangulatedLamanGraph,
    p: &Configuration,
    align_tol: f64,
) -> Result<IndependentPartition> {
    p.check_len(g.n())?;
    let (b0, b1) = g.base();
    let mut label: BTreeMap<Edge, usize> = BTreeMap::new();
    label.insert(Edge::new(b0, b1), 0);
    let mut next = 1;
    for step in g.steps() {
        let (i, j) = step.anchor;
        let k = step.new_vertex;
        let anchor_part = label[&Edge::new(i, j)];
        if aligned(&p.at(g, i), &p.at(g, j), &p.at(g, k), align_tol) {
            label.insert(Edge::new(i, k), anchor_part);
            label.insert(Edge::new(j, k), anchor_part);
        } else {
            label.insert(Edge::new(i, k), next);
            label.insert(Edge::new(j, k), next + 1);
            next += 2;
        }
    }
    let mut grouped: BTreeMap<usize, Vec<Edge>> = BTreeMap::new();
    for (e, l) in label {
        grouped.entry(l).or_default().push(e);
    }
    IndependentPartition::from_parts(g, p, grouped.into_values().collect(), align_tol)
}

/// Whether `edges` induces a triangulated Laman graph whose points are collinear.
fn is_line_laman_part(
    g: &TriangulatedLamanGraph,
    p: &Configuration,
    edges: &[Edge],
    align_tol: f64,
) -> bool {
    let vertices: BTreeSet<usize> = edges.iter().flat_map(|e| [e.lo, e.hi]).collect();
    if edges.len() + 3 != 2 * vertices.len() {
        return false;
    }
    if TriangulatedLamanGraph::from_edges(edges).is_err() {
        return false;
    }
    let pts: Vec<Vector2<f64>> = vertices.iter().map(|&v| p.at(g, v)).collect();
    is_line_configuration(&pts, align_tol)
}

/// Exhaustive maximality check: `candidate` must itself consist of
/// triangulated-Laman line parts, and every other such partition must refine
/// it.
///
/// Any admissible part can be completed to an admissible partition with
/// singletons, so "every admissible partition refines the candidate" is
/// checked as "every admissible edge subset lies inside one candidate part",
/// which enumerates `2^|E|` subsets instead of all set partitions.
pub fn partition_is_coarsest(
    g: &TriangulatedLamanGraph,
    p: &Configuration,
    candidate: &IndependentPartition,
) -> Result<bool> {
    if g.n() > COARSEST_CHECK_BOUND {
        return Err(Error::TooLarge { n: g.n(), bound: COARSEST_CHECK_BOUND });
    }
    p.check_len(g.n())?;
    let tol = candidate.align_tol();
    if !candidate.parts().iter().all(|part| is_line_laman_part(g, p, part, tol)) {
        return Ok(false);
    }
    let edges = g.edges();
    let owner: Vec<usize> = edges.iter().map(|&e| candidate.part_of(e).unwrap()).collect();
    let mut subset = Vec::with_capacity(edges.len());
    for mask in 1u32..(1u32 << edges.len()) {
        let first = mask.trailing_zeros() as usize;
        if (0..edges.len()).all(|i| mask & (1 << i) == 0 || owner[i] == owner[first]) {
            continue;
        }
        subset.clear();
        subset.extend((0..edges.len()).filter(|i| mask & (1 << i) != 0).map(|i| edges[i]));
        if is_line_laman_part(g, p, &subset, tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy)]
enum Placement {
    /// Vertex of the perturbed part, at this position of the part's vertex list.
    Given(usize),
    /// Aligned with its anchors: `x_k + c_a dx_a + c_b dx_b`.
    Affine { a: usize, b: usize, ca: f64, cb: f64 },
    /// Nondegenerate triangle: keep both anchor distances.
    Circle { a: usize, b: usize },
}

/// Construction order for `eta_i`: the part's vertices first, then every
/// other vertex with its placement rule. Indices are graph positions.
fn eta_plan(
    g: &TriangulatedLamanGraph,
    p: &Configuration,
    part: &IndependentPartition,
    i: usize,
) -> Result<Vec<(usize, Placement)>> {
    let sub = part
        .subgraphs()
        .get(i)
        .ok_or(Error::PartIndexOutOfRange { index: i, len: part.len() })?;
    p.check_len(g.n())?;
    let order = leading_order(g, sub)?;
    let mut plan = Vec::with_capacity(order.len());
    let mut placed = BTreeSet::new();
    for &v in &order {
        let idx = g.index_of(v).unwrap();
        let rule = if let Some(local) = sub.index_of(v) {
            Placement::Given(local)
        } else {
            let nb: Vec<usize> = g.neighbors(v).filter(|u| placed.contains(u)).collect();
            debug_assert_eq!(nb.len(), 2);
            let (a, b) = (g.index_of(nb[0]).unwrap(), g.index_of(nb[1]).unwrap());
            let (xa, xb, xk) = (p.points[a], p.points[b], p.points[idx]);
            if aligned(&xa, &xb, &xk, part.align_tol()) {
                let l2 = (xb - xa).norm_squared();
                Placement::Affine {
                    a,
                    b,
                    ca: (xb - xk).dot(&(xb - xa)) / l2,
                    cb: (xa - xk).dot(&(xa - xb)) / l2,
                }
            } else {
                Placement::Circle { a, b }
            }
        };
        placed.insert(v);
        plan.push((idx, rule));
    }
    Ok(plan)
}

/// Perturbs part `i` to `perturbed` (points in the part's vertex order) and
/// re-places every other agent so that all other parts keep their shape.
pub fn eta_map(
    g: &TriangulatedLamanGraph,
    p: &Configuration,
    part: &IndependentPartition,
    i: usize,
    perturbed: &Configuration,
) -> Result<Configuration> {
    let plan = eta_plan(g, p, part, i)?;
    perturbed.check_len(part.subgraphs()[i].n())?;
    let mut q = p.clone();
    for &(k, rule) in &plan {
        match rule {
            Placement::Given(local) => q.points[k] = perturbed.points[local],
            Placement::Affine { a, b, ca, cb } => {
                let (da, db) = (q.points[a] - p.points[a], q.points[b] - p.points[b]);
                q.points[k] = p.points[k] + da * ca + db * cb;
            }
            Placement::Circle { a, b } => {
                q.points[k] = solve_circle_vertex(p, &q, k, a, b, g.vertices()[k])?;
            }
        }
    }
    Ok(q)
}

/// Newton solve for the point at the original distances from the moved
/// anchors `a` and `b`, started from `x_k` shifted by the mean anchor motion.
fn solve_circle_vertex(
    p: &Configuration,
    q: &Configuration,
    k: usize,
    a: usize,
    b: usize,
    label: usize,
) -> Result<Vector2<f64>> {
    let (qa, qb) = (q.points[a], q.points[b]);
    let ra2 = (p.points[k] - p.points[a]).norm_squared();
    let rb2 = (p.points[k] - p.points[b]).norm_squared();
    let shift = 0.5 * ((qa - p.points[a]) + (qb - p.points[b]));
    let start = p.points[k] + shift;
    let trust = 0.25 * ra2.min(rb2).sqrt();
    let tol = ETA_RESIDUAL_TOL * ra2.max(rb2);
    let mut y = start;
    for _ in 0..=ETA_MAX_ITERATIONS {
        let (ua, ub) = (y - qa, y - qb);
        let r = Vector2::new(0.5 * (ua.norm_squared() - ra2), 0.5 * (ub.norm_squared() - rb2));
        if r.amax() <= tol {
            return Ok(y);
        }
        let jac = Matrix2::new(ua.x, ua.y, ub.x, ub.y);
        let step = jac.lu().solve(&r).ok_or(Error::NewtonDiverged { vertex: label })?;
        y -= step;
        if !((y - start).norm() <= trust) {
            return Err(Error::NewtonDiverged { vertex: label });
        }
    }
    Err(Error::NewtonDiverged { vertex: label })
}

/// Derivative of `eta_i` at `p_i` as a `2n x 2|V_i|` matrix, obtained by
/// chaining the implicit-function derivative of each circle solve and the
/// linear aligned placements.
pub fn eta_derivative(
    g: &TriangulatedLamanGraph,
    p: &Configuration,
    part: &IndependentPartition,
    i: usize,
) -> Result<DMatrix<f64>> {
    let plan = eta_plan(g, p, part, i)?;
    let m = 2 * part.subgraphs()[i].n();
    let mut d = DMatrix::zeros(2 * g.n(), m);
    for &(k, rule) in &plan {
        match rule {
            Placement::Given(local) => {
                d[(2 * k, 2 * local)] = 1.0;
                d[(2 * k + 1, 2 * local + 1)] = 1.0;
            }
            Placement::Affine { a, b, ca, cb } => {
                let rows = d.rows(2 * a, 2) * ca + d.rows(2 * b, 2) * cb;
                d.rows_mut(2 * k, 2).copy_from(&rows);
            }
            Placement::Circle { a, b } => {
                let (ua, ub) = (p.points[k] - p.points[a], p.points[k] - p.points[b]);
                let jac = Matrix2::new(ua.x, ua.y, ub.x, ub.y);
                let inv = jac.try_inverse().ok_or(Error::NewtonDiverged { vertex: g.vertices()[k] })?;
                let mut rhs = DMatrix::zeros(2, m);
                rhs.row_mut(0).copy_from(&(ua.transpose() * d.rows(2 * a, 2)));
                rhs.row_mut(1).copy_from(&(ub.transpose() * d.rows(2 * b, 2)));
                let rows = DMatrix::from_column_slice(2, 2, inv.as_slice()) * rhs;
                d.rows_mut(2 * k, 2).copy_from(&rows);
            }
        }
    }
    Ok(d)
}
