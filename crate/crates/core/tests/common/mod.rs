//! Fixture generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_1_SQRT_2;

use formctl_core::control::{build_system, build_uniform_system, FormationSystem, LawFamily};
use formctl_core::dynamics::{find_equilibrium, IntegratorSettings};
use formctl_core::geometry::Configuration;
use formctl_core::graph::{build_from_henneberg, Edge, HennebergStep, TriangulatedLamanGraph};
use nalgebra::{Rotation2, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn k3() -> TriangulatedLamanGraph {
    build_from_henneberg(3, &[HennebergStep::new(3, (1, 2))]).unwrap()
}

pub fn strip5() -> TriangulatedLamanGraph {
    build_from_henneberg(
        5,
        &[HennebergStep::new(3, (1, 2)), HennebergStep::new(4, (2, 3)), HennebergStep::new(5, (3, 4))],
    )
    .unwrap()
}

/// Strip graph: vertex `k` attaches to `(k-2, k-1)`.
pub fn strip(n: usize) -> TriangulatedLamanGraph {
    let steps: Vec<HennebergStep> = (3..=n).map(|k| HennebergStep::new(k, (k - 2, k - 1))).collect();
    build_from_henneberg(n, &steps).unwrap()
}

/// Fan graph: every vertex attaches to `(1, k-1)`.
pub fn fan(n: usize) -> TriangulatedLamanGraph {
    let steps: Vec<HennebergStep> = (3..=n).map(|k| HennebergStep::new(k, (1, k - 1))).collect();
    build_from_henneberg(n, &steps).unwrap()
}

pub fn random_graph(n: usize, rng: &mut impl Rng) -> TriangulatedLamanGraph {
    let mut edges = vec![(1, 2)];
    let mut steps = Vec::new();
    for k in 3..=n {
        let (i, j) = edges[rng.random_range(0..edges.len())];
        steps.push(HennebergStep::new(k, (i, j)));
        edges.push((i, k));
        edges.push((j, k));
    }
    build_from_henneberg(n, &steps).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n);
            out.push(q);
        }
    }
    out
}

fn canonical_form(g: &TriangulatedLamanGraph, perms: &[Vec<usize>]) -> Vec<(usize, usize)> {
    perms
        .iter()
        .map(|perm| {
            let mut e: Vec<(usize, usize)> = g
                .edges()
                .iter()
                .map(|e| {
                    let (a, b) = (perm[e.lo - 1], perm[e.hi - 1]);
                    (a.min(b), a.max(b))
                })
                .collect();
            e.sort();
            e
        })
        .min()
        .unwrap()
}

/// One representative per isomorphism class of triangulated Laman graphs on
/// `n` vertices.
pub fn all_graphs(n: usize) -> Vec<TriangulatedLamanGraph> {
    if n == 2 {
        return vec![build_from_henneberg(2, &[]).unwrap()];
    }
    let perms = permutations(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<HennebergStep>> = vec![vec![]];
    while let Some(steps) = stack.pop() {
        let placed = steps.len() + 2;
        if placed == n {
            let g = build_from_henneberg(n, &steps).unwrap();
            if seen.insert(canonical_form(&g, &perms)) {
                out.push(g);
            }
            continue;
        }
        let mut edges = vec![(1, 2)];
        for s in &steps {
            edges.push((s.anchor.0, s.new_vertex));
            edges.push((s.anchor.1, s.new_vertex));
        }
        for (i, j) in edges {
            let mut next = steps.clone();
            next.push(HennebergStep::new(placed + 1, (i, j)));
            stack.push(next);
        }
    }
    out
}

pub fn random_configuration(n: usize, rng: &mut impl Rng, scale: f64) -> Configuration {
    Configuration::from_xy(
        &(0..n).map(|_| (rng.random::<f64>() * scale, rng.random::<f64>() * scale)).collect::<Vec<_>>(),
    )
}

/// Random configuration whose adjacent agents are at least `min_sep` apart.
pub fn separated_configuration(
    g: &TriangulatedLamanGraph,
    rng: &mut impl Rng,
    scale: f64,
    min_sep: f64,
) -> Configuration {
    loop {
        let p = random_configuration(g.n(), rng, scale);
        if g.edges().iter().all(|e| (p.at(g, e.lo) - p.at(g, e.hi)).norm() >= min_sep) {
            return p;
        }
    }
}

/// Configuration built along the witness in which every new vertex is, with
/// probability `p_align`, placed exactly on the line of its anchors.
pub fn partly_aligned_configuration(g: &TriangulatedLamanGraph, rng: &mut impl Rng, p_align: f64) -> Configuration {
    let mut pts = vec![Vector2::zeros(); g.n()];
    let idx = |v: usize| g.index_of(v).unwrap();
    let (b0, b1) = g.base();
    let angle = rng.random::<f64>() * std::f64::consts::TAU;
    pts[idx(b0)] = Vector2::new(rng.random::<f64>(), rng.random::<f64>());
    pts[idx(b1)] = pts[idx(b0)] + Vector2::new(angle.cos(), angle.sin());
    for s in g.steps() {
        let (xi, xj) = (pts[idx(s.anchor.0)], pts[idx(s.anchor.1)]);
        pts[idx(s.new_vertex)] = if rng.random::<f64>() < p_align {
            let t = [-0.7, -0.3, 0.35, 0.6, 1.4, 1.8][rng.random_range(0..6)];
            xi + (xj - xi) * t
        } else {
            let mid = (xi + xj) * 0.5;
            let r = (xj - xi).norm();
            mid + Vector2::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * (1.5 * r)
        };
    }
    Configuration::new(pts)
}

/// Every agent on the x-axis, adjacent agents at least `min_sep` apart.
pub fn collinear_configuration(g: &TriangulatedLamanGraph, rng: &mut impl Rng, scale: f64) -> Configuration {
    loop {
        let xs: Vec<(f64, f64)> = (0..g.n()).map(|_| (rng.random::<f64>() * scale, 0.0)).collect();
        let p = Configuration::from_xy(&xs);
        if g.edges().iter().all(|e| (p.at(g, e.lo) - p.at(g, e.hi)).norm() >= 0.05 * scale) {
            return p;
        }
    }
}

/// Targets realized by a random generic configuration (so every strict
/// triangle inequality holds).
pub fn random_targets(g: &TriangulatedLamanGraph, rng: &mut impl Rng) -> BTreeMap<Edge, f64> {
    loop {
        let p = random_configuration(g.n(), rng, 2.0);
        let t: BTreeMap<Edge, f64> = g.edges().iter().map(|&e| (e, (p.at(g, e.lo) - p.at(g, e.hi)).norm())).collect();
        if t.values().all(|&d| d > 0.3) && build_system(g, &t, LawFamily::InverseSquare).is_ok() {
            return t;
        }
    }
}

pub fn random_system(g: &TriangulatedLamanGraph, rng: &mut impl Rng) -> FormationSystem {
    build_system(g, &random_targets(g, rng), LawFamily::InverseSquare).unwrap()
}

pub fn unit_system(g: &TriangulatedLamanGraph) -> FormationSystem {
    build_uniform_system(g, 1.0).unwrap()
}

pub fn k3_line_fixture() -> Configuration {
    Configuration::from_xy(&[(0.0, 0.0), (-FRAC_1_SQRT_2, 0.0), (FRAC_1_SQRT_2, 0.0)])
}

/// Collinear K3 equilibrium on the x-axis for
/// targets `(d12, d13, d23)` with `middle` between the other two.
pub fn k3_line_equilibrium(targets: [f64; 3], middle: usize) -> Configuration {
    let g = k3();
    let t: BTreeMap<Edge, f64> = [(Edge::new(1, 2), targets[0]), (Edge::new(1, 3), targets[1]), (Edge::new(2, 3), targets[2])]
        .into_iter()
        .collect();
    let sys = FormationSystem::from_parts(
        g.clone(),
        t.values().map(|&d| formctl_core::law_inverse_square(d).unwrap()).collect(),
        t.values().copied().collect(),
    );
    let others: Vec<usize> = (1..=3).filter(|&v| v != middle).collect();
    let mut xs = [0.0; 3];
    xs[others[0] - 1] = -0.5;
    xs[others[1] - 1] = 0.5;
    let seed = Configuration::from_xy(&xs.map(|x| (x, 0.0)));
    find_equilibrium(&sys, &seed, &IntegratorSettings::default()).unwrap()
}

/// five-vertex strip system with an equilibrium of crossed-lines shape: parts {1,2,3} and
/// {3,4,5} are collinear equilibria (middle agents 3 and 4) on two lines
/// through agent 3, and the target of (2,4) is the resulting distance.
pub fn crossed_lines_equilibrium_random(rng: &mut impl Rng) -> (FormationSystem, Configuration) {
    let g = strip5();
    loop {
        let mut draw = || 0.5 + rng.random::<f64>();
        let (t12, t13, t23, t34, t35, t45) = (draw(), draw(), draw(), draw(), draw(), draw());
        let a = k3_line_equilibrium([t12, t13, t23], 3);
        // Relabel {3,4,5} as {1,2,3} with 4 in the middle.
        let b = k3_line_equilibrium([t34, t35, t45], 2);
        let theta = 0.3 + rng.random::<f64>() * 2.5;
        let rot = Rotation2::new(theta);
        let (ca, cb) = (a.points[2], b.points[0]);
        let pts = vec![
            a.points[0] - ca,
            a.points[1] - ca,
            Vector2::zeros(),
            rot * (b.points[1] - cb),
            rot * (b.points[2] - cb),
        ];
        let p = Configuration::new(pts);
        let t24 = (p.points[1] - p.points[3]).norm();
        let targets: BTreeMap<Edge, f64> = [
            ((1, 2), t12),
            ((1, 3), t13),
            ((2, 3), t23),
            ((2, 4), t24),
            ((3, 4), t34),
            ((3, 5), t35),
            ((4, 5), t45),
        ]
        .into_iter()
        .map(|((i, j), d)| (Edge::new(i, j), d))
        .collect();
        if let Ok(sys) = build_system(&g, &targets, LawFamily::InverseSquare) {
            if t24 > 0.2 {
                return (sys, p);
            }
        }
    }
}
