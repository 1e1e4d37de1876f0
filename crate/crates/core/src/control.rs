//! Control laws, formation systems, and the potential with its analytic
//! gradient and Hessian.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::graph::{Edge, TriangulatedLamanGraph};

/// Relative distance below which adjacent agents count as collided.
pub const COLLISION_RTOL: f64 = 1e-12;

/// Number of log-spaced samples used to check C1.
pub const C1_GRID_POINTS: usize = 400;

/// A feedback gain `f(d)` for one edge, with its derivative and the
/// potential density `r -> int_1^r s f(s) ds`.
pub trait EdgeLaw: Send + Sync + fmt::Debug {
    fn value(&self, d: f64) -> f64;
    fn derivative(&self, d: f64) -> f64;
    fn antiderivative(&self, r: f64) -> f64;
    /// The distance at which the law is designed to vanish.
    fn target(&self) -> f64;
}

/// `gain * (1 - (dbar/d)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseSquare {
    pub dbar: f64,
    pub gain: f64,
}

impl EdgeLaw for InverseSquare {
    fn value(&self, d: f64) -> f64 {
        let q = self.dbar / d;
        self.gain * (1.0 - q * q)
    }

    fn derivative(&self, d: f64) -> f64 {
        2.0 * self.gain * self.dbar * self.dbar / (d * d * d)
    }

    fn antiderivative(&self, r: f64) -> f64 {
        self.gain * (0.5 * (r * r - 1.0) - self.dbar * self.dbar * r.ln())
    }

    fn target(&self) -> f64 {
        self.dbar
    }
}

/// Pointwise sum of two laws; the target is the first law's target.
#[derive(Debug, Clone)]
pub struct SumLaw {
    pub base: ControlLaw,
    pub extra: ControlLaw,
}

impl EdgeLaw for SumLaw {
    fn value(&self, d: f64) -> f64 {
        self.base.value(d) + self.extra.value(d)
    }

    fn derivative(&self, d: f64) -> f64 {
        self.base.derivative(d) + self.extra.derivative(d)
    }

    fn antiderivative(&self, r: f64) -> f64 {
        self.base.antiderivative(r) + self.extra.antiderivative(r)
    }

    fn target(&self) -> f64 {
        self.base.target()
    }
}

/// Shared handle to an [`EdgeLaw`].
#[derive(Clone)]
pub struct ControlLaw(Arc<dyn EdgeLaw>);

impl fmt::Debug for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl ControlLaw {
    pub fn new<L: EdgeLaw + 'static>(law: L) -> Self {
        ControlLaw(Arc::new(law))
    }

    pub fn value(&self, d: f64) -> f64 {
        self.0.value(d)
    }

    pub fn derivative(&self, d: f64) -> f64 {
        self.0.derivative(d)
    }

    pub fn antiderivative(&self, r: f64) -> f64 {
        self.0.antiderivative(r)
    }

    pub fn target(&self) -> f64 {
        self.0.target()
    }

    /// `d/dx (x f(x))` at `d`.
    pub fn xf_derivative(&self, d: f64) -> f64 {
        self.value(d) + d * self.derivative(d)
    }

    /// Samples C1 (strictly increasing `x f(x)`, unique zero at the target)
    /// and C2 (divergent collision integral) on fixed grids.
    pub fn check_conditions(&self, edge: Edge) -> Result<()> {
        let dbar = self.target();
        let fail = |reason: String| Err(Error::C1Violated { edge, reason });
        let (lo, hi) = ((1e-4 * dbar).ln(), (1e4 * dbar).ln());
        let step = (hi - lo) / (C1_GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..C1_GRID_POINTS).map(|k| (lo + step * k as f64).exp()).collect();
        let scale = grid.iter().map(|&d| self.value(d).abs()).fold(0.0, f64::max);
        if self.value(dbar).abs() > 1e-12 * scale.max(1.0) {
            return fail(format!("f(dbar) = {:e} is not zero", self.value(dbar)));
        }
        for &d in &grid {
            if self.xf_derivative(d) <= 0.0 {
                return fail(format!("d(x f)/dx <= 0 at d = {d:e}"));
            }
            let expect = (d - dbar).signum();
            let f = self.value(d);
            if (d - dbar).abs() > 1e-9 * dbar && f.signum() != expect {
                return fail(format!("f changes sign away from the target (d = {d:e})"));
            }
        }
        // int_x^1 s f ds -> -inf, i.e. the antiderivative grows without bound
        // as the distance shrinks: require comparable growth per decade.
        let samples: Vec<f64> = (0..=4).map(|k| self.antiderivative(dbar * 10f64.powi(-k))).collect();
        let first_rise = samples[1] - samples[0];
        let diverges = first_rise > 0.0
            && samples.windows(2).all(|w| w[1] - w[0] >= 0.5 * first_rise);
        if !diverges {
            return Err(Error::C2Suspect { edge });
        }
        Ok(())
    }
}

/// Reference law `1 - (dbar/d)^2`.
pub fn law_inverse_square(dbar: f64) -> Result<ControlLaw> {
    if !(dbar > 0.0) || !dbar.is_finite() {
        return Err(Error::NonpositiveTarget(dbar));
    }
    Ok(ControlLaw::new(InverseSquare { dbar, gain: 1.0 }))
}

/// `(lo index, hi index, x_lo - x_hi, length)`.
type EdgeGeometry = (usize, usize, nalgebra::Vector2<f64>, f64);

/// Named law families that can be instantiated per edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawFamily {
    InverseSquare,
}

impl LawFamily {
    pub fn instantiate(&self, dbar: f64) -> Result<ControlLaw> {
        match self {
            LawFamily::InverseSquare => law_inverse_square(dbar),
        }
    }
}

/// Graph, per-edge target distances, and per-edge control laws, all in the
/// graph's canonical edge order.
#[derive(Debug, Clone)]
pub struct FormationSystem {
    graph: TriangulatedLamanGraph,
    laws: Vec<ControlLaw>,
    targets: Vec<f64>,
}

/// Validates targets and laws and assembles a formation system.
pub fn build_system(
    g: &TriangulatedLamanGraph,
    targets: &BTreeMap<Edge, f64>,
    family: LawFamily,
) -> Result<FormationSystem> {
    let mut tv = Vec::with_capacity(g.edges().len());
    for &e in g.edges() {
        let t = *targets.get(&e).ok_or(Error::MissingTarget(e))?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::NonpositiveTarget(t));
        }
        tv.push(t);
    }
    if let Some(&extra) = targets.keys().find(|e| g.edge_index(**e).is_none()) {
        return Err(Error::Parse(format!("target given for non-edge {extra}")));
    }
    let target_of = |a: usize, b: usize| tv[g.edge_index(Edge::new(a, b)).unwrap()];
    for &[i, j, k] in g.cycles3() {
        let (a, b, c) = (target_of(i, j), target_of(i, k), target_of(j, k));
        if !(a + b > c && a + c > b && b + c > a) {
            return Err(Error::TriangleInequalityViolated([i, j, k]));
        }
    }
    let mut laws = Vec::with_capacity(tv.len());
    for (&e, &t) in g.edges().iter().zip(&tv) {
        let law = family.instantiate(t)?;
        law.check_conditions(e)?;
        laws.push(law);
    }
    Ok(FormationSystem { graph: g.clone(), laws, targets: tv })
}

/// Same as [`build_system`] with one target for every edge.
pub fn build_uniform_system(g: &TriangulatedLamanGraph, dbar: f64) -> Result<FormationSystem> {
    let targets = g.edges().iter().map(|&e| (e, dbar)).collect();
    build_system(g, &targets, LawFamily::InverseSquare)
}

impl FormationSystem {
    /// Assembles a system without validating the laws. Used for subsystems
    /// and reductions, whose laws need only be continuously differentiable.
    pub fn from_parts(graph: TriangulatedLamanGraph, laws: Vec<ControlLaw>, targets: Vec<f64>) -> Self {
        assert_eq!(laws.len(), graph.edges().len());
        assert_eq!(targets.len(), graph.edges().len());
        FormationSystem { graph, laws, targets }
    }

    pub fn graph(&self) -> &TriangulatedLamanGraph {
        &self.graph
    }

    pub fn laws(&self) -> &[ControlLaw] {
        &self.laws
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn law(&self, e: Edge) -> Option<&ControlLaw> {
        self.graph.edge_index(e).map(|i| &self.laws[i])
    }

    pub fn target(&self, e: Edge) -> Option<f64> {
        self.graph.edge_index(e).map(|i| self.targets[i])
    }

    pub fn targets_map(&self) -> BTreeMap<Edge, f64> {
        self.graph.edges().iter().copied().zip(self.targets.iter().copied()).collect()
    }

    pub fn max_target(&self) -> f64 {
        self.targets.iter().copied().fold(0.0, f64::max)
    }

    /// The subsystem induced by `sub`, keeping each edge's law.
    pub fn subsystem(&self, sub: &TriangulatedLamanGraph) -> Result<FormationSystem> {
        let mut laws = Vec::with_capacity(sub.edges().len());
        let mut targets = Vec::with_capacity(sub.edges().len());
        for &e in sub.edges() {
            let i = self
                .graph
                .edge_index(e)
                .ok_or_else(|| Error::NotSubgraph(format!("edge {e} not in graph")))?;
            laws.push(self.laws[i].clone());
            targets.push(self.targets[i]);
        }
        Ok(FormationSystem::from_parts(sub.clone(), laws, targets))
    }

    /// Index pairs and edge vectors `x_lo - x_hi` with their lengths,
    /// rejecting collisions.
    fn edge_geometry(&self, p: &Configuration) -> Result<Vec<EdgeGeometry>> {
        p.check_len(self.graph.n())?;
        let floor = COLLISION_RTOL * p.extent().max(f64::MIN_POSITIVE);
        self.graph
            .edges()
            .iter()
            .map(|&e| {
                let (a, b) = (self.graph.index_of(e.lo).unwrap(), self.graph.index_of(e.hi).unwrap());
                let u = p.points[a] - p.points[b];
                let d = u.norm();
                if !(d > floor) {
                    return Err(Error::CollisionOnEdge(e));
                }
                Ok((a, b, u, d))
            })
            .collect()
    }

    /// Edge lengths in canonical order.
    pub fn edge_lengths(&self, p: &Configuration) -> Result<Vec<f64>> {
        Ok(self.edge_geometry(p)?.into_iter().map(|(_, _, _, d)| d).collect())
    }

    /// `sum_e int_1^{d_e} s f_e(s) ds`.
    pub fn potential(&self, p: &Configuration) -> Result<f64> {
        let geo = self.edge_geometry(p)?;
        Ok(geo.iter().zip(&self.laws).map(|(&(_, _, _, d), law)| law.antiderivative(d)).sum())
    }

    /// Gradient of the potential; component `i` is
    /// `sum_j f_ij(d_ij) (x_i - x_j)`.
    pub fn gradient(&self, p: &Configuration) -> Result<DVector<f64>> {
        self.biased_gradient(p, None)
    }

    /// Gradient field with each law evaluated at `d_e + bias_e`.
    pub fn biased_gradient(&self, p: &Configuration, bias: Option<&[f64]>) -> Result<DVector<f64>> {
        let geo = self.edge_geometry(p)?;
        let mut grad = DVector::zeros(2 * self.graph.n());
        for (idx, (&(a, b, u, d), law)) in geo.iter().zip(&self.laws).enumerate() {
            let shift = bias.map_or(0.0, |bs| bs[idx]);
            let w = law.value(d + shift) * u;
            for c in 0..2 {
                grad[2 * a + c] += w[c];
                grad[2 * b + c] -= w[c];
            }
        }
        Ok(grad)
    }

    /// Analytic Hessian assembled from the per-edge blocks
    /// `f(d) I + (f'(d)/d) u u^T`.
    pub fn hessian(&self, p: &Configuration) -> Result<DMatrix<f64>> {
        let geo = self.edge_geometry(p)?;
        let dim = 2 * self.graph.n();
        let mut h = DMatrix::zeros(dim, dim);
        for (&(a, b, u, d), law) in geo.iter().zip(&self.laws) {
            let block = Matrix2::identity() * law.value(d) + (u * u.transpose()) * (law.derivative(d) / d);
            for r in 0..2 {
                for c in 0..2 {
                    let v = block[(r, c)];
                    h[(2 * a + r, 2 * a + c)] += v;
                    h[(2 * b + r, 2 * b + c)] += v;
                    h[(2 * a + r, 2 * b + c)] -= v;
                    h[(2 * b + r, 2 * a + c)] -= v;
                }
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_from_henneberg, HennebergStep};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn k3() -> TriangulatedLamanGraph {
        build_from_henneberg(3, &[HennebergStep::new(3, (1, 2))]).unwrap()
    }

    #[test]
    fn inverse_square_values() {
        let f = law_inverse_square(1.0).unwrap();
        assert_eq!(f.value(1.0), 0.0);
        assert!((f.value(FRAC_1_SQRT_2) + 1.0).abs() < 1e-15);
        assert!((f.value(2f64.sqrt()) - 0.5).abs() < 1e-15);
        assert_eq!(f.antiderivative(1.0), 0.0);
        assert!(matches!(law_inverse_square(0.0), Err(Error::NonpositiveTarget(_))));
        assert!(matches!(law_inverse_square(-2.0), Err(Error::NonpositiveTarget(_))));
        f.check_conditions(Edge::new(1, 2)).unwrap();
    }

    #[test]
    fn degenerate_laws_fail_checks() {
        let flipped = ControlLaw::new(InverseSquare { dbar: 1.0, gain: -1.0 });
        assert!(matches!(flipped.check_conditions(Edge::new(1, 2)), Err(Error::C1Violated { .. })));

        // C1 holds (x f(x) = x - 1) but the collision integral stays bounded.
        #[derive(Debug)]
        struct Linear;
        impl EdgeLaw for Linear {
            fn value(&self, d: f64) -> f64 {
                1.0 - 1.0 / d
            }
            fn derivative(&self, d: f64) -> f64 {
                1.0 / (d * d)
            }
            fn antiderivative(&self, r: f64) -> f64 {
                0.5 * (r * r - 1.0) - (r - 1.0)
            }
            fn target(&self) -> f64 {
                1.0
            }
        }
        assert!(matches!(
            ControlLaw::new(Linear).check_conditions(Edge::new(1, 2)),
            Err(Error::C2Suspect { .. })
        ));
    }

    #[test]
    fn build_system_examples() {
        let g = k3();
        assert!(build_uniform_system(&g, 1.0).is_ok());
        let mut t: BTreeMap<Edge, f64> = g.edges().iter().map(|&e| (e, 1.0)).collect();
        t.insert(Edge::new(2, 3), 3.0);
        assert_eq!(
            build_system(&g, &t, LawFamily::InverseSquare).unwrap_err(),
            Error::TriangleInequalityViolated([1, 2, 3])
        );
        t.remove(&Edge::new(2, 3));
        assert_eq!(
            build_system(&g, &t, LawFamily::InverseSquare).unwrap_err(),
            Error::MissingTarget(Edge::new(2, 3))
        );
        let strip5 = build_from_henneberg(
            5,
            &[HennebergStep::new(3, (1, 2)), HennebergStep::new(4, (2, 3)), HennebergStep::new(5, (3, 4))],
        )
        .unwrap();
        assert!(build_uniform_system(&strip5, 1.0).is_ok());
    }

    #[test]
    fn potential_examples() {
        let sys = build_uniform_system(&k3(), 1.0).unwrap();
        let eq = Configuration::from_xy(&[(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)]);
        assert!(sys.potential(&eq).unwrap().abs() < 1e-15);
        let p345 = Configuration::from_xy(&[(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]);
        // sum over d in {3,4,5} of (d^2 - 1)/2 - ln d
        let oracle: f64 = [3.0f64, 4.0, 5.0].iter().map(|d| (d * d - 1.0) / 2.0 - d.ln()).sum();
        assert!((oracle - (23.5 - 60f64.ln())).abs() < 1e-12);
        assert!((sys.potential(&p345).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 19.4057).abs() < 1e-4);
    }

    #[test]
    fn gradient_vanishes_at_target_and_line_fixture() {
        let sys = build_uniform_system(&k3(), 1.0).unwrap();
        let eq = Configuration::from_xy(&[(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)]);
        assert!(sys.gradient(&eq).unwrap().norm() < 1e-15);
        let s = FRAC_1_SQRT_2;
        let line = Configuration::from_xy(&[(0.0, 0.0), (-s, 0.0), (s, 0.0)]);
        assert!(sys.gradient(&line).unwrap().norm() < 1e-14);
    }

    #[test]
    fn symmetric_line_root_oracle() {
        // Middle agent at 0, ends at -s and s: the end agent balances when
        // f(s) s + f(2s) 2s = 0, i.e. 3s - 3/(2s) = 0. Bisection oracle.
        let h = |s: f64| 3.0 * s - 3.0 / (2.0 * s);
        let (mut lo, mut hi) = (0.1, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn collision_rejected() {
        let sys = build_uniform_system(&k3(), 1.0).unwrap();
        let p = Configuration::from_xy(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(sys.potential(&p).unwrap_err(), Error::CollisionOnEdge(Edge::new(1, 2)));
        assert!(sys.hessian(&p).is_err());
    }

    #[test]
    fn two_agent_hessian_signature() {
        let g = build_from_henneberg(2, &[]).unwrap();
        let sys = build_uniform_system(&g, 1.5).unwrap();
        let p = Configuration::from_xy(&[(0.0, 0.0), (1.5, 0.0)]);
        let h = sys.hessian(&p).unwrap();
        let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let law = sys.laws()[0].clone();
        let expect = 2.0 * 1.5 * law.derivative(1.5);
        assert!((ev[3] - expect).abs() < 1e-12);
        assert!(ev[..3].iter().all(|v| v.abs() < 1e-12));
    }
}
