//! Hessian signatures and everything built on them: the per-part signature
//! decomposition over the independent partition, the explicit congruence
//! `W^T H W = Lambda`, the line-configuration matrices, system reduction,
//! stability classification and target-orbit enumeration.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::control::{ControlLaw, FormationSystem, InverseSquare, SumLaw};
use crate::error::{Error, Result};
use crate::geometry::{
    aligned, framework_predicates, is_line_configuration, orbit_normal_basis, orbit_tangent_basis,
    Configuration, FrameworkPredicates, DEFAULT_ALIGN_TOL,
};
use crate::graph::{Edge, TriangulatedLamanGraph};
use crate::partition::{eta_derivative, independent_partition, IndependentPartition};

/// Default relative threshold below which an eigenvalue counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Gradient norm (relative to `max(1, largest target)`) accepted as an equilibrium.
pub const EQUILIBRIUM_RTOL: f64 = 1e-8;

/// Relative asymmetry tolerated by [`signature_of`].
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// Relative tolerance of the congruence identity `W^T H W = Lambda`.
pub const CONGRUENCE_RTOL: f64 = 1e-6;

/// Condition number above which `W` is rejected.
pub const MAX_W_CONDITION: f64 = 1e12;

/// Largest mismatch tolerated between surviving-agent dynamics of a system
/// and its reduction.
pub const REDUCTION_TOL: f64 = 1e-10;

/// `(N+, N-, N0)`; serialized as a three-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Signature {
    pub n_plus: usize,
    pub n_minus: usize,
    pub n_zero: usize,
}

impl Signature {
    pub fn new(n_plus: usize, n_minus: usize, n_zero: usize) -> Self {
        Signature { n_plus, n_minus, n_zero }
    }

    pub fn dim(&self) -> usize {
        self.n_plus + self.n_minus + self.n_zero
    }
}

impl From<[usize; 3]> for Signature {
    fn from([a, b, c]: [usize; 3]) -> Self {
        Signature::new(a, b, c)
    }
}

impl From<Signature> for [usize; 3] {
    fn from(s: Signature) -> Self {
        [s.n_plus, s.n_minus, s.n_zero]
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n_plus, self.n_minus, self.n_zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    ExponentiallyStable,
    Unstable,
    Degenerate,
}

impl StabilityClass {
    /// Class of an equilibrium with `n` agents and Hessian signature `sig`.
    pub fn from_signature(sig: Signature, n: usize) -> Self {
        if sig.n_zero > 3 {
            StabilityClass::Degenerate
        } else if sig == Signature::new(2 * n - 3, 0, 3) {
            StabilityClass::ExponentiallyStable
        } else {
            StabilityClass::Unstable
        }
    }
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityClass::ExponentiallyStable => "exponentially_stable",
            StabilityClass::Unstable => "unstable",
            StabilityClass::Degenerate => "degenerate",
        })
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &v| a.max(v.abs()))
}

fn check_symmetric(h: &DMatrix<f64>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    let asym = max_abs(&(h - h.transpose())) / max_abs(h).max(1.0);
    if asym > SYMMETRY_RTOL {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigenvalues of a (checked) symmetric matrix, ascending.
pub fn symmetric_eigenvalues(h: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(h)?;
    let sym = (h + h.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn signature_from_eigenvalues(ev: &[f64], zero_tol: f64) -> Signature {
    let scale = ev.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut sig = Signature::default();
    for &l in ev {
        if l.abs() <= zero_tol * scale {
            sig.n_zero += 1;
        } else if l > 0.0 {
            sig.n_plus += 1;
        } else {
            sig.n_minus += 1;
        }
    }
    sig
}

pub fn signature_of(h: &DMatrix<f64>, zero_tol: f64) -> Result<Signature> {
    Ok(signature_from_eigenvalues(&symmetric_eigenvalues(h)?, zero_tol))
}

/// Gradient-norm threshold used to accept `p` as an equilibrium of `sys`.
pub fn equilibrium_tol(sys: &FormationSystem) -> f64 {
    EQUILIBRIUM_RTOL * sys.max_target().max(1.0)
}

/// Full signature assembled from the independent partition, plus the
/// per-part signatures of the induced sub-Hessians.
#[derive(Debug, Clone, PartialEq)]
pub struct MbifSignature {
    pub total: Signature,
    pub per_part: Vec<Signature>,
    pub partition: IndependentPartition,
}

pub fn mbif_signature(
    sys: &FormationSystem,
    p: &Configuration,
    align_tol: f64,
    zero_tol: f64,
) -> Result<MbifSignature> {
    let g = sys.graph();
    let partition = independent_partition(g, p, align_tol)?;
    let mut per_part = Vec::with_capacity(partition.len());
    for (sub, pi) in partition.subgraphs().iter().zip(partition.subconfigs()) {
        let h = sys.subsystem(sub)?.hessian(pi)?;
        per_part.push(signature_of(&h, zero_tol)?);
    }
    let n_plus: usize = per_part.iter().map(|s| s.n_plus).sum();
    let n_minus: usize = per_part.iter().map(|s| s.n_minus).sum();
    // Away from equilibria the per-part counts may exceed 2n; the sum is
    // only meaningful at an equilibrium.
    let total = Signature::new(n_plus, n_minus, (2 * g.n()).saturating_sub(n_plus + n_minus));
    Ok(MbifSignature { total, per_part, partition })
}

/// `W` and the diagonal of `Lambda`, with the achieved residual and
/// condition number.
#[derive(Debug, Clone)]
pub struct Congruence {
    pub w: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub residual: f64,
    pub condition: f64,
}

impl Congruence {
    pub fn lambda_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.lambda)
    }
}

fn sub_gradient_norms(sys: &FormationSystem, part: &IndependentPartition) -> Result<Vec<f64>> {
    part.subgraphs()
        .iter()
        .zip(part.subconfigs())
        .map(|(sub, pi)| Ok(sys.subsystem(sub)?.gradient(pi)?.norm()))
        .collect()
}

/// Builds the congruence `W^T H_p W = Lambda` from the orbit tangent space and
/// the pushed-forward eigenvectors of every sub-Hessian.
pub fn congruence_matrices(
    sys: &FormationSystem,
    p: &Configuration,
    part: &IndependentPartition,
) -> Result<Congruence> {
    let g = sys.graph();
    let tol = equilibrium_tol(sys);
    for (i, norm) in sub_gradient_norms(sys, part)?.into_iter().enumerate() {
        if !(norm <= tol) {
            return Err(Error::SubEquilibriumViolated { part: i, norm });
        }
    }
    let dim = 2 * g.n();
    let mut w = DMatrix::zeros(dim, dim);
    let mut lambda = DVector::zeros(dim);
    w.columns_mut(0, 3).copy_from(&orbit_tangent_basis(p)?);
    let mut col = 3;
    for (i, (sub, pi)) in part.subgraphs().iter().zip(part.subconfigs()).enumerate() {
        let hi = sys.subsystem(sub)?.hessian(pi)?;
        let ni = orbit_normal_basis(pi)?;
        let reduced = ni.transpose() * &hi * &ni;
        let eig = SymmetricEigen::new((&reduced + reduced.transpose()) * 0.5);
        let pushed = eta_derivative(g, p, part, i)? * (&ni * &eig.eigenvectors);
        let k = pushed.ncols();
        w.columns_mut(col, k).copy_from(&pushed);
        lambda.rows_mut(col, k).copy_from(&eig.eigenvalues);
        col += k;
    }
    debug_assert_eq!(col, dim);
    let sv = w.singular_values();
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > MAX_W_CONDITION {
        return Err(Error::IllConditionedW(condition));
    }
    let h = sys.hessian(p)?;
    let residual = max_abs(&(w.transpose() * &h * &w - DMatrix::from_diagonal(&lambda)));
    let h_norm = h.singular_values().max();
    if residual > CONGRUENCE_RTOL * h_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::InconsistentWithTheory(format!(
            "congruence residual {residual:.3e} exceeds {CONGRUENCE_RTOL:e} x |H| = {h_norm:.3e}"
        )));
    }
    Ok(Congruence { w, lambda, residual, condition })
}

/// Zero-row-sum blocks of the Hessian at a line configuration, in the
/// coordinates where the line is the first axis: `H = diag(D, F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMatrices {
    pub d: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

pub fn line_matrices(sys: &FormationSystem, p: &Configuration) -> Result<LineMatrices> {
    let g = sys.graph();
    p.check_len(g.n())?;
    if !is_line_configuration(&p.points, DEFAULT_ALIGN_TOL) {
        return Err(Error::NotLineConfiguration);
    }
    let n = g.n();
    let mut d = DMatrix::zeros(n, n);
    let mut f = DMatrix::zeros(n, n);
    for ((e, len), law) in g.edges().iter().zip(sys.edge_lengths(p)?).zip(sys.laws()) {
        let (a, b) = (g.index_of(e.lo).unwrap(), g.index_of(e.hi).unwrap());
        for (m, v) in [(&mut d, law.xf_derivative(len)), (&mut f, law.value(len))] {
            m[(a, b)] = -v;
            m[(b, a)] = -v;
            m[(a, a)] += v;
            m[(b, b)] += v;
        }
    }
    let (sd, sf) = (signature_of(&d, DEFAULT_ZERO_TOL)?, signature_of(&f, DEFAULT_ZERO_TOL)?);
    let sh = signature_of(&sys.hessian(p)?, DEFAULT_ZERO_TOL)?;
    if sh != Signature::new(sd.n_plus + sf.n_plus, sd.n_minus + sf.n_minus, sd.n_zero + sf.n_zero) {
        return Err(Error::InconsistentWithTheory(format!(
            "Hessian signature {sh} is not the sum of D {sd} and F {sf}"
        )));
    }
    Ok(LineMatrices { d, f })
}

/// A system on `G - {k}` whose surviving agents move exactly as in the
/// original system at `p`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub system: FormationSystem,
    pub configuration: Configuration,
    pub removed: usize,
    pub anchor: Edge,
    /// Gain of the compensating term `kappa * (1 - (dbar/d)^2)` on `anchor`.
    pub kappa: f64,
    /// Whether `d * g(d)` is non-decreasing, i.e. `kappa >= 0`.
    pub monotone_preserved: bool,
    /// Largest mismatch between the two vector fields on surviving agents.
    pub dynamics_residual: f64,
}

pub fn reduce_system(sys: &FormationSystem, p: &Configuration, k: usize) -> Result<ReducedSystem> {
    let g = sys.graph();
    p.check_len(g.n())?;
    if !g.has_vertex(k) {
        return Err(Error::VertexOutOfRange { vertex: k, n: g.n() });
    }
    if g.degree(k) != 2 || g.n() < 3 {
        return Err(Error::PreconditionNotDegreeTwo(k));
    }
    let nb: Vec<usize> = g.neighbors(k).collect();
    let (i, j) = (nb[0], nb[1]);
    let (xi, xj, xk) = (p.at(g, i), p.at(g, j), p.at(g, k));
    if !aligned(&xi, &xj, &xk, DEFAULT_ALIGN_TOL) {
        return Err(Error::PreconditionNotAligned(k));
    }
    let anchor = Edge::new(i, j);
    let (eik, ejk) = (Edge::new(i, k), Edge::new(j, k));
    let (fik, fjk) = (sys.law(eik).unwrap(), sys.law(ejk).unwrap());
    let (dik, djk) = ((xk - xi).norm(), (xk - xj).norm());
    let vk = (xi - xk) * fik.value(dik) + (xj - xk) * fjk.value(djk);
    let tol = equilibrium_tol(sys);
    if vk.norm() > tol {
        return Err(Error::PreconditionNotEquilibratedVertex { vertex: k, residual: vk.norm() });
    }
    let law_ij = sys.law(anchor).ok_or(Error::NotTriangulatedLaman(format!(
        "neighbours {i} and {j} of vertex {k} are not adjacent"
    )))?;
    let dbar = sys.target(anchor).unwrap();
    let dij = (xj - xi).norm();
    let t = (xk - xi).dot(&(xj - xi)) / (dij * dij);
    let g_val = fik.value(dik) * t;
    let shape = 1.0 - (dbar / dij).powi(2);
    let kappa = if g_val.abs() <= tol {
        0.0
    } else if shape.abs() <= 1e-12 {
        return Err(Error::GainUndefined(anchor));
    } else {
        g_val / shape
    };

    let remaining: Vec<Edge> = g.edges().iter().copied().filter(|e| !e.contains(k)).collect();
    let graph = TriangulatedLamanGraph::from_edges(&remaining)?;
    let mut laws = Vec::with_capacity(remaining.len());
    let mut targets = Vec::with_capacity(remaining.len());
    for e in graph.edges() {
        let law = sys.law(*e).unwrap().clone();
        laws.push(if *e == anchor && kappa != 0.0 {
            ControlLaw::new(SumLaw { base: law_ij.clone(), extra: ControlLaw::new(InverseSquare { dbar, gain: kappa }) })
        } else {
            law
        });
        targets.push(sys.target(*e).unwrap());
    }
    let system = FormationSystem::from_parts(graph, laws, targets);
    let configuration = Configuration::new(
        system.graph().vertices().iter().map(|&v| p.at(g, v)).collect::<Vec<Vector2<f64>>>(),
    );

    let full = sys.gradient(p)?;
    let reduced = system.gradient(&configuration)?;
    let mut dynamics_residual = 0.0f64;
    for (r, &v) in system.graph().vertices().iter().enumerate() {
        let o = g.index_of(v).unwrap();
        for c in 0..2 {
            dynamics_residual = dynamics_residual.max((full[2 * o + c] - reduced[2 * r + c]).abs());
        }
    }
    if dynamics_residual > REDUCTION_TOL * sys.max_target().max(1.0) {
        return Err(Error::InconsistentWithTheory(format!(
            "reduced dynamics differ from the original by {dynamics_residual:.3e}"
        )));
    }
    Ok(ReducedSystem {
        system,
        configuration,
        removed: k,
        anchor,
        kappa,
        monotone_preserved: kappa >= 0.0,
        dynamics_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: StabilityClass,
    pub signature: Signature,
    pub predicates: FrameworkPredicates,
}

/// Classifies an equilibrium by its Hessian signature and checks the verdict
/// against strong rigidity.
pub fn classify_orbit(
    sys: &FormationSystem,
    p: &Configuration,
    zero_tol: f64,
    align_tol: f64,
) -> Result<Classification> {
    let g = sys.graph();
    let norm = sys.gradient(p)?.norm();
    if !(norm <= equilibrium_tol(sys)) {
        return Err(Error::NotAnEquilibrium(norm));
    }
    let signature = signature_of(&sys.hessian(p)?, zero_tol)?;
    if signature.n_zero < 3 {
        return Err(Error::InconsistentWithTheory(format!(
            "Hessian signature {signature} at an equilibrium has fewer than three zero eigenvalues"
        )));
    }
    let class = StabilityClass::from_signature(signature, g.n());
    let predicates = framework_predicates(g, p, align_tol)?;
    if (class == StabilityClass::ExponentiallyStable) != predicates.strongly_rigid {
        return Err(Error::InconsistentWithTheory(format!(
            "class {class} with signature {signature} but strongly_rigid = {}",
            predicates.strongly_rigid
        )));
    }
    Ok(Classification { class, signature, predicates })
}

/// Point at distances `ri` from `a` and `rj` from `b`, on the left of the
/// directed line `a -> b` unless `right` is set.
fn circle_intersection(
    a: Vector2<f64>,
    b: Vector2<f64>,
    ri: f64,
    rj: f64,
    right: bool,
) -> Option<Vector2<f64>> {
    let d = (b - a).norm();
    let along = (ri * ri - rj * rj + d * d) / (2.0 * d);
    let h2 = ri * ri - along * along;
    if !(h2 > 0.0) {
        return None;
    }
    let e = (b - a) / d;
    let left = Vector2::new(-e.y, e.x);
    let h = if right { -h2.sqrt() } else { h2.sqrt() };
    Some(a + e * along + left * h)
}

/// All `2^(n-2)` target configurations, one per orbit. Output `t` places the
/// vertex of step `s` to the right of its directed anchor iff bit `s` of `t`
/// is set.
pub fn enumerate_target_orbits(sys: &FormationSystem) -> Result<Vec<Configuration>> {
    let g = sys.graph();
    let steps = g.steps();
    let (b0, b1) = g.base();
    let count = 1usize << steps.len();
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let mut pts = vec![Vector2::zeros(); g.n()];
        pts[g.index_of(b1).unwrap()] = Vector2::new(sys.target(Edge::new(b0, b1)).unwrap(), 0.0);
        for (s, step) in steps.iter().enumerate() {
            let (i, j) = step.anchor;
            let k = step.new_vertex;
            let (xi, xj) = (pts[g.index_of(i).unwrap()], pts[g.index_of(j).unwrap()]);
            let ri = sys.target(Edge::new(i, k)).unwrap();
            let rj = sys.target(Edge::new(j, k)).unwrap();
            pts[g.index_of(k).unwrap()] = circle_intersection(xi, xj, ri, rj, t >> s & 1 == 1)
                .ok_or(Error::TriangleInequalityViolated([i, j, k]))?;
        }
        out.push(Configuration::new(pts));
    }
    Ok(out)
}

/// Whether every part of the independent partition of an equilibrium is an
/// equilibrium of its induced subsystem.
pub fn subsystem_equilibrium_check(
    sys: &FormationSystem,
    p: &Configuration,
    part: &IndependentPartition,
) -> Result<bool> {
    let norm = sys.gradient(p)?.norm();
    let tol = equilibrium_tol(sys);
    if !(norm <= tol) {
        return Err(Error::NotAnEquilibrium(norm));
    }
    Ok(sub_gradient_norms(sys, part)?.into_iter().all(|n| n <= tol))
}

/// Serialized spectral summary of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub signature: Signature,
    /// Stability class; `None` when the configuration is not an equilibrium.
    pub class: Option<StabilityClass>,
    pub per_part: Vec<Signature>,
    pub mbif_consistent: bool,
}

pub fn spectral_report(
    sys: &FormationSystem,
    p: &Configuration,
    zero_tol: f64,
    align_tol: f64,
) -> Result<SpectralReport> {
    let signature = signature_of(&sys.hessian(p)?, zero_tol)?;
    let mbif = mbif_signature(sys, p, align_tol, zero_tol)?;
    let class = if sys.gradient(p)?.norm() <= equilibrium_tol(sys) {
        Some(StabilityClass::from_signature(signature, sys.graph().n()))
    } else {
        None
    };
    Ok(SpectralReport {
        signature,
        class,
        per_part: mbif.per_part,
        mbif_consistent: (mbif.total.n_plus, mbif.total.n_minus) == (signature.n_plus, signature.n_minus),
    })
}
