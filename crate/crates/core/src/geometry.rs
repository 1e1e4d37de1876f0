//! Planar configurations, the SE(2) action, and rigidity predicates.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TriangulatedLamanGraph;

/// Default collinearity tolerance (dimensionless).
pub const DEFAULT_ALIGN_TOL: f64 = 1e-9;

/// Relative singular-value cutoff for numerical rank.
pub const RANK_RTOL: f64 = 1e-10;

/// An ordered list of planar points, one per vertex of the associated graph
/// (in the graph's sorted label order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    #[serde(with = "points_serde")]
    pub points: Vec<Vector2<f64>>,
}

mod points_serde {
    use nalgebra::Vector2;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(pts: &[Vector2<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(pts.iter().map(|p| [p.x, p.y]))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector2<f64>>, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|[x, y]| Vector2::new(x, y)).collect())
    }
}

impl Configuration {
    pub fn new(points: Vec<Vector2<f64>>) -> Self {
        Configuration { points }
    }

    pub fn from_xy(xy: &[(f64, f64)]) -> Self {
        Configuration::new(xy.iter().map(|&(x, y)| Vector2::new(x, y)).collect())
    }

    /// Builds a configuration from the stacked vector `(x1, y1, ..., xn, yn)`.
    pub fn from_flat(flat: &DVector<f64>) -> Self {
        Configuration::new(flat.as_slice().chunks_exact(2).map(|c| Vector2::new(c[0], c[1])).collect())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Stacked coordinates `(x1, y1, ..., xn, yn)`.
    pub fn to_flat(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.n(), self.points.iter().flat_map(|p| [p.x, p.y]))
    }

    pub fn centroid(&self) -> Vector2<f64> {
        self.points.iter().sum::<Vector2<f64>>() / self.n() as f64
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Largest coordinate magnitude, used to scale absolute thresholds.
    pub fn extent(&self) -> f64 {
        self.points.iter().map(|p| p.amax()).fold(0.0, f64::max)
    }

    /// Point of the vertex with label `v` in graph `g`.
    pub fn at(&self, g: &TriangulatedLamanGraph, v: usize) -> Vector2<f64> {
        self.points[g.index_of(v).expect("vertex not in graph")]
    }

    /// Restriction to the vertices of `sub`, a subgraph of `g`.
    pub fn restrict(&self, g: &TriangulatedLamanGraph, sub: &TriangulatedLamanGraph) -> Configuration {
        Configuration::new(sub.vertices().iter().map(|&v| self.at(g, v)).collect())
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.n() });
        }
        Ok(())
    }

    /// CSV row `x1,y1,...,xn,yn`.
    pub fn to_csv_row(&self) -> String {
        self.points
            .iter()
            .map(|p| format!("{},{}", p.x, p.y))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let vals: Vec<f64> = row
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if !vals.len().is_multiple_of(2) {
            return Err(Error::Parse("odd number of coordinates".to_string()));
        }
        Ok(Configuration::from_flat(&DVector::from_vec(vals)))
    }
}

/// Element `(theta, v)` of SE(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    theta: Matrix2<f64>,
    v: Vector2<f64>,
}

impl RigidMotion {
    pub fn identity() -> Self {
        RigidMotion { theta: Matrix2::identity(), v: Vector2::zeros() }
    }

    /// Rotation by `angle` (radians, counter-clockwise) followed by translation `v`.
    pub fn new(angle: f64, v: Vector2<f64>) -> Self {
        let (s, c) = angle.sin_cos();
        RigidMotion { theta: Matrix2::new(c, -s, s, c), v }
    }

    pub fn rotation(&self) -> &Matrix2<f64> {
        &self.theta
    }

    pub fn translation(&self) -> &Vector2<f64> {
        &self.v
    }

    /// Group product `self * other = (theta_s theta_o, theta_s v_o + v_s)`.
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        RigidMotion { theta: self.theta * other.theta, v: self.theta * other.v + self.v }
    }

    pub fn apply_point(&self, x: &Vector2<f64>) -> Vector2<f64> {
        self.theta * x + self.v
    }
}

/// `gamma . p`: every point mapped to `theta x_i + v`.
pub fn apply_motion(gamma: &RigidMotion, p: &Configuration) -> Configuration {
    Configuration::new(p.points.iter().map(|x| gamma.apply_point(x)).collect())
}

/// Squared edge lengths in canonical edge order.
pub fn distance_map(g: &TriangulatedLamanGraph, p: &Configuration) -> Result<Vec<f64>> {
    p.check_len(g.n())?;
    Ok(g.edges().iter().map(|e| (p.at(g, e.lo) - p.at(g, e.hi)).norm_squared()).collect())
}

/// Orthonormal basis (as the columns of a `2n x 3` matrix) of the tangent
/// space of the orbit through `p`: the two translations and the rotation
/// generator, Gram-Schmidt orthogonalized in that order.
pub fn orbit_tangent_basis(p: &Configuration) -> Result<DMatrix<f64>> {
    let n = p.n();
    if n == 0 {
        return Err(Error::DegenerateRotation);
    }
    let dim = 2 * n;
    let s = 1.0 / (n as f64).sqrt();
    let mut basis = DMatrix::zeros(dim, 3);
    for i in 0..n {
        basis[(2 * i, 0)] = s;
        basis[(2 * i + 1, 1)] = s;
    }
    let mut r = DVector::from_iterator(dim, p.points.iter().flat_map(|x| [-x.y, x.x]));
    let raw = r.norm();
    for k in 0..2 {
        let col = basis.column(k).clone_owned();
        r -= &col * col.dot(&r);
    }
    let norm = r.norm();
    if norm <= 1e-12 * (1.0 + raw) {
        return Err(Error::DegenerateRotation);
    }
    basis.set_column(2, &(r / norm));
    Ok(basis)
}

/// Orthonormal basis of the orthogonal complement of the orbit tangent space.
pub fn orbit_normal_basis(p: &Configuration) -> Result<DMatrix<f64>> {
    let t = orbit_tangent_basis(p)?;
    Ok(complement_basis(&t))
}

/// Orthonormal basis of the complement of the span of the orthonormal
/// columns of `t`.
pub(crate) fn complement_basis(t: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = t.nrows();
    let projector = DMatrix::identity(dim, dim) - t * t.transpose();
    let eig = projector.symmetric_eigen();
    let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let mut out = DMatrix::zeros(dim, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

/// Root-mean-square deviation between `q` and the best proper rigid motion
/// of `p` (closed-form optimal rotation about the centroids).
pub fn aligned_rmsd(p: &Configuration, q: &Configuration) -> Result<f64> {
    p.check_len(q.n())?;
    if p.n() == 0 {
        return Ok(0.0);
    }
    let (cp, cq) = (p.centroid(), q.centroid());
    let (mut sdot, mut scross) = (0.0, 0.0);
    for (a, b) in p.points.iter().zip(&q.points) {
        let (a, b) = (a - cp, b - cq);
        sdot += a.dot(&b);
        scross += a.x * b.y - a.y * b.x;
    }
    let gamma = RigidMotion::new(scross.atan2(sdot), Vector2::zeros());
    let sq: f64 = p
        .points
        .iter()
        .zip(&q.points)
        .map(|(a, b)| (gamma.apply_point(&(a - cp)) - (b - cq)).norm_squared())
        .sum();
    Ok((sq / p.n() as f64).sqrt())
}

/// Whether `q` lies on the SE(2)-orbit of `p` up to RMSD `tol`. Reflections
/// are not rigid motions and distinguish orbits.
pub fn same_orbit(p: &Configuration, q: &Configuration, tol: f64) -> Result<bool> {
    Ok(aligned_rmsd(p, q)? <= tol)
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Collinearity test for three points: `|cross| <= tol * l1 * l2`, where
/// `l1, l2` are the two longest sides (the sine of the smallest angle is at
/// most `tol`). The test does not depend on which point is the pivot.
pub fn aligned(a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>, tol: f64) -> bool {
    let mut sides = [(b - a).norm(), (c - a).norm(), (c - b).norm()];
    sides.sort_by(f64::total_cmp);
    cross(&(b - a), &(c - a)).abs() <= tol * sides[1] * sides[2]
}

/// Whether all points lie on one line under the [`aligned`] test, measured
/// against the two most distant points.
pub fn is_line_configuration(points: &[Vector2<f64>], tol: f64) -> bool {
    if points.len() < 3 {
        return true;
    }
    let (mut ia, mut ib, mut best) = (0, 0, -1.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (points[i] - points[j]).norm();
            if d > best {
                (ia, ib, best) = (i, j, d);
            }
        }
    }
    if best == 0.0 {
        return true;
    }
    let (a, b) = (points[ia], points[ib]);
    points.iter().all(|c| (c - a).norm() == 0.0 || (c - b).norm() == 0.0 || aligned(&a, &b, c, tol))
}

/// Rigidity-style predicates of the framework `(g, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameworkPredicates {
    pub strongly_rigid: bool,
    pub line_configuration: bool,
    pub rigidity_rank: usize,
    pub infinitesimally_rigid: bool,
}

/// Jacobian of [`distance_map`] at `p` (`|E| x 2n`).
pub fn rigidity_matrix(g: &TriangulatedLamanGraph, p: &Configuration) -> Result<DMatrix<f64>> {
    p.check_len(g.n())?;
    let mut r = DMatrix::zeros(g.edges().len(), 2 * g.n());
    for (row, e) in g.edges().iter().enumerate() {
        let (a, b) = (g.index_of(e.lo).unwrap(), g.index_of(e.hi).unwrap());
        let u = p.points[a] - p.points[b];
        for c in 0..2 {
            r[(row, 2 * a + c)] = 2.0 * u[c];
            r[(row, 2 * b + c)] = -2.0 * u[c];
        }
    }
    Ok(r)
}

/// Number of singular values above `RANK_RTOL * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

pub fn framework_predicates(
    g: &TriangulatedLamanGraph,
    p: &Configuration,
    align_tol: f64,
) -> Result<FrameworkPredicates> {
    p.check_len(g.n())?;
    let strongly_rigid = g
        .cycles3()
        .iter()
        .all(|&[i, j, k]| !aligned(&p.at(g, i), &p.at(g, j), &p.at(g, k), align_tol));
    let line_configuration = is_line_configuration(&p.points, align_tol);
    let rigidity_rank = numerical_rank(&rigidity_matrix(g, p)?);
    Ok(FrameworkPredicates {
        strongly_rigid,
        line_configuration,
        rigidity_rank,
        infinitesimally_rigid: rigidity_rank + 3 == 2 * g.n(),
    })
}
