//! Möbius geometry of `R^n` through the quadric
//! `M^n = {x_1^2 + ... + x_{n+1}^2 - x_{n+2}^2 = 0}` in `RP^{n+1}`.
//!
//! Coordinates are stored in the standard basis `e_1, ..., e_{n+2}`. The
//! null vectors `e_0 = (e_{n+2} - e_{n+1}) / 2` and
//! `e_inf = (e_{n+2} + e_{n+1}) / 2` satisfy `<e_0, e_inf> = -1/2`, and a
//! vector `v + x_0 e_0 + x_inf e_inf` has standard coordinates
//! `(v, (x_inf - x_0) / 2, (x_0 + x_inf) / 2)`.
//!
//! * points lift to `P + e_0 + |P|^2 e_inf`, the point at infinity to
//!   `N = [e_inf]`;
//! * a sphere with centre `c` and radius `r` is `c + e_0 + (|c|^2 - r^2) e_inf`;
//! * a plane `<P, v> = d` with `|v| = 1` is `v + 2 d e_inf`.
//!
//! Circular nets are Q-nets inscribed in `M^n`. The constrained
//! constructions (parameter lines on circles, lines, spheres or planes)
//! share one engine, [`construct`], which places each vertex of the lift on
//! the meet of the active constraint subspaces and `M^n`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cyclide;
use crate::error::{GeomError, Result};
use crate::projlin::{self, HPoint, Quadric, Subspace};
use crate::qnet::{self, Direction, QNet};
use crate::sample::{self, Rng, MAX_RETRIES};

/// Relative singular values below this count as zero when the dimension of
/// a meet is decided.
pub const DIM_TOL: f64 = 1e-8;
/// The first non-zero singular value of a meet must exceed this; otherwise
/// the dimension decision is ambiguous and the configuration non-generic.
pub const CONDITION_TOL: f64 = 1e-6;
/// Residual bound of corner certificates.
pub const CERT_TOL: f64 = 1e-8;
/// Concyclicity threshold of [`circularity_check`].
pub const CIRCULARITY_TOL: f64 = 1e-9;
/// Constructed vertices must stay inside this Euclidean ball.
pub const EUCLID_BOUND: f64 = 50.0;
/// Minimal Euclidean distance between neighbouring vertices.
pub const MIN_SEPARATION: f64 = 1e-2;
/// Minimal transversality of second intersections.
pub const MIN_TRANSVERSALITY: f64 = 1e-3;
/// Minimal relative third singular value of each vertex triple of a quad.
pub const QUAD_GENERICITY_TOL: f64 = 1e-5;
/// Threshold of quadric and conic fits in envelope reports.
pub const FIT_TOL: f64 = 1e-6;
/// Threshold of incidences, parallelism and orthogonality in envelope
/// reports.
pub const INCIDENCE_TOL: f64 = 1e-7;

const SPAN_TOL: f64 = 1e-7;
const INFINITY_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// the space

/// The Möbius quadric of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusSpace {
    n: usize,
    quadric: Quadric,
}

/// Result of the stereographic projection `σ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Projected {
    Finite(DVector<f64>),
    /// A point at infinity, with a unit direction.
    Infinite(DVector<f64>),
}

impl Projected {
    pub fn finite(self) -> Option<DVector<f64>> {
        match self {
            Projected::Finite(p) => Some(p),
            Projected::Infinite(_) => None,
        }
    }
}

impl MoebiusSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GeomError::Invalid("Euclidean dimension must be positive".into()));
        }
        let mut d = vec![1.0; n + 2];
        d[n + 1] = -1.0;
        Ok(MoebiusSpace { n, quadric: Quadric::diagonal(&d)? })
    }

    /// Euclidean dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The form `diag(1, ..., 1, -1)`.
    pub fn form(&self) -> DMatrix<f64> {
        let mut f = DMatrix::identity(self.n + 2, self.n + 2);
        f[(self.n + 1, self.n + 1)] = -1.0;
        f
    }

    pub fn quadric(&self) -> &Quadric {
        &self.quadric
    }

    /// The unnormalized Lorentz product.
    pub fn lorentz(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let n = self.n;
        x.rows(0, n + 1).dot(&y.rows(0, n + 1)) - x[n + 1] * y[n + 1]
    }

    /// `|<x, y>| / (|x| |y|)`.
    pub fn phi_unit(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (self.lorentz(x, y) / (x.norm() * y.norm())).abs()
    }

    pub fn from_parts(&self, v: &DVector<f64>, x0: f64, xinf: f64) -> DVector<f64> {
        let n = self.n;
        let mut x = DVector::zeros(n + 2);
        x.rows_mut(0, n).copy_from(v);
        x[n] = 0.5 * (xinf - x0);
        x[n + 1] = 0.5 * (x0 + xinf);
        x
    }

    /// `(v, x_0, x_inf)` of a vector.
    pub fn parts(&self, x: &DVector<f64>) -> (DVector<f64>, f64, f64) {
        let n = self.n;
        (x.rows(0, n).into_owned(), x[n + 1] - x[n], x[n + 1] + x[n])
    }

    pub fn e0(&self) -> DVector<f64> {
        self.from_parts(&DVector::zeros(self.n), 1.0, 0.0)
    }

    pub fn e_inf(&self) -> DVector<f64> {
        self.from_parts(&DVector::zeros(self.n), 0.0, 1.0)
    }

    /// The point at infinity `N = [e_inf]`.
    pub fn infinity(&self) -> HPoint {
        HPoint::new(self.e_inf()).expect("nonzero")
    }

    /// `P + e_0 + |P|^2 e_inf`.
    pub fn lift_vector(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        if p.len() != self.n {
            return Err(GeomError::DimensionMismatch { expected: self.n, found: p.len() });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(GeomError::Invalid("non-finite coordinate".into()));
        }
        Ok(self.from_parts(p, 1.0, p.norm_squared()))
    }

    pub fn lift_point(&self, p: &DVector<f64>) -> Result<HPoint> {
        HPoint::new(self.lift_vector(p)?)
    }

    /// `σ`: drop the `e_inf` component and normalize by the `e_0` one.
    pub fn project(&self, m: &HPoint) -> Result<Projected> {
        self.project_vector(m.coords())
    }

    pub fn project_vector(&self, x: &DVector<f64>) -> Result<Projected> {
        if x.len() != self.n + 2 {
            return Err(GeomError::DimensionMismatch { expected: self.n + 2, found: x.len() });
        }
        let (v, x0, _) = self.parts(x);
        let scale = x.norm();
        if x0.abs() > INFINITY_TOL * scale {
            return Ok(Projected::Finite(v / x0));
        }
        if v.norm() <= INFINITY_TOL * scale {
            return Err(GeomError::Invalid("the point N has no projection".into()));
        }
        let dir = &v / v.norm();
        Ok(Projected::Infinite(dir))
    }

    /// Representative of the sphere with centre `c` and squared radius `r2`
    /// (negative for imaginary spheres).
    pub fn sphere_vector(&self, c: &DVector<f64>, r2: f64) -> DVector<f64> {
        self.from_parts(c, 1.0, c.norm_squared() - r2)
    }

    /// Representative of the plane `<P, v> = d`.
    pub fn plane_vector(&self, v: &DVector<f64>, d: f64) -> DVector<f64> {
        let s = v.norm();
        self.from_parts(&(v / s), 0.0, 2.0 * d / s)
    }

    /// Euclidean reading of a vector as a point, sphere, plane or
    /// imaginary sphere.
    pub fn classify(&self, x: &DVector<f64>) -> SphereRep {
        let scale = x.norm_squared();
        let q = self.lorentz(x, x) / scale;
        let (v, x0, xinf) = self.parts(x);
        let tol = 1e-10;
        if q.abs() <= tol {
            let center = self.project_vector(x).ok().and_then(Projected::finite);
            return SphereRep {
                kind: SphereKind::Point,
                vector: x / x.norm(),
                center,
                radius2: Some(0.0),
                normal: None,
                offset: None,
            };
        }
        if x0.abs() <= tol * x.norm() {
            let s = v.norm();
            return SphereRep {
                kind: SphereKind::Plane,
                vector: self.from_parts(&(&v / s), 0.0, xinf / s),
                center: None,
                radius2: None,
                normal: Some(&v / s),
                offset: Some(xinf / (2.0 * s)),
            };
        }
        let c = &v / x0;
        let r2 = c.norm_squared() - xinf / x0;
        let kind = if q < 0.0 { SphereKind::Imaginary } else { SphereKind::Sphere };
        SphereRep {
            kind,
            vector: x / x0,
            center: Some(c),
            radius2: Some(r2),
            normal: None,
            offset: None,
        }
    }

    /// The hypersphere `S ∩ M^n` of a hyperplane `S`, read through its pole.
    pub fn hypersphere(&self, s: &Subspace) -> Result<SphereRep> {
        if s.ambient() != self.n + 1 {
            return Err(GeomError::DimensionMismatch { expected: self.n + 1, found: s.ambient() });
        }
        if s.dim() != self.n {
            return Err(GeomError::SpanDeficient { dim: s.dim(), expected: self.n });
        }
        let pole = pole_of(s, &self.form())?;
        Ok(self.classify(&pole))
    }

    /// The hypersphere through `n + 1` points.
    pub fn sphere_through(&self, points: &[DVector<f64>]) -> Result<SphereRep> {
        if points.len() != self.n + 1 {
            return Err(GeomError::DimensionMismatch { expected: self.n + 1, found: points.len() });
        }
        let lifts = points.iter().map(|p| self.lift_point(p)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&HPoint> = lifts.iter().collect();
        let s = Subspace::from_points(&refs)?;
        if s.dim() != self.n {
            return Err(GeomError::SpanDeficient { dim: s.dim(), expected: self.n });
        }
        self.hypersphere(&s)
    }

    /// `cos` of the intersection angle of two real spheres or planes:
    /// `<S_1, S_2> / sqrt(<S_1, S_1> <S_2, S_2>)`.
    pub fn cos_angle(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        let aa = self.lorentz(a, a);
        let bb = self.lorentz(b, b);
        if aa <= 0.0 || bb <= 0.0 {
            return Err(GeomError::Invalid("angle needs two real spheres".into()));
        }
        Ok(self.lorentz(a, b) / (aa * bb).sqrt())
    }
}

/// Pole of a hyperplane with respect to a form: `F^{-1} u` for the normal
/// `u`.
fn pole_of(s: &Subspace, form: &DMatrix<f64>) -> Result<DVector<f64>> {
    let comp = s.complement();
    if comp.ncols() != 1 {
        return Err(GeomError::SpanDeficient { dim: s.dim(), expected: s.ambient() - 1 });
    }
    let u = comp.column(0).into_owned();
    form.clone().lu().solve(&u).ok_or(GeomError::PolarUndefined { rank: 0, expected: 1 })
}

/// Euclidean type of a vector of `R^{n+1,1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereKind {
    Point,
    Sphere,
    Plane,
    Imaginary,
}

/// A point, sphere, plane or imaginary sphere with its Euclidean data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereRep {
    pub kind: SphereKind,
    /// Canonical representative: `x_0 = 1` for spheres, unit normal for
    /// planes, unit vector for points.
    #[serde(serialize_with = "crate::ser::vec")]
    pub vector: DVector<f64>,
    #[serde(serialize_with = "crate::ser::opt_vec")]
    pub center: Option<DVector<f64>>,
    /// Squared radius, negative for imaginary spheres.
    pub radius2: Option<f64>,
    #[serde(serialize_with = "crate::ser::opt_vec")]
    pub normal: Option<DVector<f64>>,
    pub offset: Option<f64>,
}

/// Relative smallest singular value of the four lifted points; concyclic
/// (or collinear) quadruples give zero.
pub fn circularity_check(space: &MoebiusSpace, quad: &[DVector<f64>; 4]) -> Result<f64> {
    let lifts = quad.iter().map(|p| space.lift_point(p)).collect::<Result<Vec<_>>>()?;
    Ok(lifted_circularity(&lifts.iter().collect::<Vec<_>>()))
}

/// Relative fourth singular value of four lifted points.
pub fn lifted_circularity(points: &[&HPoint]) -> f64 {
    let m = projlin::stack_points(points).expect("shared ambient");
    let s = projlin::singular_values(&m);
    if s.len() < 4 {
        return 0.0;
    }
    s[3] / s[0]
}

// ---------------------------------------------------------------------------
// constraint kinds

/// Constraint on one family of parameter lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LineKind {
    Free,
    /// On `m`-spheres: the lifts span `m + 1` dimensions.
    Spherical(usize),
    /// On `m`-planes: the lifts together with `N` span `m + 1` dimensions.
    Planar(usize),
}

impl LineKind {
    pub const CIRCULAR: LineKind = LineKind::Spherical(1);
    pub const LINEAR: LineKind = LineKind::Planar(1);

    /// Projective dimension of the constraint subspace in the lift.
    pub fn span_dim(self) -> Option<usize> {
        match self {
            LineKind::Free => None,
            LineKind::Spherical(m) | LineKind::Planar(m) => Some(m + 1),
        }
    }

    pub fn through_infinity(self) -> bool {
        matches!(self, LineKind::Planar(_))
    }

    /// Number of net vertices that determine the constraint subspace.
    pub fn points_needed(self) -> Option<usize> {
        match self {
            LineKind::Free => None,
            LineKind::Spherical(m) => Some(m + 2),
            LineKind::Planar(m) => Some(m + 1),
        }
    }

    pub fn order(self) -> Option<usize> {
        match self {
            LineKind::Free => None,
            LineKind::Spherical(m) | LineKind::Planar(m) => Some(m),
        }
    }

    pub fn name(self) -> String {
        match self {
            LineKind::Free => "free".into(),
            LineKind::Spherical(1) => "circular".into(),
            LineKind::Planar(1) => "linear".into(),
            LineKind::Spherical(2) => "spherical".into(),
            LineKind::Planar(2) => "planar".into(),
            LineKind::Spherical(m) => format!("{m}-spherical"),
            LineKind::Planar(m) => format!("{m}-planar"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || GeomError::Invalid(format!("unknown line constraint '{s}'"));
        Ok(match s {
            "free" => LineKind::Free,
            "circular" => LineKind::CIRCULAR,
            "linear" => LineKind::LINEAR,
            "spherical" => LineKind::Spherical(2),
            "planar" => LineKind::Planar(2),
            _ => {
                let (m, rest) = s.split_once('-').ok_or_else(bad)?;
                let m: usize = m.parse().map_err(|_| bad())?;
                if m == 0 {
                    return Err(bad());
                }
                match rest {
                    "spherical" => LineKind::Spherical(m),
                    "planar" => LineKind::Planar(m),
                    _ => return Err(bad()),
                }
            }
        })
    }
}

impl std::fmt::Display for LineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl From<LineKind> for String {
    fn from(k: LineKind) -> String {
        k.name()
    }
}

impl TryFrom<String> for LineKind {
    type Error = GeomError;
    fn try_from(s: String) -> Result<Self> {
        LineKind::parse(&s)
    }
}

/// Constraints on both families: `rows` for the lines `V_i = {P(i, j)}_j`,
/// `cols` for `H_j = {P(i, j)}_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintPair {
    pub rows: LineKind,
    pub cols: LineKind,
}

impl ConstraintPair {
    pub fn new(rows: LineKind, cols: LineKind) -> Self {
        ConstraintPair { rows, cols }
    }

    /// `"<rows>-<cols>"`, e.g. `"linear-circular"`.
    pub fn name(&self) -> String {
        format!("{}-{}", self.rows.name(), self.cols.name())
    }

    pub fn parse(s: &str) -> Result<Self> {
        for (k, _) in s.match_indices('-') {
            if let (Ok(r), Ok(c)) = (LineKind::parse(&s[..k]), LineKind::parse(&s[k + 1..])) {
                return Ok(ConstraintPair::new(r, c));
            }
        }
        Err(GeomError::Invalid(format!("unknown constraint pair '{s}'")))
    }

    /// Grid of the incidence theorem: the corner is the last vertex.
    pub fn theorem_grid(&self) -> Option<(usize, usize)> {
        Some((self.cols.points_needed()? + 1, self.rows.points_needed()? + 1))
    }

    pub fn transposed(&self) -> Self {
        ConstraintPair::new(self.cols, self.rows)
    }

    /// Both constraint subspaces must be proper subspaces of the lift.
    pub fn check_ambient(&self, n: usize) -> Result<()> {
        for k in [self.rows, self.cols] {
            if let Some(m) = k.order() {
                if m >= n {
                    return Err(GeomError::Invalid(format!("{} lines need n > {m}, got n = {n}", k.name())));
                }
            }
        }
        Ok(())
    }
}

/// One row of the dispatch table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSpec {
    pub name: &'static str,
    pub pair: ConstraintPair,
    /// Euclidean dimensions covered by the incidence theorem.
    pub ambients: &'static [usize],
}

/// The constrained incidence constructions.
pub fn pair_table() -> Vec<PairSpec> {
    use LineKind::*;
    let c = LineKind::CIRCULAR;
    let l = LineKind::LINEAR;
    let s = Spherical(2);
    let p = Planar(2);
    vec![
        PairSpec { name: "circular-circular", pair: ConstraintPair::new(c, c), ambients: &[2, 3] },
        PairSpec { name: "linear-circular", pair: ConstraintPair::new(l, c), ambients: &[2, 3] },
        PairSpec { name: "linear-linear", pair: ConstraintPair::new(l, l), ambients: &[2] },
        PairSpec { name: "circular-spherical", pair: ConstraintPair::new(c, s), ambients: &[3, 4] },
        PairSpec { name: "linear-spherical", pair: ConstraintPair::new(l, s), ambients: &[3, 4] },
        PairSpec { name: "circular-planar", pair: ConstraintPair::new(c, p), ambients: &[3, 4] },
        PairSpec { name: "linear-planar", pair: ConstraintPair::new(l, p), ambients: &[3] },
        PairSpec { name: "spherical-spherical", pair: ConstraintPair::new(s, s), ambients: &[3, 4, 5] },
        PairSpec { name: "planar-spherical", pair: ConstraintPair::new(p, s), ambients: &[3, 4, 5] },
        PairSpec { name: "planar-planar", pair: ConstraintPair::new(p, p), ambients: &[3, 4] },
    ]
}

// ---------------------------------------------------------------------------
// circular nets

/// A circular net in `R^n` with its lift to `M^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularNet {
    space: MoebiusSpace,
    rows: usize,
    cols: usize,
    points: Vec<DVector<f64>>,
    lift: QNet,
    constraints: Option<ConstraintPair>,
}

/// JSON form of a [`CircularNet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularNetJson {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintsJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintsJson {
    pub rows: String,
    pub cols: String,
}

impl CircularNet {
    /// Net from row-major Euclidean points; the lift is computed.
    pub fn new(n: usize, rows: usize, cols: usize, points: Vec<DVector<f64>>) -> Result<Self> {
        let space = MoebiusSpace::new(n)?;
        let lifts = points.iter().map(|p| space.lift_point(p)).collect::<Result<Vec<_>>>()?;
        let lift = QNet::new(rows, cols, lifts)?;
        Ok(CircularNet { space, rows, cols, points, lift, constraints: None })
    }

    /// Net from a lift; every vertex must project to a finite point.
    pub fn from_lift(space: &MoebiusSpace, lift: QNet) -> Result<Self> {
        if lift.ambient() != space.n() + 1 {
            return Err(GeomError::DimensionMismatch { expected: space.n() + 1, found: lift.ambient() });
        }
        let mut points = Vec::with_capacity(lift.rows() * lift.cols());
        for i in 0..lift.rows() {
            for j in 0..lift.cols() {
                match space.project(lift.at(i, j)).map_err(|e| e.at(i, j))? {
                    Projected::Finite(p) => points.push(p),
                    Projected::Infinite(_) => {
                        return Err(GeomError::Invalid("vertex at infinity".into()).at(i, j));
                    }
                }
            }
        }
        Ok(CircularNet {
            space: space.clone(),
            rows: lift.rows(),
            cols: lift.cols(),
            points,
            lift,
            constraints: None,
        })
    }

    pub fn with_constraints(mut self, pair: ConstraintPair) -> Self {
        self.constraints = Some(pair);
        self
    }

    pub fn space(&self) -> &MoebiusSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn point(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.points[i * self.cols + j]
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn lift(&self) -> &QNet {
        &self.lift
    }

    pub fn constraints(&self) -> Option<ConstraintPair> {
        self.constraints
    }

    /// Largest quad circularity residual (planarity of the lift).
    pub fn circularity_residual(&self) -> f64 {
        qnet::planarity_residual(&self.lift)
    }

    /// Largest incidence of the lift with `M^n`.
    pub fn on_quadric_residual(&self) -> f64 {
        self.lift.vertices().iter().map(|p| self.space.quadric().incidence(p)).fold(0.0, f64::max)
    }

    /// Largest round-trip error `|σ(lift(i, j)) - points(i, j)|`.
    pub fn round_trip_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let e = match self.space.project(self.lift.at(i, j)) {
                    Ok(Projected::Finite(p)) => (p - self.point(i, j)).norm(),
                    _ => f64::INFINITY,
                };
                worst = worst.max(e);
            }
        }
        worst
    }

    /// Sub-net on rows `i0..i0+r` and columns `j0..j0+c`.
    pub fn window(&self, i0: usize, j0: usize, r: usize, c: usize) -> Result<CircularNet> {
        let lift = self.lift.window(i0, j0, r, c)?;
        let mut points = Vec::with_capacity(r * c);
        for i in i0..i0 + r {
            for j in j0..j0 + c {
                points.push(self.point(i, j).clone());
            }
        }
        Ok(CircularNet { space: self.space.clone(), rows: r, cols: c, points, lift, constraints: self.constraints })
    }

    pub fn transposed(&self) -> CircularNet {
        let mut points = Vec::with_capacity(self.points.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                points.push(self.point(i, j).clone());
            }
        }
        CircularNet {
            space: self.space.clone(),
            rows: self.cols,
            cols: self.rows,
            points,
            lift: self.lift.transposed(),
            constraints: self.constraints.map(|c| c.transposed()),
        }
    }

    pub fn to_json(&self) -> CircularNetJson {
        CircularNetJson {
            n: self.n(),
            rows: self.rows,
            cols: self.cols,
            points: self.points.iter().map(|p| p.iter().copied().collect()).collect(),
            constraints: self.constraints.map(|c| ConstraintsJson { rows: c.rows.name(), cols: c.cols.name() }),
        }
    }

    pub fn from_json(j: &CircularNetJson) -> Result<Self> {
        for p in &j.points {
            if p.len() != j.n {
                return Err(GeomError::DimensionMismatch { expected: j.n, found: p.len() });
            }
        }
        let pts = j.points.iter().map(|p| DVector::from_column_slice(p)).collect();
        let mut net = CircularNet::new(j.n, j.rows, j.cols, pts)?;
        if let Some(c) = &j.constraints {
            net.constraints = Some(ConstraintPair::new(LineKind::parse(&c.rows)?, LineKind::parse(&c.cols)?));
        }
        Ok(net)
    }
}

// ---------------------------------------------------------------------------
// constrained construction

/// Certificate of a vertex placed as a zero-dimensional meet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerCertificate {
    pub i: usize,
    pub j: usize,
    /// Incidence with `M^n`.
    pub on_quadric: f64,
    /// Distance to the row constraint subspace `V_i` (zero when inactive).
    pub in_row: f64,
    /// Distance to the column constraint subspace `H_j` (zero when inactive).
    pub in_col: f64,
    /// Circularity of the quad completed by the vertex.
    pub quad_circularity: f64,
    /// Residual of the least-squares meet.
    pub meet_residual: f64,
    /// Worst circularity of the six concyclic quadruples through the vertex
    /// in its `4 × 4` window (circular-circular only).
    pub six_circles: Option<f64>,
}

impl CornerCertificate {
    pub fn worst(&self) -> f64 {
        [self.on_quadric, self.in_row, self.in_col, self.quad_circularity, self.six_circles.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn certified(&self) -> bool {
        self.worst() < CERT_TOL
    }
}

/// Global certification of a constructed net.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionReport {
    pub pair: String,
    pub rows: usize,
    pub cols: usize,
    pub attempts: usize,
    pub corners: Vec<CornerCertificate>,
    pub min_transversality: f64,
    pub circularity: f64,
    pub on_quadric: f64,
    /// Largest relative singular value beyond the constrained dimension,
    /// over all row spans.
    pub row_span_excess: f64,
    pub col_span_excess: f64,
}

impl ConstructionReport {
    pub fn worst_corner(&self) -> f64 {
        self.corners.iter().map(CornerCertificate::worst).fold(0.0, f64::max)
    }
}

/// Relative singular value beyond dimension `kind.span_dim()` of the given
/// points (and `N` for planar kinds), and the relative singular value at
/// that dimension (the conditioning of the span).
fn span_gaps(space: &MoebiusSpace, kind: LineKind, pts: &[&HPoint]) -> Result<(f64, f64)> {
    let k = match kind.span_dim() {
        Some(k) => k,
        None => return Ok((0.0, 1.0)),
    };
    let inf = space.infinity();
    let mut gens: Vec<&HPoint> = pts.to_vec();
    if kind.through_infinity() {
        gens.push(&inf);
    }
    let s = projlin::singular_values(&projlin::stack_points(&gens)?);
    let smax = s[0];
    let excess = s.get(k + 1).copied().unwrap_or(0.0) / smax;
    let cond = s.get(k).copied().unwrap_or(0.0) / smax;
    Ok((excess, cond))
}

/// Constraint subspace of a family of lift points.
fn constraint_span(space: &MoebiusSpace, kind: LineKind, pts: &[&HPoint]) -> Result<Subspace> {
    let k = kind.span_dim().ok_or(GeomError::Invalid("free family has no span".into()))?;
    let inf = space.infinity();
    let mut gens: Vec<&HPoint> = pts.to_vec();
    if kind.through_infinity() {
        gens.push(&inf);
    }
    Ok(Subspace::from_points_dim(&gens, k)?.0)
}

struct Builder<'a> {
    space: &'a MoebiusSpace,
    pair: ConstraintPair,
    rows: usize,
    cols: usize,
    cells: Vec<Option<HPoint>>,
    corners: Vec<CornerCertificate>,
    min_transversality: f64,
}

impl<'a> Builder<'a> {
    fn new(space: &'a MoebiusSpace, pair: ConstraintPair, rows: usize, cols: usize) -> Self {
        Builder {
            space,
            pair,
            rows,
            cols,
            cells: vec![None; rows * cols],
            corners: Vec::new(),
            min_transversality: 1.0,
        }
    }

    fn seeded(space: &'a MoebiusSpace, pair: ConstraintPair, rows: usize, cols: usize, seed: &QNet) -> Self {
        let mut b = Builder::new(space, pair, rows, cols);
        for i in 0..seed.rows() {
            for j in 0..seed.cols() {
                b.cells[i * cols + j] = Some(seed.at(i, j).clone());
            }
        }
        b
    }

    fn get(&self, i: usize, j: usize) -> Option<&HPoint> {
        if i < self.rows && j < self.cols {
            self.cells[i * self.cols + j].as_ref()
        } else {
            None
        }
    }

    fn col_points(&self, j: usize) -> Vec<&HPoint> {
        (0..self.rows).filter_map(|i| self.get(i, j)).collect()
    }

    fn row_points(&self, i: usize) -> Vec<&HPoint> {
        (0..self.cols).filter_map(|j| self.get(i, j)).collect()
    }

    fn family_span(&self, kind: LineKind, pts: &[&HPoint]) -> Result<Option<Subspace>> {
        let need = match kind.points_needed() {
            Some(need) if pts.len() >= need => need,
            _ => return Ok(None),
        };
        let _ = need;
        let (excess, cond) = span_gaps(self.space, kind, pts)?;
        if excess > SPAN_TOL {
            return Err(GeomError::Hypothesis(format!(
                "{} parameter line exceeds its dimension (relative singular value {excess:e})",
                kind.name()
            )));
        }
        if cond < CONDITION_TOL {
            return Err(GeomError::NonGeneric(format!("{} parameter line is degenerate", kind.name())));
        }
        Ok(Some(constraint_span(self.space, kind, pts)?))
    }

    fn euclidean_ok(&self, i: usize, j: usize, p: &HPoint) -> bool {
        let x = match self.space.project(p) {
            Ok(Projected::Finite(x)) => x,
            _ => return false,
        };
        if !(x.norm() <= EUCLID_BOUND) {
            return false;
        }
        let neighbours = [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)];
        for (a, b) in neighbours {
            if let Some(q) = self.get(a, b) {
                match self.space.project(q) {
                    Ok(Projected::Finite(ref y)) if (&x - y).norm() > MIN_SEPARATION => {}
                    _ => return false,
                }
            }
        }
        true
    }

    fn quad_generic(&self, i: usize, j: usize) -> bool {
        let q: Vec<&HPoint> = match [self.get(i, j), self.get(i + 1, j), self.get(i, j + 1), self.get(i + 1, j + 1)] {
            [Some(a), Some(b), Some(c), Some(d)] => vec![a, b, c, d],
            _ => return true,
        };
        (0..4).all(|skip| {
            let tri: Vec<&HPoint> = (0..4).filter(|&k| k != skip).map(|k| q[k]).collect();
            let s = projlin::singular_values(&projlin::stack_points(&tri).expect("ambient"));
            s[2] / s[0] > QUAD_GENERICITY_TOL
        })
    }

    fn six_circles(&self, i: usize, j: usize) -> Option<f64> {
        if self.pair != ConstraintPair::new(LineKind::CIRCULAR, LineKind::CIRCULAR) || i < 3 || j < 3 {
            return None;
        }
        let quads: [[(usize, usize); 4]; 6] = [
            [(2, 2), (3, 2), (2, 3), (3, 3)],
            [(0, 0), (3, 0), (0, 3), (3, 3)],
            [(0, 2), (0, 3), (3, 2), (3, 3)],
            [(2, 0), (3, 0), (2, 3), (3, 3)],
            [(3, 0), (3, 1), (3, 2), (3, 3)],
            [(0, 3), (1, 3), (2, 3), (3, 3)],
        ];
        let mut worst = 0.0f64;
        for q in quads {
            let pts: Option<Vec<&HPoint>> = q.iter().map(|&(a, b)| self.get(i - 3 + a, j - 3 + b)).collect();
            worst = worst.max(lifted_circularity(&pts?));
        }
        Some(worst)
    }

    /// Places vertex `(i, j)` on the meet of its active constraints and
    /// `M^n`.
    fn place(&mut self, i: usize, j: usize, rng: &mut Rng) -> Result<()> {
        let m = self.space.quadric().clone();
        let mut subs: Vec<Subspace> = Vec::new();
        if i > 0 && j > 0 {
            let tri: Vec<&HPoint> = [self.get(i - 1, j - 1), self.get(i, j - 1), self.get(i - 1, j)]
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or(GeomError::Invalid("fill order leaves a quad incomplete".into()))?;
            let s = projlin::singular_values(&projlin::stack_points(&tri)?);
            if s[2] / s[0] < QUAD_GENERICITY_TOL {
                return Err(GeomError::NonGeneric("collinear quad triple".into()));
            }
            subs.push(Subspace::from_points_dim(&tri, 2)?.0);
        }
        let h = self.family_span(self.pair.cols, &self.col_points(j))?;
        let v = self.family_span(self.pair.rows, &self.row_points(i))?;
        subs.extend(h.iter().cloned());
        subs.extend(v.iter().cloned());

        let point = if subs.is_empty() {
            self.free_point(i, j, rng)?
        } else {
            let refs: Vec<&Subspace> = subs.iter().collect();
            let (s, k, meet_residual) = if refs.len() == 1 {
                (refs[0].clone(), refs[0].dim(), 0.0)
            } else {
                let spec = projlin::meet_spectrum(&refs)?;
                let k1 = spec.iter().take_while(|&&x| x < DIM_TOL).count();
                if k1 == 0 {
                    return Err(GeomError::EmptyMeet);
                }
                if spec.get(k1).is_some_and(|&x| x < CONDITION_TOL) {
                    return Err(GeomError::NonGeneric("ill-conditioned meet".into()));
                }
                let (s, r) = projlin::meet_dim(&refs, k1 - 1)?;
                (s, k1 - 1, r)
            };
            let known: Vec<HPoint> = self.known_points(i, j, &s).into_iter().cloned().collect();
            match k {
                0 => {
                    let p = s.as_point().expect("point meet");
                    let quad_circularity = if i > 0 && j > 0 {
                        let q = [self.get(i - 1, j - 1).unwrap(), self.get(i, j - 1).unwrap(), self.get(i - 1, j).unwrap(), &p];
                        lifted_circularity(&q)
                    } else {
                        0.0
                    };
                    let mut cert = CornerCertificate {
                        i,
                        j,
                        on_quadric: m.incidence(&p),
                        in_row: v.as_ref().map_or(0.0, |v| v.residual(&p)),
                        in_col: h.as_ref().map_or(0.0, |h| h.residual(&p)),
                        quad_circularity,
                        meet_residual,
                        six_circles: None,
                    };
                    if cert.on_quadric > 1e-6 {
                        return Err(GeomError::NotOnQuadric { residual: cert.on_quadric });
                    }
                    self.cells[i * self.cols + j] = Some(p.clone());
                    cert.six_circles = self.six_circles(i, j);
                    self.cells[i * self.cols + j] = None;
                    self.corners.push(cert);
                    p
                }
                1 => {
                    let k0 = known.first().ok_or(GeomError::NonGeneric("constraint line has no known point".into()))?;
                    let x = projlin::second_intersection(&s, k0, &m)?;
                    if x.tangent || x.transversality < MIN_TRANSVERSALITY {
                        return Err(GeomError::NonGeneric("near-tangent constraint line".into()));
                    }
                    self.min_transversality = self.min_transversality.min(x.transversality);
                    if known.iter().any(|q| q.distance(&x.point) < 1e-6) {
                        return Err(GeomError::NonGeneric("second intersection repeats a vertex".into()));
                    }
                    x.point
                }
                _ => {
                    let mut found = None;
                    for _ in 0..MAX_RETRIES {
                        let p = match sample::point_on_quadric(&m, &s, known.first(), rng) {
                            Ok(p) => p,
                            Err(GeomError::NonGeneric(_)) => continue,
                            Err(e) => return Err(e),
                        };
                        if self.euclidean_ok(i, j, &p) {
                            found = Some(p);
                            break;
                        }
                    }
                    found.ok_or(GeomError::NonGeneric("no admissible point on the constraint".into()))?
                }
            }
        };
        if !self.euclidean_ok(i, j, &point) {
            return Err(GeomError::NonGeneric("vertex too far or too close to a neighbour".into()));
        }
        self.cells[i * self.cols + j] = Some(point);
        if i > 0 && j > 0 && !self.quad_generic(i - 1, j - 1) {
            return Err(GeomError::NonGeneric("degenerate quad".into()));
        }
        Ok(())
    }

    fn free_point(&self, i: usize, j: usize, rng: &mut Rng) -> Result<HPoint> {
        for _ in 0..MAX_RETRIES {
            let x = sample::gaussian_vector(self.space.n(), rng);
            let p = self.space.lift_point(&x)?;
            if self.euclidean_ok(i, j, &p) {
                return Ok(p);
            }
        }
        Err(GeomError::NonGeneric("no admissible free vertex".into()))
    }

    /// Placed points lying in `s`, nearest neighbours first, then `N`.
    fn known_points(&self, i: usize, j: usize, s: &Subspace) -> Vec<&HPoint> {
        let mut cand: Vec<&HPoint> = Vec::new();
        for (a, b) in [(i.wrapping_sub(1), j), (i, j.wrapping_sub(1))] {
            cand.extend(self.get(a, b));
        }
        cand.extend(self.row_points(i));
        cand.extend(self.col_points(j));
        let mut out: Vec<&HPoint> = Vec::new();
        for p in cand {
            if s.residual(p) < projlin::INCIDENCE_TOL && !out.iter().any(|q| q.distance(p) < 1e-12) {
                out.push(p);
            }
        }
        out
    }

    fn fill(&mut self, order: &[(usize, usize)], rng: &mut Rng) -> Result<()> {
        for &(i, j) in order {
            self.place(i, j, rng).map_err(|e| e.at(i, j))?;
        }
        Ok(())
    }

    fn finish(self, attempts: usize) -> Result<(CircularNet, ConstructionReport)> {
        let verts: Vec<HPoint> = self.cells.into_iter().map(|c| c.expect("filled")).collect();
        let lift = QNet::new(self.rows, self.cols, verts)?;
        let net = CircularNet::from_lift(self.space, lift)?.with_constraints(self.pair);
        let (row_span_excess, col_span_excess) = span_excess(&net, self.pair)?;
        let report = ConstructionReport {
            pair: self.pair.name(),
            rows: self.rows,
            cols: self.cols,
            attempts,
            corners: self.corners,
            min_transversality: self.min_transversality,
            circularity: net.circularity_residual(),
            on_quadric: net.on_quadric_residual(),
            row_span_excess,
            col_span_excess,
        };
        Ok((net, report))
    }
}

/// Largest span excess over all complete rows and columns.
pub fn span_excess(net: &CircularNet, pair: ConstraintPair) -> Result<(f64, f64)> {
    let mut r = 0.0f64;
    for i in 0..net.rows() {
        r = r.max(span_gaps(net.space(), pair.rows, &net.lift().v_points(i))?.0);
    }
    let mut c = 0.0f64;
    for j in 0..net.cols() {
        c = c.max(span_gaps(net.space(), pair.cols, &net.lift().h_points(j))?.0);
    }
    Ok((r, c))
}

/// Cells added when a `r0 × c0` grid grows to `rows × cols`: alternately a
/// column (top to bottom) and a row (left to right).
pub fn growth_order(r0: usize, c0: usize, rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut r, mut c) = (r0, c0);
    while r < rows || c < cols {
        if c < cols {
            out.extend((0..r).map(|i| (i, c)));
            c += 1;
        }
        if r < rows {
            out.extend((0..c).map(|j| (r, j)));
            r += 1;
        }
    }
    out
}

fn fill_order(pair: ConstraintPair, rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let (r0, c0) = match pair.theorem_grid() {
        Some((a, b)) => (a.min(rows), b.min(cols)),
        None => (rows, cols),
    };
    let mut order: Vec<(usize, usize)> = (0..r0).flat_map(|i| (0..c0).map(move |j| (i, j))).collect();
    order.extend(growth_order(r0, c0, rows, cols));
    order
}

fn retryable(e: &GeomError) -> bool {
    matches!(
        e.root(),
        GeomError::NonGeneric(_)
            | GeomError::EmptyMeet
            | GeomError::IsotropicLine
            | GeomError::DegenerateQuad { .. }
            | GeomError::NotOnQuadric { .. }
            | GeomError::NotOnLine { .. }
    )
}

/// Random circular net on a `rows × cols` grid with the given parameter
/// line constraints. The theorem grid of the pair is filled first, then
/// the net grows by alternating columns and rows; vertices forced by the
/// incidence theorems are certified.
pub fn construct(
    space: &MoebiusSpace,
    pair: ConstraintPair,
    rows: usize,
    cols: usize,
    rng: &mut Rng,
) -> Result<(CircularNet, ConstructionReport)> {
    pair.check_ambient(space.n())?;
    if rows < 2 || cols < 2 {
        return Err(GeomError::GridTooSmall(format!("need at least 2 x 2, got {rows} x {cols}")));
    }
    let order = fill_order(pair, rows, cols);
    let mut last = GeomError::NonGeneric("no attempt".into());
    for attempt in 1..=MAX_RETRIES {
        let mut b = Builder::new(space, pair, rows, cols);
        match b.fill(&order, rng) {
            Ok(()) => return b.finish(attempt),
            Err(e) if retryable(&e) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Random seed on the theorem grid of the pair.
pub fn random_seed(space: &MoebiusSpace, pair: ConstraintPair, rng: &mut Rng) -> Result<CircularNet> {
    let (r, c) = pair.theorem_grid().ok_or(GeomError::Invalid("free pairs have no theorem grid".into()))?;
    Ok(construct(space, pair, r, c, rng)?.0)
}

/// Checks that all quads are circular and all complete parameter lines
/// have their constrained dimension; `skip` excludes one vertex.
fn check_hypotheses(net: &CircularNet, pair: ConstraintPair, skip: Option<(usize, usize)>) -> Result<()> {
    let lift = net.lift();
    for i in 0..net.rows() - 1 {
        for j in 0..net.cols() - 1 {
            if skip.is_some_and(|(a, b)| a == i + 1 && b == j + 1) {
                continue;
            }
            let r = lifted_circularity(&lift.quad(i, j));
            if r > 1e-8 {
                return Err(GeomError::Hypothesis(format!("quad ({i}, {j}) not circular (residual {r:e})")));
            }
        }
    }
    for i in 0..net.rows() {
        let pts: Vec<&HPoint> = (0..net.cols()).filter(|&j| skip != Some((i, j))).map(|j| lift.at(i, j)).collect();
        let (excess, _) = span_gaps(net.space(), pair.rows, &pts)?;
        if excess > SPAN_TOL {
            return Err(GeomError::Hypothesis(format!("row {i} is not {} (excess {excess:e})", pair.rows.name())));
        }
    }
    for j in 0..net.cols() {
        let pts: Vec<&HPoint> = (0..net.rows()).filter(|&i| skip != Some((i, j))).map(|i| lift.at(i, j)).collect();
        let (excess, _) = span_gaps(net.space(), pair.cols, &pts)?;
        if excess > SPAN_TOL {
            return Err(GeomError::Hypothesis(format!("column {j} is not {} (excess {excess:e})", pair.cols.name())));
        }
    }
    Ok(())
}

/// Completes a theorem-shaped fragment: the last vertex of `patch` is
/// ignored and recomputed as the meet of the last quad plane with the last
/// row and column constraint subspaces. Returns the completed net and the
/// certificate of the new vertex.
pub fn extend_circular_constrained(
    patch: &CircularNet,
    pair: ConstraintPair,
) -> Result<(CircularNet, CornerCertificate)> {
    let (r, c) = pair.theorem_grid().ok_or(GeomError::Invalid("free pairs have no theorem".into()))?;
    if (patch.rows(), patch.cols()) != (r, c) {
        return Err(GeomError::GridTooSmall(format!(
            "{} needs a {r} x {c} fragment, got {} x {}",
            pair.name(),
            patch.rows(),
            patch.cols()
        )));
    }
    pair.check_ambient(patch.n())?;
    check_hypotheses(patch, pair, Some((r - 1, c - 1)))?;
    let space = patch.space().clone();
    let mut b = Builder::seeded(&space, pair, r, c, patch.lift());
    b.cells[r * c - 1] = None;
    let mut rng = sample::rng(0);
    b.place(r - 1, c - 1, &mut rng).map_err(|e| e.at(r - 1, c - 1))?;
    let cert = b
        .corners
        .last()
        .cloned()
        .ok_or(GeomError::NonGeneric("corner meet is not a point".into()).at(r - 1, c - 1))?;
    let (net, _) = b.finish(1)?;
    Ok((net, cert))
}

/// Grows a valid seed by `steps` columns and rows.
pub fn grow_net(
    seed: &CircularNet,
    pair: ConstraintPair,
    steps: usize,
    rng: &mut Rng,
) -> Result<(CircularNet, ConstructionReport)> {
    pair.check_ambient(seed.n())?;
    check_hypotheses(seed, pair, None)?;
    let space = seed.space().clone();
    let (rows, cols) = (seed.rows() + steps, seed.cols() + steps);
    let order = growth_order(seed.rows(), seed.cols(), rows, cols);
    let mut last = GeomError::NonGeneric("no attempt".into());
    for attempt in 1..=MAX_RETRIES {
        let mut b = Builder::seeded(&space, pair, rows, cols, seed.lift());
        match b.fill(&order, rng) {
            Ok(()) => {
                let (mut net, report) = b.finish(attempt)?;
                // keep the seed's Euclidean coordinates verbatim
                for i in 0..seed.rows() {
                    for j in 0..seed.cols() {
                        net.points[i * cols + j] = seed.point(i, j).clone();
                    }
                }
                return Ok((net, report));
            }
            Err(e) if retryable(&e) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

// ---------------------------------------------------------------------------
// envelope structure

/// One verified statement with its residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Relative gap of a least-squares fit (second smallest singular value).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
}

impl Claim {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Claim { name: name.into(), residual, threshold, pass: residual < threshold, note: None, gap: None }
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap = Some(gap);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Output of [`verify_envelope`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub pair: String,
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub claims: Vec<Claim>,
}

impl EnvelopeReport {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }
}

/// Which family of parameter lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    /// `V_i = {P(i, j)}_j`.
    Rows,
    /// `H_j = {P(i, j)}_i`.
    Cols,
}

impl Family {
    fn label(self) -> &'static str {
        match self {
            Family::Rows => "row",
            Family::Cols => "column",
        }
    }
}

fn family_kind(pair: ConstraintPair, fam: Family) -> LineKind {
    match fam {
        Family::Rows => pair.rows,
        Family::Cols => pair.cols,
    }
}

fn family_len(net: &CircularNet, fam: Family) -> usize {
    match fam {
        Family::Rows => net.rows(),
        Family::Cols => net.cols(),
    }
}

fn family_points(net: &CircularNet, fam: Family, k: usize) -> Vec<&HPoint> {
    match fam {
        Family::Rows => net.lift().v_points(k),
        Family::Cols => net.lift().h_points(k),
    }
}

fn family_euclid(net: &CircularNet, fam: Family, k: usize) -> Vec<DVector<f64>> {
    match fam {
        Family::Rows => (0..net.cols()).map(|j| net.point(k, j).clone()).collect(),
        Family::Cols => (0..net.rows()).map(|i| net.point(i, k).clone()).collect(),
    }
}

/// Constraint subspaces of a family.
pub fn family_spans(net: &CircularNet, pair: ConstraintPair, fam: Family) -> Result<Vec<Subspace>> {
    let kind = family_kind(pair, fam);
    (0..family_len(net, fam)).map(|k| constraint_span(net.space(), kind, &family_points(net, fam, k))).collect()
}

/// Hyperspheres (or hyperplanes) of a family whose constraint subspaces
/// are hyperplanes of the lift.
pub fn family_spheres(net: &CircularNet, pair: ConstraintPair, fam: Family) -> Result<Vec<SphereRep>> {
    family_spans(net, pair, fam)?.iter().map(|s| net.space().hypersphere(s)).collect()
}

fn require(net: &CircularNet, fam: Family, need: usize, what: &str) -> Result<()> {
    let have = family_len(net, fam);
    if have < need {
        return Err(GeomError::GridTooSmall(format!("{what} needs at least {need} {}s, got {have}", fam.label())));
    }
    Ok(())
}

fn affine(c: &DVector<f64>) -> HPoint {
    let mut x = DVector::zeros(c.len() + 1);
    x.rows_mut(0, c.len()).copy_from(c);
    x[c.len()] = 1.0;
    HPoint::new(x).expect("nonzero")
}

/// Number of points that over-determine a quadric of `RP^k`.
fn fit_count(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// The form `diag(1, ..., 1, 0)` of size `k + 1`: the dual of the absolute
/// quadric at infinity.
pub fn absolute_dual(k: usize) -> DMatrix<f64> {
    let mut a = DMatrix::identity(k + 1, k + 1);
    a[(k, k)] = 0.0;
    a
}

/// Relative smallest singular value of stacked homogeneous points: zero
/// when they lie in a hyperplane of their ambient space.
fn hyperplane_residual(points: &[HPoint]) -> Result<f64> {
    let refs: Vec<&HPoint> = points.iter().collect();
    let s = projlin::singular_values(&projlin::stack_points(&refs)?);
    Ok(s[s.len() - 1] / s[0])
}

/// Relative second smallest singular value: zero when the points lie on a
/// codimension-two subspace.
fn codim2_residual(points: &[HPoint]) -> Result<f64> {
    let refs: Vec<&HPoint> = points.iter().collect();
    let s = projlin::singular_values(&projlin::stack_points(&refs)?);
    Ok(s[s.len() - 2] / s[0])
}

fn unit_dir(v: &DVector<f64>) -> DVector<f64> {
    v / v.norm()
}

/// Sine of the angle between two lines with the given directions.
fn direction_sine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let a = unit_dir(a);
    let b = unit_dir(b);
    let c = a.dot(&b).abs().min(1.0);
    (1.0 - c * c).max(0.0).sqrt()
}

/// Principal direction of a set of Euclidean points.
fn line_direction(points: &[DVector<f64>]) -> DVector<f64> {
    let n = points[0].len();
    let mean = points.iter().fold(DVector::zeros(n), |a, p| a + p) / points.len() as f64;
    let mut m = DMatrix::zeros(n, points.len());
    for (k, p) in points.iter().enumerate() {
        m.set_column(k, &(p - &mean));
    }
    let (u, _) = projlin::svd_left(&m);
    u.column(0).into_owned()
}

fn parity_parallel(dirs: &[DVector<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..dirs.len().saturating_sub(2) {
        worst = worst.max(direction_sine(&dirs[k], &dirs[k + 2]));
    }
    worst
}

fn fit_claim(name: &str, pts: &[HPoint]) -> Result<(Claim, projlin::QuadricFit)> {
    let refs: Vec<&HPoint> = pts.iter().collect();
    let fit = projlin::fit_quadric(&refs, &[])?;
    let claim = Claim::new(name, fit.residual, FIT_TOL).with_note(format!("gap {:.3e}", fit.gap)).with_gap(fit.gap);
    Ok((claim, fit))
}

fn sphere_note(label: &str, s: &SphereRep) -> String {
    match (s.kind, s.radius2) {
        (SphereKind::Imaginary, Some(r2)) => format!("{label} imaginary (radius^2 {r2:.6e})"),
        (SphereKind::Sphere, Some(r2)) => format!("{label} real (radius^2 {r2:.6e})"),
        (SphereKind::Plane, _) => format!("{label} is a plane"),
        (SphereKind::Point, _) => format!("{label} is a point sphere"),
        _ => label.to_string(),
    }
}

/// Claims for two families of hypersphere parameter lines (circles in
/// `R^2`, 2-spheres in `R^3`).
fn sphere_family_claims(net: &CircularNet, pair: ConstraintPair, claims: &mut Vec<Claim>) -> Result<()> {
    let n = net.n();
    let space = net.space();
    let need = fit_count(n);
    require(net, Family::Rows, need, "centre quadric fit")?;
    require(net, Family::Cols, need, "centre quadric fit")?;

    let mut centres = Vec::new();
    for fam in [Family::Rows, Family::Cols] {
        let reps = family_spheres(net, pair, fam)?;
        let c = reps
            .iter()
            .map(|r| r.center.clone().ok_or(GeomError::NonGeneric("parameter sphere is a plane".into())))
            .collect::<Result<Vec<_>>>()?;
        centres.push(c);
    }
    // a similarity preserves confocality and conditions the fits
    let all: Vec<&DVector<f64>> = centres.iter().flatten().collect();
    let mean = all.iter().fold(DVector::zeros(n), |a, c| a + *c) / all.len() as f64;
    let rms = (all.iter().map(|c| (*c - &mean).norm_squared()).sum::<f64>() / all.len() as f64).sqrt();
    let scale = if rms > 0.0 { rms } else { 1.0 };
    let mut fits = Vec::new();
    let mut spans = Vec::new();
    for (fam, c) in [Family::Rows, Family::Cols].into_iter().zip(&centres) {
        let pts: Vec<HPoint> = c.iter().map(|x| affine(&((x - &mean) / scale))).collect();
        let (claim, fit) = fit_claim(&format!("{} centres on a quadric", fam.label()), &pts)?;
        claims.push(claim);
        fits.push(fit);
        spans.push(family_spans(net, pair, fam)?);
    }

    let inv = |f: &projlin::QuadricFit| projlin::dual_form(f.quadric.form());
    let (dv, dh) = (inv(&fits[0])?, inv(&fits[1])?);
    let abs = absolute_dual(n);
    claims.push(Claim::new("centre quadrics confocal", projlin::span_residual(&dv, &[&dh, &abs]), FIT_TOL));

    let mut apexes = Vec::new();
    for (fam, s, label) in [(Family::Rows, &spans[0], "Y"), (Family::Cols, &spans[1], "X")] {
        let refs: Vec<&Subspace> = s.iter().collect();
        let (meet, residual) = projlin::meet_dim(&refs, 0)?;
        let apex = meet.as_point().expect("point meet");
        let sphere = space.classify(apex.coords());
        claims.push(
            Claim::new(format!("{} hyperplanes meet in a point {label}", fam.label()), residual, INCIDENCE_TOL)
                .with_note(sphere_note(&format!("orthogonal sphere {label}^perp"), &sphere)),
        );
        apexes.push(apex);
    }
    let (y, x) = (&apexes[0], &apexes[1]);
    let x_s = space.classify(x.coords());
    let y_s = space.classify(y.coords());
    let both_imaginary = x_s.kind == SphereKind::Imaginary && y_s.kind == SphereKind::Imaginary;
    claims.push(Claim::new("orthogonal spheres X^perp and Y^perp orthogonal", space.phi_unit(x.coords(), y.coords()), INCIDENCE_TOL));
    claims.push(Claim::new("X^perp and Y^perp not both imaginary", if both_imaginary { 1.0 } else { 0.0 }, 0.5));

    let mut cones = Vec::new();
    for (fam, s, apex) in [(Family::Rows, &spans[0], y), (Family::Cols, &spans[1], x)] {
        let refs: Vec<&Subspace> = s.iter().collect();
        let cone = cyclide::fit_generation_cone(space, apex, &refs)?;
        let real = cone.contacts.iter().filter(|c| c.real).count();
        claims.push(
            Claim::new(format!("{} hyperplanes tangent to one cone", fam.label()), cone.residual, FIT_TOL)
                .with_note(format!("gap {:.3e}", cone.gap)),
        );
        let contact = cone.contacts.iter().map(|c| c.in_hyperplane.max(c.on_cone)).fold(0.0, f64::max);
        claims.push(
            Claim::new(format!("{} spheres touch the cyclide twice", fam.label()), contact, FIT_TOL)
                .with_note(format!("{real} real, {} imaginary contact pairs", cone.contacts.len() - real)),
        );
        cones.push(cone);
    }
    let j = space.form();
    claims.push(Claim::new(
        "both generations envelop the same cyclide",
        projlin::span_residual(&cones[1].form, &[&j, &cones[0].form]),
        FIT_TOL,
    ));
    Ok(())
}

/// Forms vanishing on all lifted vertices: for a net on a 2-dimensional
/// cyclide of `R^3` the solution space is spanned by `M` and the cyclide.
fn contained_cyclide_claim(net: &CircularNet) -> Result<Claim> {
    let d = net.n() + 2;
    let pts: Vec<&HPoint> = net.lift().vertices().iter().collect();
    if pts.len() < fit_count(d - 1) {
        return Err(GeomError::GridTooSmall(format!("cyclide fit needs {} vertices", fit_count(d - 1))));
    }
    let m = projlin::quadric_constraint_matrix(&pts, &[], d)?;
    let (_, asc) = projlin::smallest_right_vectors(&m, 2);
    Ok(Claim::new("vertices on a Darboux cyclide", asc[1], FIT_TOL).with_note(format!("gap {:.3e}", asc[2])))
}

/// Verifies the envelope and cyclide structure of a net grown for `pair`.
pub fn verify_envelope(net: &CircularNet, pair: ConstraintPair) -> Result<EnvelopeReport> {
    let n = net.n();
    let space = net.space();
    check_hypotheses(net, pair, None)?;
    let mut claims = Vec::new();
    let c = LineKind::CIRCULAR;
    let l = LineKind::LINEAR;
    let s = LineKind::Spherical(2);
    let p = LineKind::Planar(2);
    let key = (pair.rows, pair.cols, n);
    match key {
        (r, k, 2) if r == c && k == c => sphere_family_claims(net, pair, &mut claims)?,
        (r, k, 3) if r == s && k == s => sphere_family_claims(net, pair, &mut claims)?,
        (r, k, 3) if r == c && k == c => claims.push(contained_cyclide_claim(net)?),
        (r, k, 2) if r == l && k == l => {
            for fam in [Family::Rows, Family::Cols] {
                require(net, fam, 3, "parallelism")?;
                let dirs: Vec<DVector<f64>> =
                    (0..family_len(net, fam)).map(|k| line_direction(&family_euclid(net, fam, k))).collect();
                claims.push(Claim::new(format!("{} lines parallel by parity", fam.label()), parity_parallel(&dirs), INCIDENCE_TOL));
            }
        }
        (r, k, 2) if r == l && k == c => {
            require(net, Family::Rows, fit_count(2), "tangent conic fit")?;
            require(net, Family::Cols, 3, "collinearity")?;
            let lines: Vec<HPoint> = family_spheres(net, pair, Family::Rows)?
                .iter()
                .map(|rep| line_coordinates(rep))
                .collect::<Result<_>>()?;
            claims.push(fit_claim("row lines tangent to a conic", &lines)?.0);
            let centres = sphere_centres(net, pair, Family::Cols)?;
            claims.push(Claim::new("column circle centres collinear", hyperplane_residual(&centres)?, INCIDENCE_TOL));
        }
        (r, k, 3) if r == l && k == s => {
            require(net, Family::Cols, 3, "collinearity")?;
            let centres = sphere_centres(net, pair, Family::Cols)?;
            claims.push(Claim::new("column sphere centres collinear", codim2_residual(&centres)?, INCIDENCE_TOL));
        }
        (r, k, 3) if r == p && k == s => {
            require(net, Family::Cols, 4, "coplanarity")?;
            let centres = sphere_centres(net, pair, Family::Cols)?;
            claims.push(Claim::new("column sphere centres coplanar", hyperplane_residual(&centres)?, INCIDENCE_TOL));
        }
        (r, k, 3) if r == c && k == s => {
            require(net, Family::Cols, 4, "meet of column spaces")?;
            let spans = family_spans(net, pair, Family::Cols)?;
            let refs: Vec<&Subspace> = spans.iter().collect();
            let spec = projlin::meet_spectrum(&refs)?;
            claims.push(
                Claim::new("column spaces share a line", spec[1], INCIDENCE_TOL).with_note(format!("gap {:.3e}", spec[2])),
            );
        }
        (r, k, 3) if r == c && k == p => {
            require(net, Family::Cols, fit_count(2), "tangent cone fit")?;
            let planes = family_spheres(net, pair, Family::Cols)?;
            let coords: Vec<HPoint> = planes.iter().map(plane_coordinates).collect::<Result<_>>()?;
            claims.push(Claim::new("column planes concurrent", hyperplane_residual(&coords)?, INCIDENCE_TOL));
            let normals: Vec<HPoint> = planes.iter().map(|rep| HPoint::new(rep.normal.clone().unwrap())).collect::<Result<_>>()?;
            claims.push(fit_claim("column planes tangent to a quadratic cone", &normals)?.0);
        }
        (r, k, 3) if r == l && k == p => {
            require(net, Family::Cols, 3, "parallelism")?;
            require(net, Family::Rows, fit_count(2), "conic at infinity fit")?;
            let normals: Vec<DVector<f64>> =
                family_spheres(net, pair, Family::Cols)?.iter().map(|rep| rep.normal.clone().unwrap()).collect();
            claims.push(Claim::new("column planes parallel by parity", parity_parallel(&normals), INCIDENCE_TOL));
            let dirs: Vec<HPoint> = (0..net.rows())
                .map(|i| HPoint::new(line_direction(&family_euclid(net, Family::Rows, i))))
                .collect::<Result<_>>()?;
            claims.push(fit_claim("row lines meet a conic at infinity", &dirs)?.0);
        }
        (r, k, 3) if r == p && k == p => {
            for fam in [Family::Rows, Family::Cols] {
                require(net, fam, fit_count(2), "conic at infinity fit")?;
                let normals: Vec<HPoint> = family_spheres(net, pair, fam)?
                    .iter()
                    .map(|rep| HPoint::new(rep.normal.clone().unwrap()))
                    .collect::<Result<_>>()?;
                claims.push(fit_claim(&format!("{} planes tangent to a conic at infinity", fam.label()), &normals)?.0);
            }
        }
        _ => {
            return Err(GeomError::Invalid(format!("no envelope statement for {} in R^{n}", pair.name())));
        }
    }
    let _ = space;
    Ok(EnvelopeReport { pair: pair.name(), n, rows: net.rows(), cols: net.cols(), claims })
}

fn sphere_centres(net: &CircularNet, pair: ConstraintPair, fam: Family) -> Result<Vec<HPoint>> {
    family_spheres(net, pair, fam)?
        .iter()
        .map(|r| r.center.as_ref().map(affine).ok_or(GeomError::NonGeneric("parameter sphere is a plane".into())))
        .collect()
}

/// Homogeneous coordinates `(v, -d)` of a hyperplane `<P, v> = d`.
fn plane_coordinates(rep: &SphereRep) -> Result<HPoint> {
    match (&rep.normal, rep.offset) {
        (Some(v), Some(d)) => {
            let mut x = DVector::zeros(v.len() + 1);
            x.rows_mut(0, v.len()).copy_from(v);
            x[v.len()] = -d;
            HPoint::new(x)
        }
        _ => Err(GeomError::NonGeneric("parameter line is not planar".into())),
    }
}

fn line_coordinates(rep: &SphereRep) -> Result<HPoint> {
    plane_coordinates(rep)
}

// ---------------------------------------------------------------------------
// spherical parameter lines

/// Output of [`spherical_line_analysis`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphericalLineReport {
    pub kind: String,
    pub m: usize,
    /// Spread of `L_A^{m+1}` of the lift over `i`.
    pub goursat_spread: f64,
    pub goursat: bool,
    /// Spread of `L_B^{m+1}` of the lift over `i`.
    pub laplace_spread: f64,
    pub laplace: bool,
    /// Per column `j`, the largest distance of `L_B^{m+1}(j)` to the spans
    /// `S_{i,j} = span(M(i, j..=j+m+1))`: the polar hypersphere is
    /// orthogonal to all the `m`-spheres `S_{i,j} ∩ M^n`.
    pub orthogonality: Vec<f64>,
    /// Per column `j`, the orthogonal hypersphere.
    pub orthogonal_spheres: Vec<SphereRep>,
    /// Planar case: largest `|x_0| / |x|` of `L_B^{m+1}` (points at
    /// infinity).
    pub at_infinity: Option<f64>,
}

impl SphericalLineReport {
    pub fn max_orthogonality(&self) -> f64 {
        self.orthogonality.iter().copied().fold(0.0, f64::max)
    }
}

/// Laplace structure of a circular net whose columns `H_j = {M(i, j)}_i`
/// are `m`-spherical or `m`-planar.
pub fn spherical_line_analysis(net: &CircularNet, kind: LineKind) -> Result<SphericalLineReport> {
    let m = kind.order().ok_or(GeomError::Invalid("columns must be constrained".into()))?;
    let space = net.space();
    check_hypotheses(net, ConstraintPair::new(LineKind::Free, kind), None)?;
    if m + 1 >= net.n() + 1 {
        return Err(GeomError::Invalid(format!("{} columns need n > {m}", kind.name())));
    }
    let need = m + 4;
    if net.rows() < need || net.cols() < need {
        return Err(GeomError::GridTooSmall(format!("spherical line analysis needs {need} x {need}")));
    }
    let la = qnet::laplace_power(net.lift(), Direction::A, m + 1)?;
    let lb = qnet::laplace_power(net.lift(), Direction::B, m + 1)?;
    let goursat_spread = qnet::spread_over_i(&la);
    let laplace_spread = qnet::spread_over_i(&lb);
    let mut orthogonality = Vec::new();
    let mut orthogonal_spheres = Vec::new();
    for j in 0..lb.cols() {
        let x = lb.at(0, j);
        let mut worst = 0.0f64;
        for i in 0..net.rows() {
            if j + m + 1 >= net.cols() {
                break;
            }
            let pts: Vec<&HPoint> = (j..=j + m + 1).map(|jj| net.lift().at(i, jj)).collect();
            let (s, _) = Subspace::from_points_dim(&pts, m + 1)?;
            worst = worst.max(s.residual(x));
        }
        orthogonality.push(worst);
        orthogonal_spheres.push(space.classify(x.coords()));
    }
    let at_infinity = if kind.through_infinity() {
        Some(
            lb.vertices()
                .iter()
                .map(|p| {
                    let (_, x0, _) = space.parts(p.coords());
                    x0.abs() / p.coords().norm()
                })
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    Ok(SphericalLineReport {
        kind: kind.name(),
        m,
        goursat_spread,
        goursat: goursat_spread < qnet::DEGENERACY_TOL,
        laplace_spread,
        laplace: laplace_spread < qnet::DEGENERACY_TOL,
        orthogonality,
        orthogonal_spheres,
        at_infinity,
    })
}
