//! Lie sphere geometry of oriented hyperspheres in `R^n`.
//!
//! Coordinates on `R^{n+1,2}`: the first `n + 2` agree with the Möbius
//! coordinates of [`MoebiusSpace`], the last one is the `e_{n+3}` component,
//! so the Lie form is `diag(1, …, 1, -1, -1)`. Oriented spheres, oriented
//! planes and points lift to the Lie quadric `L^{n+1}`; a contact element is
//! an isotropic line, and a principal contact element net is a discrete
//! congruence of isotropic lines.
//!
//! Lifts, contact elements and [`extend_to_pce`] work in any dimension. The
//! checks on spherical parameter lines ([`spherical_line_check`],
//! [`family_spherical_check`], [`two_family_check`]) are stated for `n = 3`
//! and reject other dimensions.
//!
//! The parameter line `{l(i, j)}_i` with fixed `j` is a column, as for
//! [`CircularNet`].

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::inscribed;
use crate::moebius::{self, CircularNet, CircularNetJson, ConstraintPair, Family, LineKind, MoebiusSpace, Projected, SphereRep};
use crate::projlin::{self, HPoint, Quadric, Signature, Subspace};
use crate::qnet::{self, DegeneracyReport, Direction, LineCongruence, QNet};
use crate::sample::{self, Rng, MAX_RETRIES};

/// Largest restricted-form entry of an isotropic line.
pub const ISOTROPY_TOL: f64 = 1e-10;
/// Path independence of the plane propagation in [`extend_to_pce`].
pub const PATH_TOL: f64 = 1e-8;
/// Spread of intersection angles along a spherical parameter line (radians).
pub const ANGLE_TOL: f64 = 1e-7;
/// Distance between a line and its image under composed central projections.
pub const MAP_TOL: f64 = 1e-7;
/// Conjugacy of the two planes of pole points.
pub const CONJUGATE_TOL: f64 = 1e-7;
/// Oriented-contact threshold.
pub const CONTACT_TOL: f64 = 1e-8;

const DIM_TOL: f64 = moebius::DIM_TOL;
const KIND_TOL: f64 = 1e-10;
const LIFT_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// the Lie quadric

/// The space `RP^{n+2}` with the Lie form of signature `(n+1, 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieSpace {
    moebius: MoebiusSpace,
}

/// An oriented plane `<v, x> = d` with unit normal `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedPlane {
    pub v: Vec<f64>,
    pub d: f64,
}

impl OrientedPlane {
    /// Scales `(v, d)` so that the normal has unit length.
    pub fn new(v: &DVector<f64>, d: f64) -> Result<Self> {
        let nv = v.norm();
        if nv < 1e-14 {
            return Err(GeomError::ZeroVector);
        }
        Ok(OrientedPlane { v: (v / nv).iter().copied().collect(), d: d / nv })
    }

    /// The oriented plane through `p` with normal `v`.
    pub fn through(p: &DVector<f64>, v: &DVector<f64>) -> Result<Self> {
        let nv = v.norm();
        if nv < 1e-14 {
            return Err(GeomError::ZeroVector);
        }
        let u = v / nv;
        let d = u.dot(p);
        Ok(OrientedPlane { v: u.iter().copied().collect(), d })
    }

    pub fn normal(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.v)
    }

    /// `|<v, p> - d|`.
    pub fn residual(&self, p: &DVector<f64>) -> f64 {
        (self.normal().dot(p) - self.d).abs()
    }

    /// Image under the reflection in the perpendicular bisector of `a b`.
    pub fn reflect(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<Self> {
        let w = b - a;
        let len = w.norm();
        if len < 1e-12 * (1.0 + a.norm()) {
            return Err(GeomError::NonGeneric("coincident neighbours have no perpendicular bisector".into()));
        }
        let u = w / len;
        let v = self.normal();
        let v2 = &v - &u * (2.0 * v.dot(&u));
        let mid = (a + b) * 0.5;
        // foot of a on the plane, reflected in the bisector
        let q = a + &v * (self.d - v.dot(a));
        let q2 = &q - &u * (2.0 * (&q - &mid).dot(&u));
        Ok(OrientedPlane { d: v2.dot(&q2), v: v2.iter().copied().collect() })
    }

    fn distance(&self, other: &OrientedPlane) -> f64 {
        (self.normal() - other.normal()).norm() + (self.d - other.d).abs()
    }
}

/// An object of Lie sphere geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum LieObject {
    /// Oriented sphere with centre and signed radius.
    Sphere { center: DVector<f64>, radius: f64 },
    Plane(OrientedPlane),
    Point(DVector<f64>),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LieKind {
    Sphere,
    Plane,
    Point,
    Infinity,
}

/// A point of the Lie quadric with its Euclidean data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrientedSphereRep {
    pub kind: LieKind,
    /// Representative with `e_0`-component 1 (spheres, points), `e_{n+3}`
    /// component 1 (planes), or `e_inf`.
    #[serde(serialize_with = "crate::ser::vec")]
    pub vector: DVector<f64>,
    #[serde(serialize_with = "crate::ser::opt_vec")]
    pub center: Option<DVector<f64>>,
    /// Signed radius.
    pub radius: Option<f64>,
    #[serde(serialize_with = "crate::ser::opt_vec")]
    pub normal: Option<DVector<f64>>,
    pub offset: Option<f64>,
}

/// Outcome of [`LieSpace::oriented_contact`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactTest {
    pub contact: bool,
    /// `|<a, b>| / (|a| |b|)`.
    pub residual: f64,
}

impl LieSpace {
    pub fn new(n: usize) -> Result<Self> {
        Ok(LieSpace { moebius: MoebiusSpace::new(n)? })
    }

    pub fn n(&self) -> usize {
        self.moebius.n()
    }

    /// Length of coordinate vectors, `n + 3`.
    pub fn dim(&self) -> usize {
        self.n() + 3
    }

    pub fn moebius(&self) -> &MoebiusSpace {
        &self.moebius
    }

    pub fn form(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut f = DMatrix::identity(d, d);
        f[(d - 2, d - 2)] = -1.0;
        f[(d - 1, d - 1)] = -1.0;
        f
    }

    pub fn quadric(&self) -> Quadric {
        Quadric::new(self.form()).expect("nonzero form")
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let d = self.dim();
        x.rows(0, d - 2).dot(&y.rows(0, d - 2)) - x[d - 2] * y[d - 2] - x[d - 1] * y[d - 1]
    }

    /// `|<x, y>| / (|x| |y|)`.
    pub fn inner_unit(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.inner(x, y).abs() / (x.norm() * y.norm())
    }

    /// Möbius vector with a zero `e_{n+3}` component appended.
    pub fn embed(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        out.rows_mut(0, self.dim() - 1).copy_from(x);
        out
    }

    fn from_parts(&self, v: &DVector<f64>, x0: f64, xinf: f64, s: f64) -> DVector<f64> {
        let mut out = self.embed(&self.moebius.from_parts(v, x0, xinf));
        out[self.dim() - 1] = s;
        out
    }

    /// `(v, e_0 coefficient, e_inf coefficient, e_{n+3} coefficient)`.
    fn parts(&self, x: &DVector<f64>) -> (DVector<f64>, f64, f64, f64) {
        let d = self.dim();
        let (v, x0, xinf) = self.moebius.parts(&x.rows(0, d - 1).into_owned());
        (v, x0, xinf, x[d - 1])
    }

    pub fn e0(&self) -> DVector<f64> {
        self.embed(&self.moebius.e0())
    }

    pub fn e_inf(&self) -> DVector<f64> {
        self.embed(&self.moebius.e_inf())
    }

    /// `e_{n+3}`, the pole of the point complex.
    pub fn e_point(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        e[self.dim() - 1] = 1.0;
        e
    }

    pub fn sphere(&self, center: &DVector<f64>, radius: f64) -> DVector<f64> {
        self.from_parts(center, 1.0, center.norm_squared() - radius * radius, radius)
    }

    pub fn plane(&self, e: &OrientedPlane) -> DVector<f64> {
        self.from_parts(&e.normal(), 0.0, 2.0 * e.d, 1.0)
    }

    pub fn point(&self, p: &DVector<f64>) -> DVector<f64> {
        self.from_parts(p, 1.0, p.norm_squared(), 0.0)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(GeomError::DimensionMismatch { expected: self.n(), found: len });
        }
        Ok(())
    }

    pub fn lift(&self, obj: &LieObject) -> Result<OrientedSphereRep> {
        let x = match obj {
            LieObject::Sphere { center, radius } => {
                self.check_len(center.len())?;
                self.sphere(center, *radius)
            }
            LieObject::Plane(e) => {
                self.check_len(e.v.len())?;
                self.plane(e)
            }
            LieObject::Point(p) => {
                self.check_len(p.len())?;
                self.point(p)
            }
            LieObject::Infinity => self.e_inf(),
        };
        self.classify(&x)
    }

    /// Euclidean data of a point of the Lie quadric.
    pub fn classify(&self, x: &DVector<f64>) -> Result<OrientedSphereRep> {
        if x.len() != self.dim() {
            return Err(GeomError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let nx = x.norm();
        if nx == 0.0 {
            return Err(GeomError::ZeroVector);
        }
        if self.inner(x, x).abs() > LIFT_TOL * nx * nx {
            return Err(GeomError::Invalid("vector is not on the Lie quadric".into()));
        }
        let (v, x0, xinf, s) = self.parts(x);
        let tol = KIND_TOL * nx;
        let none = OrientedSphereRep { kind: LieKind::Infinity, vector: x / nx, center: None, radius: None, normal: None, offset: None };
        if x0.abs() <= tol {
            if s.abs() <= tol {
                return Ok(OrientedSphereRep { vector: self.e_inf(), ..none });
            }
            let normal = &v / s;
            let offset = xinf / (2.0 * s);
            return Ok(OrientedSphereRep { kind: LieKind::Plane, vector: x / s, normal: Some(normal), offset: Some(offset), ..none });
        }
        let center = &v / x0;
        let radius = s / x0;
        let kind = if s.abs() <= tol { LieKind::Point } else { LieKind::Sphere };
        let radius = if kind == LieKind::Point { 0.0 } else { radius };
        Ok(OrientedSphereRep { kind, vector: x / x0, center: Some(center), radius: Some(radius), ..none })
    }

    /// Oriented contact: conjugacy under the Lie form.
    pub fn oriented_contact(&self, a: &OrientedSphereRep, b: &OrientedSphereRep) -> ContactTest {
        let residual = self.inner_unit(&a.vector, &b.vector);
        ContactTest { contact: residual < CONTACT_TOL, residual }
    }

    /// Reflection in the polar hyperplane of a non-isotropic point `o`.
    pub fn reflect(&self, o: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        let oo = self.inner(o, o);
        if oo.abs() < 1e-12 * o.norm_squared() {
            return Err(GeomError::Invalid("reflection centre is isotropic".into()));
        }
        Ok(x - o * (2.0 * self.inner(x, o) / oo))
    }

    fn reflect_subspace(&self, o: &DVector<f64>, s: &Subspace) -> Result<Subspace> {
        let b = s.basis();
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for k in 0..b.ncols() {
            out.set_column(k, &self.reflect(o, &b.column(k).into_owned())?);
        }
        Subspace::from_columns(&out)
    }

    /// Largest entry of the restricted form on an orthonormal basis.
    pub fn isotropy(&self, s: &Subspace) -> f64 {
        let b = s.basis();
        (b.transpose() * self.form() * b).amax()
    }

    /// The point complex `[e_{n+3}]^⊥`.
    fn point_complex(&self) -> Subspace {
        let d = self.dim();
        Subspace::from_columns(&DMatrix::identity(d, d).columns(0, d - 1).into_owned()).expect("nonzero")
    }

    fn require_three(&self) -> Result<()> {
        if self.n() != 3 {
            return Err(GeomError::DimensionMismatch { expected: 3, found: self.n() });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// contact elements

/// A point with an oriented plane through it, and its isotropic line.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactElement {
    line: Subspace,
    point: DVector<f64>,
    plane: OrientedPlane,
}

impl ContactElement {
    pub fn new(space: &LieSpace, point: &DVector<f64>, plane: &OrientedPlane) -> Result<Self> {
        space.check_len(point.len())?;
        space.check_len(plane.v.len())?;
        let r = plane.residual(point);
        if r > 1e-8 * (1.0 + point.norm()) {
            return Err(GeomError::Hypothesis(format!("point is not on the plane ({r:e})")));
        }
        let m = DMatrix::from_columns(&[space.point(point), space.plane(plane)]);
        let line = Subspace::from_columns(&m)?;
        Ok(ContactElement { line, point: point.clone(), plane: plane.clone() })
    }

    /// Contact element of an isotropic line.
    pub fn from_line(space: &LieSpace, line: &Subspace) -> Result<Self> {
        if line.dim() != 1 || line.ambient() + 1 != space.dim() {
            return Err(GeomError::Invalid("contact elements are lines of RP^{n+2}".into()));
        }
        let iso = space.isotropy(line);
        if iso > 1e-8 {
            return Err(GeomError::Invalid(format!("line is not isotropic ({iso:e})")));
        }
        let b = line.basis();
        let (b1, b2) = (b.column(0).into_owned(), b.column(1).into_owned());
        let d = space.dim();
        // point: vanishing e_{n+3} component
        let p = &b1 * b2[d - 1] - &b2 * b1[d - 1];
        // plane: vanishing e_0 component
        let x0 = |x: &DVector<f64>| x[d - 2] - x[d - 3];
        let e = &b1 * x0(&b2) - &b2 * x0(&b1);
        if p.norm() < 1e-12 || e.norm() < 1e-12 {
            return Err(GeomError::NonGeneric("line lies in the point or plane complex".into()));
        }
        let prep = space.classify(&p)?;
        let erep = space.classify(&e)?;
        let point = match prep.kind {
            LieKind::Point => prep.center.expect("point"),
            _ => return Err(GeomError::NonGeneric("contact element at infinity".into())),
        };
        let plane = match erep.kind {
            LieKind::Plane => OrientedPlane::new(&erep.normal.expect("plane"), erep.offset.expect("plane"))?,
            _ => return Err(GeomError::NonGeneric("contact element without a finite plane".into())),
        };
        Ok(ContactElement { line: line.clone(), point, plane })
    }

    pub fn line(&self) -> &Subspace {
        &self.line
    }

    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    pub fn plane(&self) -> &OrientedPlane {
        &self.plane
    }

    /// The oriented sphere of signed radius `r` of the element: centre
    /// `P + r v`.
    pub fn sphere(&self, space: &LieSpace, r: f64) -> DVector<f64> {
        space.sphere(&(&self.point + self.plane.normal() * r), r)
    }
}

// ---------------------------------------------------------------------------
// principal contact element nets

/// A discrete congruence of isotropic lines: a circular net with a conical
/// net of oriented planes through its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PceNet {
    space: LieSpace,
    rows: usize,
    cols: usize,
    elements: Vec<ContactElement>,
}

/// JSON form of a [`PceNet`]: the circular net and one plane per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceNetJson {
    #[serde(flatten)]
    pub net: CircularNetJson,
    pub planes: Vec<OrientedPlane>,
}

impl PceNet {
    pub fn new(space: &LieSpace, rows: usize, cols: usize, elements: Vec<ContactElement>) -> Result<Self> {
        if elements.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(GeomError::DimensionMismatch { expected: rows * cols, found: elements.len() });
        }
        let lines: Vec<Subspace> = elements.iter().map(|e| e.line.clone()).collect();
        LineCongruence::new(rows, cols, lines)?;
        Ok(PceNet { space: space.clone(), rows, cols, elements })
    }

    pub fn from_lines(space: &LieSpace, rows: usize, cols: usize, lines: &[Subspace]) -> Result<Self> {
        let mut elements = Vec::with_capacity(lines.len());
        for (k, l) in lines.iter().enumerate() {
            elements.push(ContactElement::from_line(space, l).map_err(|e| e.at(k / cols.max(1), k % cols.max(1)))?);
        }
        Self::new(space, rows, cols, elements)
    }

    pub fn space(&self) -> &LieSpace {
        &self.space
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &ContactElement {
        &self.elements[i * self.cols + j]
    }

    pub fn elements(&self) -> &[ContactElement] {
        &self.elements
    }

    pub fn lines(&self) -> LineCongruence {
        LineCongruence::new(self.rows, self.cols, self.elements.iter().map(|e| e.line.clone()).collect())
            .expect("validated on construction")
    }

    pub fn circular(&self) -> Result<CircularNet> {
        CircularNet::new(self.space.n(), self.rows, self.cols, self.elements.iter().map(|e| e.point.clone()).collect())
    }

    pub fn transposed(&self) -> PceNet {
        let mut elements = Vec::with_capacity(self.elements.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                elements.push(self.at(i, j).clone());
            }
        }
        PceNet { space: self.space.clone(), rows: self.cols, cols: self.rows, elements }
    }

    pub fn window(&self, i0: usize, j0: usize, r: usize, c: usize) -> Result<PceNet> {
        if i0 + r > self.rows || j0 + c > self.cols || r == 0 || c == 0 {
            return Err(GeomError::GridTooSmall(format!("window {r}x{c} at ({i0},{j0}) exceeds the grid")));
        }
        let mut elements = Vec::with_capacity(r * c);
        for i in i0..i0 + r {
            for j in j0..j0 + c {
                elements.push(self.at(i, j).clone());
            }
        }
        Ok(PceNet { space: self.space.clone(), rows: r, cols: c, elements })
    }

    /// Largest restricted-form entry over all lines.
    pub fn isotropy(&self) -> f64 {
        self.elements.iter().map(|e| self.space.isotropy(&e.line)).fold(0.0, f64::max)
    }

    /// Neighbouring lines meet in an oriented sphere touching both
    /// elements: largest unit Lie product of the meet point with itself and
    /// with the four point and plane lifts.
    pub fn contact_residual(&self) -> Result<f64> {
        let s = &self.space;
        let mut worst = 0.0f64;
        let mut pair = |a: &ContactElement, b: &ContactElement| -> Result<()> {
            let (m, _) = projlin::meet_dim(&[&a.line, &b.line], 0)?;
            let x = m.basis().column(0).into_owned();
            worst = worst.max(s.inner_unit(&x, &x));
            for e in [a, b] {
                worst = worst.max(s.inner_unit(&x, &s.point(&e.point)));
                worst = worst.max(s.inner_unit(&x, &s.plane(&e.plane)));
            }
            Ok(())
        };
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i + 1 < self.rows {
                    pair(self.at(i, j), self.at(i + 1, j))?;
                }
                if j + 1 < self.cols {
                    pair(self.at(i, j), self.at(i, j + 1))?;
                }
            }
        }
        Ok(worst)
    }

    /// Points `l(i, j) ∩ {x : <eta, x> = 0}` (Euclidean pairing).
    pub fn slice(&self, eta: &DVector<f64>) -> Result<QNet> {
        QNet::from_fn(self.rows, self.cols, |i, j| {
            let b = self.at(i, j).line.basis();
            let (b1, b2) = (b.column(0), b.column(1));
            HPoint::new(b1 * eta.dot(&b2) - b2 * eta.dot(&b1))
        })
    }

    pub fn to_json(&self) -> Result<PceNetJson> {
        Ok(PceNetJson { net: self.circular()?.to_json(), planes: self.elements.iter().map(|e| e.plane.clone()).collect() })
    }

    pub fn from_json(j: &PceNetJson) -> Result<Self> {
        let net = CircularNet::from_json(&j.net)?;
        if j.planes.len() != net.rows() * net.cols() {
            return Err(GeomError::DimensionMismatch { expected: net.rows() * net.cols(), found: j.planes.len() });
        }
        let space = LieSpace::new(net.n())?;
        let mut elements = Vec::with_capacity(j.planes.len());
        for (k, pl) in j.planes.iter().enumerate() {
            let v = DVector::from_column_slice(&pl.v);
            let pl = if (v.norm() - 1.0).abs() < 1e-12 { pl.clone() } else { OrientedPlane::new(&v, pl.d)? };
            elements.push(ContactElement::new(&space, &net.points()[k], &pl).map_err(|e| e.at(k / net.cols(), k % net.cols()))?);
        }
        Self::new(&space, net.rows(), net.cols(), elements)
    }
}

/// Diagnostics of [`extend_to_pce`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PceReport {
    /// Largest disagreement between the two propagation paths around a quad.
    pub path_residual: f64,
    pub isotropy: f64,
    pub contact_residual: f64,
}

/// Extends a circular net to a principal contact element net by reflecting
/// the seed plane in perpendicular bisectors of the edges.
pub fn extend_to_pce(net: &CircularNet, seed: &OrientedPlane) -> Result<(PceNet, PceReport)> {
    let space = LieSpace::new(net.n())?;
    space.check_len(seed.v.len())?;
    let seed = OrientedPlane::new(&seed.normal(), seed.d)?;
    let p00 = net.point(0, 0);
    let r = seed.residual(p00);
    if r > 1e-8 * (1.0 + p00.norm()) {
        return Err(GeomError::Hypothesis(format!("seed plane misses P(0,0) by {r:e}")));
    }
    let (rows, cols) = (net.rows(), net.cols());
    let mut planes: Vec<OrientedPlane> = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let e = if j > 0 {
                planes[i * cols + j - 1].reflect(net.point(i, j - 1), net.point(i, j))
            } else if i > 0 {
                planes[(i - 1) * cols].reflect(net.point(i - 1, 0), net.point(i, 0))
            } else {
                Ok(seed.clone())
            };
            planes.push(e.map_err(|e| e.at(i, j))?);
        }
    }
    let mut path_residual = 0.0f64;
    for i in 0..rows.saturating_sub(1) {
        for j in 0..cols.saturating_sub(1) {
            let other = planes[i * cols + j + 1].reflect(net.point(i, j + 1), net.point(i + 1, j + 1))?;
            path_residual = path_residual.max(other.distance(&planes[(i + 1) * cols + j + 1]));
        }
    }
    if path_residual > PATH_TOL {
        return Err(GeomError::Hypothesis(format!("plane propagation depends on the path ({path_residual:e}); the net is not circular")));
    }
    let elements = (0..rows * cols)
        .map(|k| ContactElement::new(&space, &net.points()[k], &planes[k]).map_err(|e| e.at(k / cols, k % cols)))
        .collect::<Result<Vec<_>>>()?;
    let pce = PceNet::new(&space, rows, cols, elements)?;
    let report = PceReport { path_residual, isotropy: pce.isotropy(), contact_residual: pce.contact_residual()? };
    Ok((pce, report))
}

// ---------------------------------------------------------------------------
// numerical helpers

/// Singular values relative to the largest, descending.
fn rel_singular(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s = projlin::singular_values(m);
    s.sort_by(|a, b| b.total_cmp(a));
    let s0 = s.first().copied().unwrap_or(0.0);
    if s0 > 0.0 {
        s.iter().map(|x| x / s0).collect()
    } else {
        s
    }
}

/// Projective dimension of the column span and the relative singular values.
fn span_dim(m: &DMatrix<f64>) -> (i64, Vec<f64>) {
    let s = rel_singular(m);
    (s.iter().filter(|&&x| x > DIM_TOL).count() as i64 - 1, s)
}

fn unit_columns(vs: &[DVector<f64>]) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = vs.iter().map(|v| v / v.norm()).collect();
    DMatrix::from_columns(&cols)
}

/// Smallest relative singular value of stacked unit rows `[n, -d]`: zero iff
/// the Euclidean planes `<n, x> = d` share a point.
fn plane_concurrency(planes: &[(Vector3<f64>, f64)]) -> (f64, Option<DVector<f64>>) {
    let rows: Vec<DVector<f64>> =
        planes.iter().map(|(n, d)| DVector::from_column_slice(&[n[0], n[1], n[2], -d])).collect();
    let m = unit_columns(&rows).transpose();
    let (v, asc) = projlin::smallest_right_vectors(&m, 1);
    let x = v.column(0);
    let point = if x[3].abs() > 1e-12 { Some(DVector::from_column_slice(&[x[0] / x[3], x[1] / x[3], x[2] / x[3]])) } else { None };
    (asc[0], point)
}

/// Hypersphere through at least `n + 1` points: the best hyperplane through
/// their lifts.
fn sphere_fit(ms: &MoebiusSpace, points: &[DVector<f64>]) -> Result<SphereRep> {
    let lifts = points.iter().map(|p| ms.lift_point(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&HPoint> = lifts.iter().collect();
    let (s, _) = Subspace::from_points_dim(&refs, ms.n())?;
    ms.hypersphere(&s)
}

fn v3(x: &DVector<f64>) -> Vector3<f64> {
    Vector3::new(x[0], x[1], x[2])
}

/// Relative third singular value of centred points of `R^3` and the normal
/// of the best plane.
fn coplanarity(points: &[DVector<f64>]) -> (f64, Vector3<f64>) {
    let n = points.len() as f64;
    let mean = points.iter().fold(DVector::zeros(3), |a, p| a + p) / n;
    let m = DMatrix::from_fn(points.len(), 3, |r, c| points[r][c] - mean[c]);
    let (v, asc) = projlin::smallest_right_vectors(&m, 1);
    (asc[0], Vector3::new(v[(0, 0)], v[(1, 0)], v[(2, 0)]).normalize())
}

// ---------------------------------------------------------------------------
// one spherical parameter line

/// Three characterisations of a spherical parameter line `{l(i, j)}_i` and
/// the Euclidean consequences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphericalLineCheck {
    pub j: usize,
    /// Projective dimension of the join of the lines.
    pub line_span_dim: i64,
    /// Projective dimension of the join of the point lifts.
    pub point_span_dim: i64,
    /// Projective dimension of the join of the plane lifts.
    pub plane_span_dim: i64,
    pub spherical_lines: bool,
    pub spherical_points: bool,
    /// A common tangent oriented sphere of the planes exists.
    pub tangent_sphere_exists: bool,
    /// The three conditions agree.
    pub equivalent: bool,
    /// Sphere through the points.
    pub sphere: Option<SphereRep>,
    /// Common tangent oriented sphere of the planes.
    pub tangent_sphere: Option<OrientedSphereRep>,
    /// Largest unit Lie product of the tangent sphere with the plane lifts.
    pub tangent_residual: Option<f64>,
    /// Angle between each plane and the sphere through the points.
    pub angles: Vec<f64>,
    pub angle_spread: Option<f64>,
    /// Distance of the two centres, or the sine between normals when both
    /// are planes.
    pub concentricity: Option<f64>,
}

/// Checks the column `{l(i, j)}_i` of a principal contact element net in
/// `R^3`.
pub fn spherical_line_check(net: &PceNet, j: usize) -> Result<SphericalLineCheck> {
    let space = &net.space;
    space.require_three()?;
    if j >= net.cols {
        return Err(GeomError::Invalid(format!("column {j} outside a net with {} columns", net.cols)));
    }
    let n = space.n() as i64;
    let elems: Vec<&ContactElement> = (0..net.rows).map(|i| net.at(i, j)).collect();
    let mut line_vecs = Vec::new();
    for e in &elems {
        line_vecs.push(e.line.basis().column(0).into_owned());
        line_vecs.push(e.line.basis().column(1).into_owned());
    }
    let (line_span_dim, _) = span_dim(&unit_columns(&line_vecs));
    let point_lifts: Vec<DVector<f64>> = elems.iter().map(|e| space.point(&e.point)).collect();
    let (point_span_dim, _) = span_dim(&unit_columns(&point_lifts));
    let plane_lifts: Vec<DVector<f64>> = elems.iter().map(|e| space.plane(&e.plane)).collect();
    let (plane_span_dim, _) = span_dim(&unit_columns(&plane_lifts));
    let spherical_lines = line_span_dim <= n + 1;
    let spherical_points = point_span_dim <= n;

    let mut tangent_sphere = None;
    let mut tangent_residual = None;
    if plane_span_dim <= n {
        // polar line of the plane span: through e_inf and the tangent sphere
        let m = unit_columns(&plane_lifts).transpose();
        let (w, _) = projlin::smallest_right_vectors(&m, 2);
        let j_form = space.form();
        let y1 = &j_form * w.column(0);
        let y2 = &j_form * w.column(1);
        let iso = isotropic_directions(space, &y1, &y2);
        // the root other than e_inf; a double root means the planes only
        // share the point at infinity
        let einf = space.e_inf();
        if let Some(s2) = iso
            .into_iter()
            .max_by(|a, b| projlin::chordal(a, &einf).total_cmp(&projlin::chordal(b, &einf)))
        {
            let res = plane_lifts.iter().map(|e| space.inner_unit(&s2, e)).fold(0.0, f64::max);
            tangent_residual = Some(res);
            tangent_sphere = space.classify(&s2).ok();
        }
    }
    let tangent_sphere_exists = tangent_sphere.is_some() && tangent_residual.is_some_and(|r| r < CONTACT_TOL);
    let equivalent = spherical_lines == spherical_points && spherical_points == tangent_sphere_exists;

    let mut sphere = None;
    let mut angles = Vec::new();
    if spherical_points {
        let pts: Vec<DVector<f64>> = elems.iter().map(|e| e.point.clone()).collect();
        if let Ok(s1) = sphere_fit(&space.moebius, &pts) {
            for e in &elems {
                let v = e.plane.normal();
                let c = match (&s1.center, s1.radius2, &s1.normal) {
                    (Some(c), Some(r2), _) if r2 > 0.0 => v.dot(&(&e.point - c)) / r2.sqrt(),
                    (_, _, Some(nrm)) => v.dot(nrm) / nrm.norm(),
                    _ => f64::NAN,
                };
                angles.push(c.clamp(-1.0, 1.0).acos());
            }
            sphere = Some(s1);
        }
    }
    let angle_spread = if angles.is_empty() || angles.iter().any(|a| a.is_nan()) {
        None
    } else {
        let hi = angles.iter().copied().fold(f64::MIN, f64::max);
        let lo = angles.iter().copied().fold(f64::MAX, f64::min);
        Some(hi - lo)
    };
    let concentricity = match (&sphere, &tangent_sphere) {
        (Some(s1), Some(s2)) => match (&s1.center, &s2.center, &s1.normal, &s2.normal) {
            (Some(c1), Some(c2), _, _) => Some((c1 - c2).norm()),
            (_, _, Some(n1), Some(n2)) => {
                let (a, b) = (v3(&(n1 / n1.norm())), v3(&(n2 / n2.norm())));
                Some(a.cross(&b).norm())
            }
            _ => None,
        },
        _ => None,
    };
    Ok(SphericalLineCheck {
        j,
        line_span_dim,
        point_span_dim,
        plane_span_dim,
        spherical_lines,
        spherical_points,
        tangent_sphere_exists,
        equivalent,
        sphere,
        tangent_sphere,
        tangent_residual,
        angles,
        angle_spread,
        concentricity,
    })
}

/// Isotropic vectors of the Lie form on the line `span(y1, y2)`.
fn isotropic_directions(space: &LieSpace, y1: &DVector<f64>, y2: &DVector<f64>) -> Vec<DVector<f64>> {
    let a = space.inner(y1, y1);
    let b = space.inner(y1, y2);
    let c = space.inner(y2, y2);
    let scale = a.abs() + b.abs() + c.abs();
    let disc = b * b - a * c;
    if disc < -1e-12 * scale * scale {
        return vec![];
    }
    let r = disc.max(0.0).sqrt();
    // t y1 + y2 with a t^2 + 2 b t + c = 0, or y1 itself when a = 0
    if a.abs() <= 1e-12 * scale {
        let mut out = vec![y1.clone()];
        if b.abs() > 1e-12 * scale {
            out.push(y1 * (-c / (2.0 * b)) + y2);
        }
        return out;
    }
    vec![y1 * ((-b + r) / a) + y2, y1 * ((-b - r) / a) + y2]
}

// ---------------------------------------------------------------------------
// one family of spherical parameter lines

/// How the planes `l(i, j) ∨ l(i, j+1)` of a spherical family sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyCase {
    /// Not concurrent: isotropic planes of a quadric in two alternating
    /// generator systems.
    Alternating,
    /// Concurrent for every `j`.
    Concurrent,
}

/// Generator systems of two planes `l(i, j) ∨ l(i, j+1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorPair {
    pub i: usize,
    pub k: usize,
    pub meet_dim: i64,
    /// Same system by meet-dimension parity.
    pub same_system: bool,
    /// No singular value of the meet system lies in the ambiguous band
    /// between the rank threshold and `1e-4`.
    pub well_conditioned: bool,
}

/// The quadric `Q_j` containing the planes `l(i, j) ∨ l(i, j+1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternationCheck {
    pub j: usize,
    pub fit_residual: f64,
    pub fit_gap: f64,
    /// Distance of `Q_j` to the pencil spanned by the Lie form and the
    /// product of the hyperplanes of columns `j` and `j+1`.
    pub pencil_residual: f64,
    pub signature: Signature,
    /// Generator system of each plane (`+1` or `-1`), from the orientation
    /// of its graph over the positive part of an eigenbasis of `Q_j`.
    pub systems: Vec<i8>,
    pub pairs: Vec<GeneratorPair>,
    /// Planes of equal index parity lie in one system, others in the other.
    pub alternation: bool,
    /// Meet-dimension parity agrees with the alternation on every
    /// well-conditioned pair.
    pub meet_parity_agrees: bool,
}

/// Consequences of concurrency (one family of spherical parameter lines).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcurrentCheck {
    /// Per `j`, the concurrency point of the planes `l(i, j) ∨ l(i, j+1)`.
    #[serde(serialize_with = "crate::ser::vecs")]
    pub centres: Vec<DVector<f64>>,
    /// Largest distance between `l(i, j)` and the image of `l(i, 0)` under
    /// the composed central projections.
    pub projection_distance: f64,
    /// `L_A^3 l`.
    pub goursat_a3: DegeneracyReport,
    /// `L_B^2 l`.
    pub laplace_b2: DegeneracyReport,
    /// Goursat spread of `L_A^2 l` and Laplace spread of `L_B l`, which stay
    /// away from zero.
    pub control_a2: f64,
    pub control_b1: f64,
    /// Per `j`, concurrency of the Euclidean planes through
    /// `P(i,j), P(i,j+1), P(i,j+2)`.
    pub circle_planes: Vec<f64>,
    /// Per `j`, the circles through the same points have a common
    /// orthogonal sphere.
    pub circles_orthogonal: Vec<f64>,
    /// Per `j`, the spheres through the points of two neighbouring rows of
    /// the window `j..=j+2` have a common orthogonal sphere.
    pub spheres_orthogonal: Vec<f64>,
    pub orthogonal_spheres: Vec<SphereRep>,
    /// Laplace spread of `L_B^2` of the lifted circular net.
    pub moebius_laplace: f64,
    /// Per `j`, concurrency of the planes spanned by the normal lines at
    /// `P(i, j)` and `P(i, j+1)`.
    pub normal_planes: Vec<f64>,
    /// Distance of their concurrency point to the line through the centres
    /// of the spheres of columns `j` and `j+1`.
    pub centre_line: Vec<f64>,
    /// Per `j`, coplanarity of `K(i, j) = E(i,j) ∩ E(i,j+1) ∩ E(i,j+2)`.
    pub k_coplanarity: Vec<f64>,
}

/// Outcome of [`family_spherical_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyCheck {
    pub family: Family,
    pub lines: Vec<SphericalLineCheck>,
    /// Per `j`, smallest relative singular value of the meet system of the
    /// planes `l(i, j) ∨ l(i, j+1)`: zero iff they share a point.
    pub concurrency: Vec<f64>,
    pub case: FamilyCase,
    pub alternation: Vec<AlternationCheck>,
    pub concurrent: Option<ConcurrentCheck>,
}

fn plane_of(a: &Subspace, b: &Subspace) -> Result<Subspace> {
    Ok(projlin::join_dim(&[a, b], 2)?.0)
}

fn column_planes(net: &PceNet, j: usize) -> Result<Vec<Subspace>> {
    (0..net.rows).map(|i| plane_of(&net.at(i, j).line, &net.at(i, j + 1).line).map_err(|e| e.at(i, j))).collect()
}

fn column_span(net: &PceNet, j: usize) -> Result<Subspace> {
    let lines: Vec<&Subspace> = (0..net.rows).map(|i| &net.at(i, j).line).collect();
    Ok(projlin::join_dim(&lines, net.space.n() + 1)?.0)
}

/// Checks the family `{l(i, j)}_i` (columns, or rows after transposing).
pub fn family_spherical_check(net: &PceNet, family: Family) -> Result<FamilyCheck> {
    let t;
    let net = match family {
        Family::Cols => net,
        Family::Rows => {
            t = net.transposed();
            &t
        }
    };
    net.space.require_three()?;
    if net.rows < 6 || net.cols < 4 {
        return Err(GeomError::GridTooSmall(format!(
            "family checks need at least 6 lines per family and 4 families, got {}x{}",
            net.rows, net.cols
        )));
    }
    let lines = (0..net.cols).map(|j| spherical_line_check(net, j)).collect::<Result<Vec<_>>>()?;
    if let Some(l) = lines.iter().find(|l| !l.spherical_lines) {
        return Err(GeomError::Hypothesis(format!("parameter line {} is not spherical (span dimension {})", l.j, l.line_span_dim)));
    }
    let planes = (0..net.cols - 1).map(|j| column_planes(net, j)).collect::<Result<Vec<_>>>()?;
    let concurrency = planes
        .iter()
        .map(|p| Ok(projlin::meet_spectrum(&p.iter().collect::<Vec<_>>())?[0]))
        .collect::<Result<Vec<f64>>>()?;
    let case = if concurrency.iter().all(|&c| c < DIM_TOL) {
        FamilyCase::Concurrent
    } else if concurrency.iter().all(|&c| c > moebius::CONDITION_TOL) {
        FamilyCase::Alternating
    } else {
        return Err(GeomError::NonGeneric(format!("planes concurrent for some columns only: {concurrency:?}")));
    };
    let mut out = FamilyCheck { family, lines, concurrency, case, alternation: Vec::new(), concurrent: None };
    match case {
        FamilyCase::Alternating => {
            for j in 0..net.cols - 1 {
                out.alternation.push(alternation_check(net, j, &planes[j])?);
            }
        }
        FamilyCase::Concurrent => out.concurrent = Some(concurrent_check(net, &planes)?),
    }
    Ok(out)
}

fn alternation_check(net: &PceNet, j: usize, planes: &[Subspace]) -> Result<AlternationCheck> {
    let refs: Vec<&Subspace> = planes.iter().collect();
    let fit = projlin::fit_quadric(&[], &refs)?;
    let h0 = column_span(net, j)?.complement();
    let h1 = column_span(net, j + 1)?.complement();
    let (a, b) = (h0.column(0), h1.column(0));
    let product = a * b.transpose() + b * a.transpose();
    let pencil_residual = projlin::span_residual(fit.quadric.form(), &[&net.space.form(), &product]);
    let signature = projlin::signature_tol(fit.quadric.form(), 1e-8);
    let systems = planes.iter().map(|p| generator_system(fit.quadric.form(), p)).collect::<Vec<_>>();
    let alternation = systems.windows(2).all(|w| w[0] != w[1]);
    let mut pairs = Vec::new();
    let mut meet_parity_agrees = true;
    for i in 0..planes.len() {
        for k in i + 1..planes.len() {
            let spec = projlin::meet_spectrum(&[&planes[i], &planes[k]])?;
            let meet_dim = inscribed::meet_dimension(&[&planes[i], &planes[k]], DIM_TOL)?;
            let same_system = inscribed::same_system(meet_dim, 2);
            let well_conditioned = !spec.iter().any(|&x| (DIM_TOL..1e-4).contains(&x));
            if well_conditioned {
                meet_parity_agrees &= same_system == ((k - i) % 2 == 0);
            }
            pairs.push(GeneratorPair { i, k, meet_dim, same_system, well_conditioned });
        }
    }
    Ok(AlternationCheck {
        j,
        fit_residual: fit.residual,
        fit_gap: fit.gap,
        pencil_residual,
        signature,
        systems,
        pairs,
        alternation,
        meet_parity_agrees,
    })
}

/// Generator system of an isotropic plane of a form of signature `(3, 3)`:
/// in an eigenbasis scaled to `diag(-1, -1, -1, 1, 1, 1)` the plane is the
/// graph of an orthogonal map `y_- = A y_+`, and the system is `sign det A`.
fn generator_system(form: &DMatrix<f64>, plane: &Subspace) -> i8 {
    let (vals, vecs) = projlin::symmetric_eigen(form);
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|l| l.abs().sqrt())));
    let y = scale * vecs.transpose() * plane.basis();
    let minus = y.rows(0, 3).into_owned().determinant();
    let plus = y.rows(3, 3).into_owned().determinant();
    if minus * plus >= 0.0 {
        1
    } else {
        -1
    }
}

fn concurrent_check(net: &PceNet, planes: &[Vec<Subspace>]) -> Result<ConcurrentCheck> {
    let space = &net.space;
    let (rows, cols) = (net.rows, net.cols);
    let mut centres = Vec::new();
    for p in planes {
        let (o, _) = projlin::meet_dim(&p.iter().collect::<Vec<_>>(), 0)?;
        centres.push(o.basis().column(0).into_owned());
    }
    let spans = (0..cols).map(|j| column_span(net, j)).collect::<Result<Vec<_>>>()?;

    // composed central projections from the concurrency points
    let mut projection_distance = 0.0f64;
    for i in 0..rows {
        let mut cur = net.at(i, 0).line.clone();
        for j in 0..cols - 1 {
            let o = Subspace::from_columns(&DMatrix::from_column_slice(centres[j].len(), 1, centres[j].as_slice()))?;
            let through = projlin::join_dim(&[&o, &cur], 2)?.0;
            cur = projlin::meet_dim(&[&through, &spans[j + 1]], 1)?.0;
            projection_distance = projection_distance.max(cur.distance(&net.at(i, j + 1).line));
        }
    }

    let lc = net.lines();
    let goursat_a3 = qnet::classify_congruence(&lc, Direction::A, 3)?;
    let laplace_b2 = qnet::classify_congruence(&lc, Direction::B, 2)?;
    let control_a2 = goursat_a3.per_step[1].0;
    let control_b1 = laplace_b2.per_step[0].1;

    // Möbius side
    let circ = net.circular()?;
    let ms = space.moebius();
    let p = |i: usize, j: usize| circ.point(i, j);
    let mut circle_planes = Vec::new();
    let mut circles_orthogonal = Vec::new();
    let mut spheres_orthogonal = Vec::new();
    let mut orthogonal_spheres = Vec::new();
    let mut k_coplanarity = Vec::new();
    for j in 0..cols - 2 {
        let mut eu = Vec::new();
        let mut sigma = Vec::new();
        for i in 0..rows {
            let (a, b, c) = (v3(p(i, j)), v3(p(i, j + 1)), v3(p(i, j + 2)));
            let nrm = (b - a).cross(&(c - a));
            eu.push((nrm, nrm.dot(&a)));
            let l = circ.lift();
            sigma.push(Subspace::from_points(&[l.at(i, j), l.at(i, j + 1), l.at(i, j + 2)])?);
        }
        circle_planes.push(plane_concurrency(&eu).0);
        let srefs: Vec<&Subspace> = sigma.iter().collect();
        circles_orthogonal.push(projlin::meet_spectrum(&srefs)?[0]);
        let (z, _) = projlin::meet_dim(&srefs, 0)?;
        orthogonal_spheres.push(ms.classify(&z.basis().column(0).into_owned()));
        let mut poles = Vec::new();
        for i in 0..rows - 1 {
            let pts: Vec<DVector<f64>> = (0..2).flat_map(|di| (0..3).map(move |dj| (i + di, j + dj))).map(|(a, b)| p(a, b).clone()).collect();
            poles.push(sphere_fit(ms, &pts).map_err(|e| e.at(i, j))?.vector);
        }
        let s = rel_singular(&unit_columns(&poles));
        spheres_orthogonal.push(*s.last().expect("nonempty"));

        let mut ks = Vec::new();
        for i in 0..rows {
            let es = [net.at(i, j).plane(), net.at(i, j + 1).plane(), net.at(i, j + 2).plane()];
            let m = DMatrix::from_fn(3, 3, |r, c| es[r].v[c]);
            let rhs = DVector::from_fn(3, |r, _| es[r].d);
            let k = m.lu().solve(&rhs).ok_or(GeomError::NonGeneric("three planes without a common point".into()).at(i, j))?;
            ks.push(DVector::from_column_slice(&[k[0], k[1], k[2], 1.0]));
        }
        let s = rel_singular(&unit_columns(&ks));
        k_coplanarity.push(s[3]);
    }
    let moebius_laplace = qnet::classify_degeneracy(circ.lift(), Direction::B, 2)?.laplace_spread;

    let mut normal_planes = Vec::new();
    let mut centre_line = Vec::new();
    let col_centres = (0..cols)
        .map(|j| {
            let pts: Vec<DVector<f64>> = (0..rows).map(|i| p(i, j).clone()).collect();
            let s = sphere_fit(ms, &pts)?;
            s.center.ok_or(GeomError::NonGeneric(format!("points of column {j} lie on a plane")))
        })
        .collect::<Result<Vec<_>>>()?;
    for j in 0..cols - 1 {
        let mut pl = Vec::new();
        for i in 0..rows {
            let v = v3(&net.at(i, j).plane().normal());
            let a = v3(p(i, j));
            let mut nrm = v.cross(&(v3(p(i, j + 1)) - a));
            if nrm.norm() < 1e-9 {
                nrm = v.cross(&v3(&net.at(i, j + 1).plane().normal()));
            }
            pl.push((nrm, nrm.dot(&a)));
        }
        let (res, point) = plane_concurrency(&pl);
        normal_planes.push(res);
        let dist = match point {
            Some(x) => {
                let (c0, c1) = (v3(&col_centres[j]), v3(&col_centres[j + 1]));
                let dir = (c1 - c0).normalize();
                (v3(&x) - c0).cross(&dir).norm() / (1.0 + x.norm())
            }
            None => f64::INFINITY,
        };
        centre_line.push(dist);
    }
    Ok(ConcurrentCheck {
        centres,
        projection_distance,
        goursat_a3,
        laplace_b2,
        control_a2,
        control_b1,
        circle_planes,
        circles_orthogonal,
        spheres_orthogonal,
        orthogonal_spheres,
        moebius_laplace,
        normal_planes,
        centre_line,
        k_coplanarity,
    })
}

// ---------------------------------------------------------------------------
// two families

/// Common points of one family of parameter spheres.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonPoints {
    pub real: bool,
    /// Relative discriminant of the Möbius form on the line; positive for
    /// two real points.
    pub discriminant: f64,
    #[serde(serialize_with = "crate::ser::vecs")]
    pub points: Vec<DVector<f64>>,
    /// Largest relative power of a common point with respect to the
    /// spheres of the family.
    pub residual: f64,
}

/// Outcome of [`two_family_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoFamilyCheck {
    pub laplace_a2: DegeneracyReport,
    pub laplace_b2: DegeneracyReport,
    /// Relative fourth singular value of the poles of the column spans
    /// (zero when they lie in a plane), and of the row spans.
    pub col_poles_plane: f64,
    pub row_poles_plane: f64,
    /// Largest Lie product between orthonormal bases of the two planes.
    pub conjugacy: f64,
    pub col_common_points: CommonPoints,
    pub row_common_points: CommonPoints,
    /// Coplanarity of the centres of the column spheres and row spheres.
    pub col_centre_plane: f64,
    pub row_centre_plane: f64,
    /// Deviation of the angle between the two centre planes from a right
    /// angle (radians).
    pub centre_plane_angle: f64,
}

/// Concurrency residuals of the planes `l(i, j) ∨ l(i, j+1)` for each `j`.
fn concurrency_of(net: &PceNet) -> Result<f64> {
    let mut worst = 0.0f64;
    for j in 0..net.cols - 1 {
        let p = column_planes(net, j)?;
        worst = worst.max(projlin::meet_spectrum(&p.iter().collect::<Vec<_>>())?[0]);
    }
    Ok(worst)
}

fn poles_plane(net: &PceNet) -> Result<(f64, DMatrix<f64>)> {
    let j_form = net.space.form();
    let mut poles = Vec::new();
    for j in 0..net.cols {
        let h = column_span(net, j)?.complement();
        poles.push(&j_form * h.column(0));
    }
    let m = unit_columns(&poles);
    let (u, s) = projlin::svd_left(&m);
    let res = if s.len() > 3 { s[3] / s[0] } else { 0.0 };
    Ok((res, u.columns(0, 3).into_owned()))
}

fn common_points(net: &PceNet) -> Result<(CommonPoints, Vec<DVector<f64>>)> {
    let space = &net.space;
    let ms = space.moebius();
    let spans = (0..net.cols).map(|j| column_span(net, j)).collect::<Result<Vec<_>>>()?;
    let (x, _) = projlin::meet_dim(&spans.iter().collect::<Vec<_>>(), 2)?;
    let (line, _) = projlin::meet_dim(&[&x, &space.point_complex()], 1)?;
    let d = space.dim();
    let m1 = line.basis().column(0).rows(0, d - 1).into_owned();
    let m2 = line.basis().column(1).rows(0, d - 1).into_owned();
    let (a, b, c) = (ms.lorentz(&m1, &m1), ms.lorentz(&m1, &m2), ms.lorentz(&m2, &m2));
    let disc = (b * b - a * c) / (a.abs() + b.abs() + c.abs()).powi(2);
    let spheres = (0..net.cols)
        .map(|j| {
            let pts: Vec<DVector<f64>> = (0..net.rows).map(|i| net.at(i, j).point.clone()).collect();
            sphere_fit(ms, &pts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut residual = 0.0f64;
    if disc > 0.0 {
        let y1 = space.embed(&m1);
        let y2 = space.embed(&m2);
        for y in isotropic_directions(space, &y1, &y2) {
            if let Ok(Projected::Finite(pt)) = ms.project_vector(&y.rows(0, d - 1).into_owned()) {
                for s in &spheres {
                    if let (Some(cn), Some(r2)) = (&s.center, s.radius2) {
                        let dd = (&pt - cn).norm_squared();
                        residual = residual.max((dd - r2).abs() / (dd + r2.abs()));
                    }
                }
                points.push(pt);
            }
        }
    }
    let centres = spheres
        .iter()
        .enumerate()
        .map(|(j, s)| s.center.clone().ok_or(GeomError::NonGeneric(format!("points of column {j} lie on a plane"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((CommonPoints { real: disc > 0.0, discriminant: disc, points, residual }, centres))
}

/// Checks a principal contact element net with two families of spherical
/// parameter lines in `R^3`.
pub fn two_family_check(net: &PceNet) -> Result<TwoFamilyCheck> {
    let space = &net.space;
    space.require_three()?;
    if net.rows < 5 || net.cols < 5 {
        return Err(GeomError::GridTooSmall(format!("two-family checks need a 5x5 grid, got {}x{}", net.rows, net.cols)));
    }
    let t = net.transposed();
    for (name, fam) in [("columns", net), ("rows", &t)] {
        for j in 0..fam.cols {
            let c = spherical_line_check(fam, j)?;
            if !c.spherical_lines {
                return Err(GeomError::Hypothesis(format!("{name}: parameter line {j} is not spherical")));
            }
        }
        let conc = concurrency_of(fam)?;
        if conc > DIM_TOL {
            return Err(GeomError::Hypothesis(format!("{name}: neighbouring planes are not concurrent ({conc:e})")));
        }
    }
    let lc = net.lines();
    let laplace_a2 = qnet::classify_congruence(&lc, Direction::A, 2)?;
    let laplace_b2 = qnet::classify_congruence(&lc, Direction::B, 2)?;
    let (col_poles_plane, bx) = poles_plane(net)?;
    let (row_poles_plane, by) = poles_plane(&t)?;
    let conjugacy = (bx.transpose() * space.form() * &by).amax();
    let (col_common_points, col_centres) = common_points(net)?;
    let (row_common_points, row_centres) = common_points(&t)?;
    let (col_centre_plane, n1) = coplanarity(&col_centres);
    let (row_centre_plane, n2) = coplanarity(&row_centres);
    let centre_plane_angle = n1.dot(&n2).abs().min(1.0).asin();
    Ok(TwoFamilyCheck {
        laplace_a2,
        laplace_b2,
        col_poles_plane,
        row_poles_plane,
        conjugacy,
        col_common_points,
        row_common_points,
        col_centre_plane,
        row_centre_plane,
        centre_plane_angle,
    })
}

// ---------------------------------------------------------------------------
// the last line of a square congruence

/// Both sides of the corner criterion for an `m × m` line congruence in a
/// quadric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CongruenceCornerReport {
    pub m: usize,
    /// Largest restricted-form entry of the last line.
    pub containment: f64,
    /// Largest form value between bases of `L_A^(m-1) l` and `L_B^(m-1) l`.
    pub conjugacy: f64,
    pub lhs: bool,
    pub rhs: bool,
}

fn line_form(q: &Quadric, a: &Subspace, b: &Subspace) -> f64 {
    (a.basis().transpose() * q.form() * b.basis()).amax()
}

/// Evaluates "the last line lies in `q`" and "`L_A^(m-1) l` and
/// `L_B^(m-1) l` are conjugate" independently.
pub fn congruence_corner(lc: &LineCongruence, q: &Quadric) -> Result<CongruenceCornerReport> {
    let m = lc.rows();
    if lc.cols() != m || m < 2 {
        return Err(GeomError::Invalid(format!("expected a square congruence, got {}x{}", lc.rows(), lc.cols())));
    }
    for i in 0..m {
        for j in 0..m {
            if (i, j) != (m - 1, m - 1) && line_form(q, lc.at(i, j), lc.at(i, j)) > projlin::INCIDENCE_TOL {
                return Err(GeomError::Hypothesis(format!("line ({i},{j}) is not in the quadric")));
            }
        }
    }
    let a = qnet::congruence_laplace_power(lc, Direction::A, m - 1)?;
    let b = qnet::congruence_laplace_power(lc, Direction::B, m - 1)?;
    let containment = line_form(q, lc.at(m - 1, m - 1), lc.at(m - 1, m - 1));
    let conjugacy = line_form(q, a.at(0, 0), b.at(0, 0));
    Ok(CongruenceCornerReport {
        m,
        containment,
        conjugacy,
        lhs: containment < projlin::INCIDENCE_TOL,
        rhs: conjugacy < projlin::INCIDENCE_TOL,
    })
}

// ---------------------------------------------------------------------------
// random constructions

fn random_unit(n: usize, rng: &mut Rng) -> DVector<f64> {
    loop {
        let v = sample::gaussian_vector(n, rng);
        let nv = v.norm();
        if nv > 1e-3 {
            return v / nv;
        }
    }
}

/// Random oriented plane through `p`.
pub fn random_plane_through(p: &DVector<f64>, rng: &mut Rng) -> OrientedPlane {
    OrientedPlane::through(p, &random_unit(p.len(), rng)).expect("unit normal")
}

/// Extends a circular net with a random seed plane.
pub fn random_pce(net: &CircularNet, rng: &mut Rng) -> Result<(PceNet, PceReport)> {
    let seed = random_plane_through(net.point(0, 0), rng);
    extend_to_pce(net, &seed)
}

/// Random principal contact element net over a circular net whose columns
/// lie on spheres; the planes `l(i, j) ∨ l(i, j+1)` are generically not
/// concurrent.
pub fn alternating_net(rows: usize, cols: usize, rng: &mut Rng) -> Result<PceNet> {
    let ms = MoebiusSpace::new(3)?;
    let pair = ConstraintPair::new(LineKind::Free, LineKind::Spherical(2));
    let mut last = GeomError::NonGeneric("no attempt".into());
    for _ in 0..MAX_RETRIES {
        let attempt = moebius::construct(&ms, pair, rows, cols, rng).and_then(|(net, _)| random_pce(&net, rng));
        match attempt {
            Ok((pce, _)) => return Ok(pce),
            Err(e) => last = e,
        }
    }
    Err(GeomError::NonGeneric(format!("no generic net after {MAX_RETRIES} attempts: {last}")))
}

/// Random non-isotropic reflection centre: an oriented sphere of moderate
/// size pushed off the Lie quadric.
fn random_centre(space: &LieSpace, rng: &mut Rng) -> DVector<f64> {
    loop {
        let c = sample::gaussian_vector(space.n(), rng) * 0.7;
        let r2 = sample::uniform(rng, 1.0, 4.0);
        let s = sample::uniform(rng, -1.0, 1.0);
        let mut x = space.embed(&space.moebius.sphere_vector(&c, r2));
        x[space.dim() - 1] = s;
        if space.inner(&x, &x).abs() > 0.2 * x.norm_squared() / (1.0 + c.norm_squared()) {
            return x;
        }
    }
}

fn tame(net: &PceNet) -> bool {
    let ok_point = |p: &DVector<f64>| p.norm() <= moebius::EUCLID_BOUND;
    for i in 0..net.rows {
        for j in 0..net.cols {
            let p = &net.at(i, j).point;
            if !ok_point(p) {
                return false;
            }
            if i + 1 < net.rows && (p - &net.at(i + 1, j).point).norm() < moebius::MIN_SEPARATION {
                return false;
            }
            if j + 1 < net.cols && (p - &net.at(i, j + 1).point).norm() < moebius::MIN_SEPARATION {
                return false;
            }
        }
    }
    true
}

fn retry<T>(mut f: impl FnMut() -> Result<T>) -> Result<T> {
    let mut last = GeomError::NonGeneric("no attempt".into());
    for _ in 0..MAX_RETRIES {
        match f() {
            Ok(v) => return Ok(v),
            Err(e) => last = e,
        }
    }
    Err(GeomError::NonGeneric(format!("no generic net after {MAX_RETRIES} attempts: {last}")))
}

/// Random net with one family of spherical parameter lines: a spherical
/// column of contact elements, and each further column the image of the
/// previous one under the Lie reflection in a random point `O_j`, which is
/// then the concurrency point of the planes `l(i, j) ∨ l(i, j+1)`.
pub fn one_family_net(rows: usize, cols: usize, rng: &mut Rng) -> Result<PceNet> {
    let space = LieSpace::new(3)?;
    retry(|| {
        let c = sample::gaussian_vector(3, rng) * 0.5;
        let r = sample::uniform(rng, 1.0, 2.0);
        let pts: Vec<DVector<f64>> = (0..rows).map(|_| &c + random_unit(3, rng) * r).collect();
        let mut planes = vec![random_plane_through(&pts[0], rng)];
        for i in 1..rows {
            let e = planes[i - 1].reflect(&pts[i - 1], &pts[i])?;
            planes.push(e);
        }
        let first = (0..rows)
            .map(|i| ContactElement::new(&space, &pts[i], &planes[i]).map(|e| e.line))
            .collect::<Result<Vec<_>>>()?;
        let mut grid = vec![first];
        for _ in 1..cols {
            let o = random_centre(&space, rng);
            let prev = grid.last().expect("nonempty");
            let next = prev.iter().map(|l| space.reflect_subspace(&o, l)).collect::<Result<Vec<_>>>()?;
            grid.push(next);
        }
        let lines: Vec<Subspace> = (0..rows).flat_map(|i| grid.iter().map(move |col| col[i].clone())).collect();
        let net = PceNet::from_lines(&space, rows, cols, &lines)?;
        if !tame(&net) {
            return Err(GeomError::NonGeneric("vertex too far or too close".into()));
        }
        Ok(net)
    })
}

/// Random net with two families of spherical parameter lines:
/// `l(i, j) = R_{O_{j-1}} ⋯ R_{O_0} R_{O'_{i-1}} ⋯ R_{O'_0} l(0, 0)` with column
/// centres `O_j` in a plane `A` and row centres `O'_i` in its polar plane,
/// so that all the reflections commute.
pub fn two_family_net(rows: usize, cols: usize, rng: &mut Rng) -> Result<PceNet> {
    let space = LieSpace::new(3)?;
    let j_form = space.form();
    retry(|| {
        let a = DMatrix::from_columns(&[random_centre(&space, rng), random_centre(&space, rng), random_centre(&space, rng)]);
        let a = projlin::range_basis(&a, 1e-10);
        if a.ncols() != 3 {
            return Err(GeomError::NonGeneric("degenerate plane of centres".into()));
        }
        let b = projlin::null_basis(&(a.transpose() * &j_form), 1e-10);
        let draw = |basis: &DMatrix<f64>, rng: &mut Rng| -> Result<DVector<f64>> {
            for _ in 0..100 {
                let x = basis * sample::gaussian_vector(3, rng);
                if space.inner(&x, &x).abs() > 0.1 * x.norm_squared() {
                    return Ok(x);
                }
            }
            Err(GeomError::NonGeneric("plane of centres is nearly isotropic".into()))
        };
        let col_centres = (1..cols).map(|_| draw(&a, rng)).collect::<Result<Vec<_>>>()?;
        let row_centres = (1..rows).map(|_| draw(&b, rng)).collect::<Result<Vec<_>>>()?;
        let p = sample::gaussian_vector(3, rng) * 0.5;
        let l00 = ContactElement::new(&space, &p, &random_plane_through(&p, rng))?.line;
        let mut first = vec![l00];
        for o in &row_centres {
            let next = space.reflect_subspace(o, first.last().expect("nonempty"))?;
            first.push(next);
        }
        let mut lines = vec![first[0].clone(); rows * cols];
        for i in 0..rows {
            let mut cur = first[i].clone();
            lines[i * cols] = cur.clone();
            for (j, o) in col_centres.iter().enumerate() {
                cur = space.reflect_subspace(o, &cur)?;
                lines[i * cols + j + 1] = cur.clone();
            }
        }
        let net = PceNet::from_lines(&space, rows, cols, &lines)?;
        if !tame(&net) {
            return Err(GeomError::NonGeneric("vertex too far or too close".into()));
        }
        Ok(net)
    })
}
