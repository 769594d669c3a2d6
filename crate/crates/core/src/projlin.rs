//! Projective linear algebra over homogeneous coordinates.
//!
//! Points, subspaces and quadrics of real projective space `RP^n`, together
//! with joins, meets, polarity, restriction, signatures, second intersections
//! of lines with quadrics, pencils and quadric fitting. Every rank decision
//! goes through singular values with the relative threshold returned by
//! [`rank_tol`].

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

/// Default relative rank threshold.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Default threshold for incidence and conjugacy residuals.
pub const INCIDENCE_TOL: f64 = 1e-8;

static RANK_TOL_BITS: AtomicU64 = AtomicU64::new(0);

/// Current relative rank threshold.
pub fn rank_tol() -> f64 {
    match RANK_TOL_BITS.load(Ordering::Relaxed) {
        0 => DEFAULT_RANK_TOL,
        bits => f64::from_bits(bits),
    }
}

/// Overrides the relative rank threshold for the whole process.
/// Passing a non-positive value restores the default.
pub fn set_rank_tol(tol: f64) {
    let bits = if tol > 0.0 && tol.is_finite() { tol.to_bits() } else { 0 };
    RANK_TOL_BITS.store(bits, Ordering::Relaxed);
}

// ---------------------------------------------------------------------------
// dense kernels

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Singular value decomposition with singular values sorted descending.
/// Returns `(u, s, v)` with `u` square of size `nrows`, `v` square of size
/// `ncols` and `ncols` singular values (zero padded when `nrows < ncols`).
pub fn svd_full(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (DMatrix::identity(m.nrows(), m.nrows()), Vec::new(), DMatrix::identity(m.ncols(), m.ncols()));
    }
    let svd = to_faer(m).svd().expect("svd converges");
    let mut s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    s.resize(m.ncols(), 0.0);
    (from_faer(svd.U()), s, from_faer(svd.V()))
}

/// Left singular vectors and singular values, sorted descending, without
/// padding (`u` has `min(rows, cols)` columns).
pub fn svd_left(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (DMatrix::zeros(m.nrows(), 0), Vec::new());
    }
    let svd = to_faer(m).thin_svd().expect("svd converges");
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    (from_faer(svd.U()), s)
}

/// Singular values sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer(m).singular_values().expect("svd converges")
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    to_faer(m).self_adjoint_eigenvalues(faer::Side::Lower).expect("eigensolver converges")
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and
/// orthonormal eigenvectors as columns.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = to_faer(m).self_adjoint_eigen(faer::Side::Lower).expect("eigensolver converges");
    let vals: Vec<f64> = e.S().column_vector().iter().copied().collect();
    (vals, from_faer(e.U()))
}

/// Complex eigenvalues `(re, im)` of a general square matrix.
pub fn general_eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    to_faer(m).eigenvalues().expect("eigensolver converges").iter().map(|z| (z.re, z.im)).collect()
}

/// Numerical rank of `m` relative to its largest singular value.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * smax).count()
}

/// Orthonormal basis of the column space of `m`.
pub fn range_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let (u, s) = svd_left(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 { 0 } else { s.iter().filter(|&&x| x > tol * smax).count() };
    u.columns(0, rank.min(u.ncols())).into_owned()
}

/// Orthonormal basis of `{x : m x = 0}`.
pub fn null_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let c = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let (_, s, v) = svd_full(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let idx: Vec<usize> = (0..c).filter(|&k| smax == 0.0 || s[k] <= tol * smax).collect();
    let mut out = DMatrix::zeros(c, idx.len());
    for (dst, &k) in idx.iter().enumerate() {
        out.set_column(dst, &v.column(k));
    }
    out
}

/// The `k` right singular vectors of `m` with smallest singular values, and
/// all singular values in ascending order, relative to the largest one.
pub fn smallest_right_vectors(m: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let c = m.ncols();
    let (_, s, v) = svd_full(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let scale = if smax > 0.0 { smax } else { 1.0 };
    let k = k.min(c);
    let mut out = DMatrix::zeros(c, k);
    for t in 0..k {
        out.set_column(t, &v.column(c - 1 - t));
    }
    let asc: Vec<f64> = s.iter().rev().map(|x| x / scale).collect();
    (out, asc)
}

fn unit(v: &DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v.clone()
    }
}

fn check_ambient(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(GeomError::DimensionMismatch { expected, found });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// points

/// A point of `RP^n`, stored as a unit vector whose first significant
/// coordinate is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HPoint {
    coords: DVector<f64>,
}

impl HPoint {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !(norm > 0.0) || !norm.is_finite() || coords.len() < 2 {
            return Err(GeomError::ZeroVector);
        }
        let mut c = coords / norm;
        if let Some(first) = c.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                c.neg_mut();
            }
        }
        Ok(HPoint { coords: c })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    /// Projective dimension of the ambient space.
    pub fn ambient(&self) -> usize {
        self.coords.len() - 1
    }

    /// Sign-invariant chordal distance `min(|x - y|, |x + y|)`.
    pub fn distance(&self, other: &HPoint) -> f64 {
        chordal(&self.coords, &other.coords)
    }

    pub fn to_subspace(&self) -> Subspace {
        Subspace { basis: DMatrix::from_column_slice(self.coords.len(), 1, self.coords.as_slice()) }
    }
}

impl TryFrom<Vec<f64>> for HPoint {
    type Error = GeomError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        HPoint::from_slice(&v)
    }
}

impl From<HPoint> for Vec<f64> {
    fn from(p: HPoint) -> Vec<f64> {
        p.coords.iter().copied().collect()
    }
}

/// Chordal distance between the lines spanned by two vectors.
pub fn chordal(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let a = unit(x);
    let b = unit(y);
    (&a - &b).norm().min((&a + &b).norm())
}

// ---------------------------------------------------------------------------
// subspaces

/// A projective subspace, stored as an orthonormal basis of its linear span.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Span of the given column vectors; rank decided by [`rank_tol`].
    pub fn from_columns(cols: &DMatrix<f64>) -> Result<Self> {
        let b = range_basis(cols, rank_tol());
        if b.ncols() == 0 {
            return Err(GeomError::ZeroVector);
        }
        Ok(Subspace { basis: b })
    }

    pub fn from_points(points: &[&HPoint]) -> Result<Self> {
        let m = stack_points(points)?;
        Self::from_columns(&m)
    }

    /// Span of the points, truncated to projective dimension `k` (the best
    /// rank `k+1` approximation). Returns the subspace and the relative
    /// singular value that was discarded.
    pub fn from_points_dim(points: &[&HPoint], k: usize) -> Result<(Self, f64)> {
        let m = stack_points(points)?;
        let (u, s) = svd_left(&m);
        if k + 1 > s.len() {
            return Err(GeomError::NonGeneric(format!(
                "{} points cannot span dimension {k}",
                points.len()
            )));
        }
        let smax = s[0].max(f64::MIN_POSITIVE);
        let dropped = s.get(k + 1).copied().unwrap_or(0.0) / smax;
        Ok((Subspace { basis: u.columns(0, k + 1).into_owned() }, dropped))
    }

    /// The whole space `RP^n`.
    pub fn whole(n: usize) -> Self {
        Subspace { basis: DMatrix::identity(n + 1, n + 1) }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Projective dimension.
    pub fn dim(&self) -> usize {
        self.basis.ncols() - 1
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows() - 1
    }

    /// Distance of a point to the subspace: norm of the orthogonal residual
    /// of its unit representative.
    pub fn residual(&self, p: &HPoint) -> f64 {
        self.residual_vec(p.coords())
    }

    pub fn residual_vec(&self, x: &DVector<f64>) -> f64 {
        let x = unit(x);
        let proj = &self.basis * (self.basis.transpose() * &x);
        (x - proj).norm()
    }

    /// Orthonormal basis of the orthogonal complement of the linear span.
    pub fn complement(&self) -> DMatrix<f64> {
        null_basis(&self.basis.transpose(), rank_tol())
    }

    /// Frobenius distance between orthogonal projectors.
    pub fn distance(&self, other: &Subspace) -> f64 {
        let p1 = &self.basis * self.basis.transpose();
        let p2 = &other.basis * other.basis.transpose();
        (p1 - p2).norm()
    }

    /// The point, when the subspace has dimension 0.
    pub fn as_point(&self) -> Option<HPoint> {
        if self.basis.ncols() == 1 {
            HPoint::new(self.basis.column(0).into_owned()).ok()
        } else {
            None
        }
    }

    /// Point with coordinates `coeffs` relative to the basis.
    pub fn point_at(&self, coeffs: &DVector<f64>) -> Result<HPoint> {
        HPoint::new(&self.basis * coeffs)
    }
}

/// Stacks unit representatives as columns, checking a shared ambient.
pub fn stack_points(points: &[&HPoint]) -> Result<DMatrix<f64>> {
    let first = points.first().ok_or(GeomError::Invalid("no points".into()))?;
    let d = first.coords().len();
    let mut m = DMatrix::zeros(d, points.len());
    for (k, p) in points.iter().enumerate() {
        check_ambient(d - 1, p.ambient())?;
        m.set_column(k, p.coords());
    }
    Ok(m)
}

fn stack_bases(subspaces: &[&Subspace]) -> Result<DMatrix<f64>> {
    let first = subspaces.first().ok_or(GeomError::Invalid("no subspaces".into()))?;
    let d = first.basis.nrows();
    let total: usize = subspaces.iter().map(|s| s.basis.ncols()).sum();
    let mut m = DMatrix::zeros(d, total);
    let mut col = 0;
    for s in subspaces {
        check_ambient(d - 1, s.ambient())?;
        m.view_mut((0, col), (d, s.basis.ncols())).copy_from(&s.basis);
        col += s.basis.ncols();
    }
    Ok(m)
}

fn stack_complements(subspaces: &[&Subspace]) -> Result<DMatrix<f64>> {
    let first = subspaces.first().ok_or(GeomError::Invalid("no subspaces".into()))?;
    let d = first.basis.nrows();
    let comps: Vec<DMatrix<f64>> = subspaces
        .iter()
        .map(|s| {
            check_ambient(d - 1, s.ambient())?;
            Ok(s.complement())
        })
        .collect::<Result<_>>()?;
    let total: usize = comps.iter().map(|c| c.ncols()).sum();
    let mut m = DMatrix::zeros(d, total);
    let mut col = 0;
    for c in &comps {
        m.view_mut((0, col), (d, c.ncols())).copy_from(c);
        col += c.ncols();
    }
    Ok(m)
}

/// Smallest subspace containing all inputs.
pub fn join(subspaces: &[&Subspace]) -> Result<Subspace> {
    let m = stack_bases(subspaces)?;
    Subspace::from_columns(&m)
}

/// Join truncated to projective dimension `k`; also returns the relative
/// size of the first discarded singular value.
pub fn join_dim(subspaces: &[&Subspace], k: usize) -> Result<(Subspace, f64)> {
    let m = stack_bases(subspaces)?;
    let (u, s) = svd_left(&m);
    if k + 1 > s.len().min(m.nrows()) {
        return Err(GeomError::NonGeneric(format!("join cannot reach dimension {k}")));
    }
    let smax = s[0].max(f64::MIN_POSITIVE);
    let dropped = s.get(k + 1).copied().unwrap_or(0.0) / smax;
    Ok((Subspace { basis: u.columns(0, k + 1).into_owned() }, dropped))
}

/// Intersection of all inputs, as the complement of the join of complements.
pub fn meet(subspaces: &[&Subspace]) -> Result<Subspace> {
    meet_tol(subspaces, rank_tol())
}

/// [`meet`] with an explicit relative rank threshold.
pub fn meet_tol(subspaces: &[&Subspace], tol: f64) -> Result<Subspace> {
    let w = stack_complements(subspaces)?;
    if w.ncols() == 0 {
        return Ok(subspaces[0].clone());
    }
    let null = null_basis(&w.transpose(), tol);
    if null.ncols() == 0 {
        return Err(GeomError::EmptyMeet);
    }
    Ok(Subspace { basis: null })
}

/// Least-squares meet of expected projective dimension `k`: the `k+1`
/// directions closest to all inputs. Returns the subspace and the residual,
/// the largest retained singular value of the stacked complement system
/// relative to the largest one (zero for an exact meet).
pub fn meet_dim(subspaces: &[&Subspace], k: usize) -> Result<(Subspace, f64)> {
    let w = stack_complements(subspaces)?;
    let d = subspaces[0].basis.nrows();
    if k + 1 > d {
        return Err(GeomError::NonGeneric(format!("meet cannot reach dimension {k}")));
    }
    if w.ncols() == 0 {
        let b = subspaces[0].basis.columns(0, (k + 1).min(subspaces[0].basis.ncols())).into_owned();
        return Ok((Subspace { basis: b }, 0.0));
    }
    let (v, asc) = smallest_right_vectors(&w.transpose(), k + 1);
    let residual = asc[k];
    Ok((Subspace { basis: range_basis(&v, 1e-14) }, residual))
}

/// Singular values (ascending, relative to the largest) of the stacked
/// complement system of a meet; the number of near-zero values is the
/// dimension of the meet plus one.
pub fn meet_spectrum(subspaces: &[&Subspace]) -> Result<Vec<f64>> {
    let w = stack_complements(subspaces)?;
    let d = subspaces[0].basis.nrows();
    if w.ncols() == 0 {
        return Ok(vec![0.0; d]);
    }
    let (_, asc) = smallest_right_vectors(&w.transpose(), 0);
    Ok(asc)
}

// ---------------------------------------------------------------------------
// quadrics

/// A quadric hypersurface, given by a symmetric form of unit Frobenius norm
/// whose largest-magnitude diagonal entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadric {
    form: DMatrix<f64>,
}

impl Quadric {
    pub fn new(form: DMatrix<f64>) -> Result<Self> {
        if !form.is_square() {
            return Err(GeomError::Invalid("quadric form must be square".into()));
        }
        let sym = (&form + form.transpose()) * 0.5;
        let norm = sym.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(GeomError::ZeroVector);
        }
        let mut f = sym / norm;
        let mut best = 0;
        for k in 1..f.nrows() {
            if f[(k, k)].abs() > f[(best, best)].abs() + 1e-15 {
                best = k;
            }
        }
        if f[(best, best)] < 0.0 {
            f.neg_mut();
        }
        Ok(Quadric { form: f })
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn form(&self) -> &DMatrix<f64> {
        &self.form
    }

    pub fn ambient(&self) -> usize {
        self.form.nrows() - 1
    }

    /// Canonical bilinear form on unit representatives.
    pub fn phi(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let a = unit(x);
        let b = unit(y);
        a.dot(&(&self.form * b))
    }

    /// `|phi(p, p)|` on the unit representative.
    pub fn incidence(&self, p: &HPoint) -> f64 {
        self.phi(p.coords(), p.coords()).abs()
    }
}

/// Result of a conjugacy test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conjugacy {
    pub residual: f64,
    pub conjugate: bool,
}

/// Conjugacy of two points with respect to a quadric.
pub fn conjugate(a: &HPoint, b: &HPoint, q: &Quadric) -> Result<Conjugacy> {
    check_ambient(q.ambient(), a.ambient())?;
    check_ambient(q.ambient(), b.ambient())?;
    let residual = q.phi(a.coords(), b.coords()).abs();
    Ok(Conjugacy { residual, conjugate: residual < INCIDENCE_TOL })
}

/// Subspace of points conjugate to every point of `s`.
pub fn polar(s: &Subspace, q: &Quadric) -> Result<Subspace> {
    check_ambient(q.ambient(), s.ambient())?;
    let fb = q.form() * s.basis();
    let rank = numerical_rank(&fb, rank_tol());
    let sv = singular_values(&fb);
    let expected = s.basis().ncols();
    if rank < expected || sv[0] < rank_tol() {
        return Err(GeomError::PolarUndefined { rank, expected });
    }
    let null = null_basis(&fb.transpose(), rank_tol());
    if null.ncols() == 0 {
        return Err(GeomError::EmptyMeet);
    }
    Ok(Subspace { basis: null })
}

/// Restriction of a quadric to a subspace.
#[derive(Debug, Clone, PartialEq)]
pub enum Restriction {
    /// The restricted form in the subspace's orthonormal coordinates.
    Form(Quadric),
    /// The subspace lies in the quadric.
    Isotropic { max_entry: f64 },
}

impl Restriction {
    pub fn is_isotropic(&self) -> bool {
        matches!(self, Restriction::Isotropic { .. })
    }
}

pub fn restrict(q: &Quadric, s: &Subspace) -> Result<Restriction> {
    check_ambient(q.ambient(), s.ambient())?;
    let r = s.basis().transpose() * q.form() * s.basis();
    let max_entry = r.amax();
    if max_entry < rank_tol() {
        return Ok(Restriction::Isotropic { max_entry });
    }
    Ok(Restriction::Form(Quadric::new(r)?))
}

/// Inertia of a symmetric form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
    pub r: usize,
}

impl Signature {
    /// Projective dimension of the generators, `min(p, q) - 1 + r`.
    /// Negative when the quadric has no real points.
    pub fn generator_dim(&self) -> i64 {
        self.p.min(self.q) as i64 - 1 + self.r as i64
    }
}

pub fn signature(q: &Quadric) -> Signature {
    signature_tol(q.form(), rank_tol())
}

/// Signature of a symmetric matrix with relative zero threshold `tol`.
pub fn signature_tol(form: &DMatrix<f64>, tol: f64) -> Signature {
    let eig = symmetric_eigenvalues(form);
    let lmax = eig.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let thr = tol * lmax;
    let mut s = Signature { p: 0, q: 0, r: 0 };
    for &l in eig.iter() {
        if lmax == 0.0 || l.abs() <= thr {
            s.r += 1;
        } else if l > 0.0 {
            s.p += 1;
        } else {
            s.q += 1;
        }
    }
    s
}

/// Output of [`second_intersection`].
#[derive(Debug, Clone, PartialEq)]
pub struct SecondIntersection {
    pub point: HPoint,
    /// The line touches the quadric at `p`; `point` then equals `p`.
    pub tangent: bool,
    /// `|b| / (|b| + |c|)` for the restricted form: small values mean
    /// near-tangency and an ill-conditioned intersection.
    pub transversality: f64,
}

/// The second point of `line ∩ q`, given one point `p` of it.
pub fn second_intersection(line: &Subspace, p: &HPoint, q: &Quadric) -> Result<SecondIntersection> {
    check_ambient(q.ambient(), line.ambient())?;
    check_ambient(q.ambient(), p.ambient())?;
    if line.dim() != 1 {
        return Err(GeomError::Invalid(format!("expected a line, got dimension {}", line.dim())));
    }
    let on_line = line.residual(p);
    if on_line > INCIDENCE_TOL {
        return Err(GeomError::NotOnLine { residual: on_line });
    }
    let x = p.coords().clone();
    let a = q.phi(&x, &x);
    if a.abs() > INCIDENCE_TOL {
        return Err(GeomError::NotOnQuadric { residual: a.abs() });
    }
    let b0 = line.basis().column(0).into_owned();
    let b1 = line.basis().column(1).into_owned();
    let r0 = &b0 - &x * x.dot(&b0);
    let r1 = &b1 - &x * x.dot(&b1);
    let u = if r0.norm() >= r1.norm() { unit(&r0) } else { unit(&r1) };
    let f = q.form();
    let b = x.dot(&(f * &u));
    let c = u.dot(&(f * &u));
    let tol = rank_tol();
    if b.abs().max(c.abs()) < tol {
        return Err(GeomError::IsotropicLine);
    }
    let disc = b * b - a * c;
    let transversality = b.abs() / (b.abs() + c.abs());
    if disc < tol * c * c || b.abs() < tol {
        return Ok(SecondIntersection { point: p.clone(), tangent: true, transversality });
    }
    let t = -b - b.signum() * disc.max(0.0).sqrt();
    let y = &x * c + &u * t;
    Ok(SecondIntersection { point: HPoint::new(y)?, tangent: false, transversality })
}

// ---------------------------------------------------------------------------
// pencils

/// The pencil `{λ a + μ b}`. The raw forms are kept, so that pencil
/// parameters refer to the matrices as given.
#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl Pencil {
    pub fn new(a: &Quadric, b: &Quadric) -> Result<Self> {
        Self::from_forms(a.form().clone(), b.form().clone())
    }

    pub fn from_forms(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.shape() != b.shape() || !a.is_square() {
            return Err(GeomError::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
        }
        let a = (&a + a.transpose()) * 0.5;
        let b = (&b + b.transpose()) * 0.5;
        let (na, nb) = (a.norm(), b.norm());
        if na == 0.0 || nb == 0.0 {
            return Err(GeomError::ZeroVector);
        }
        let ua = &a / na;
        let ub = &b / nb;
        if (&ua - &ub).norm().min((&ua + &ub).norm()) < 1e-9 {
            return Err(GeomError::ProportionalForms);
        }
        Ok(Pencil { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn member(&self, lambda: f64, mu: f64) -> DMatrix<f64> {
        &self.a * lambda + &self.b * mu
    }

    pub fn size(&self) -> usize {
        self.a.nrows()
    }
}

/// A real degenerate member of a pencil.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateMember {
    /// Unit parameter `[λ : μ]`, first significant entry positive.
    pub lambda: f64,
    pub mu: f64,
    /// The raw member `λ a + μ b`.
    pub form: DMatrix<f64>,
    pub signature: Signature,
    pub corank: usize,
    /// Multiplicity as a root of the determinant polynomial.
    pub multiplicity: usize,
    /// Smallest singular value of the normalized member.
    pub sigma_min: f64,
}

impl DegenerateMember {
    pub fn quadric(&self) -> Result<Quadric> {
        Quadric::new(self.form.clone())
    }

    /// Whether `[λ : μ]` equals the given parameter projectively.
    pub fn param_matches(&self, lambda: f64, mu: f64, tol: f64) -> bool {
        chordal(&DVector::from_vec(vec![self.lambda, self.mu]), &DVector::from_vec(vec![lambda, mu])) < tol
    }
}

/// Determinant polynomial of a pencil in the affine parameter `t`, for the
/// member `t a + (1 - t) b`; coefficients in increasing degree.
pub fn pencil_polynomial(p: &Pencil) -> Result<Vec<f64>> {
    let n = p.size();
    let nodes: Vec<f64> = (0..=n)
        .map(|k| ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * (n + 1)) as f64).cos())
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&t| p.member(t, 1.0 - t).determinant()).collect();
    let scale = p.a.norm().max(p.b.norm()).powi(n as i32);
    if values.iter().all(|v| v.abs() <= 1e-13 * scale) {
        return Err(GeomError::PencilDegenerate);
    }
    let vander = DMatrix::from_fn(n + 1, n + 1, |r, c| nodes[r].powi(c as i32));
    let rhs = DVector::from_vec(values);
    let coeffs = vander.lu().solve(&rhs).ok_or(GeomError::PencilDegenerate)?;
    Ok(coeffs.iter().copied().collect())
}

fn sigma_min_normalized(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    let nrm = m.norm();
    if nrm == 0.0 {
        0.0
    } else {
        s.last().copied().unwrap_or(0.0) / nrm
    }
}

fn golden_refine(p: &Pencil, t0: f64, h: f64) -> f64 {
    let f = |t: f64| sigma_min_normalized(&p.member(t, 1.0 - t));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (t0 - h, t0 + h);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo <= 1e-16 * (1.0 + t0.abs()) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(mid) <= f(t0) {
        mid
    } else {
        t0
    }
}

fn canonical_param(lambda: f64, mu: f64) -> (f64, f64) {
    let n = lambda.hypot(mu);
    let (mut l, mut m) = (lambda / n, mu / n);
    let first = if l.abs() > 1e-12 { l } else { m };
    if first < 0.0 {
        l = -l;
        m = -m;
    }
    (l, m)
}

/// Real degenerate members of a pencil, with multiplicities.
pub fn degenerate_members(p: &Pencil) -> Result<Vec<DegenerateMember>> {
    let n = p.size();
    let coeffs = pencil_polynomial(p)?;
    let cmax = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let degree = (0..=n).rev().find(|&k| coeffs[k].abs() > 1e-10 * cmax).unwrap_or(0);
    let mut roots: Vec<f64> = Vec::new();
    if degree >= 1 {
        let lead = coeffs[degree];
        let mut comp = DMatrix::zeros(degree, degree);
        for r in 1..degree {
            comp[(r, r - 1)] = 1.0;
        }
        for r in 0..degree {
            comp[(r, degree - 1)] = -coeffs[r] / lead;
        }
        for (re, im) in general_eigenvalues(&comp) {
            if im.abs() <= 1e-6 * (1.0 + re.abs()) {
                roots.push(re);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    for r in roots {
        match clusters.last_mut() {
            Some((c, k)) if (r - *c / *k as f64).abs() <= 1e-5 * (1.0 + r.abs()) => {
                *c += r;
                *k += 1;
            }
            _ => clusters.push((r, 1)),
        }
    }
    let centers: Vec<(f64, usize)> = clusters.iter().map(|(s, k)| (s / *k as f64, *k)).collect();
    let mut out = Vec::new();
    for (idx, &(t, mult)) in centers.iter().enumerate() {
        let mut gap = f64::INFINITY;
        if idx > 0 {
            gap = gap.min(t - centers[idx - 1].0);
        }
        if idx + 1 < centers.len() {
            gap = gap.min(centers[idx + 1].0 - t);
        }
        let h = (1e-3 * (1.0 + t.abs())).min(0.3 * gap);
        let t = golden_refine(p, t, h);
        let (l, m) = canonical_param(t, 1.0 - t);
        out.push(build_member(p, l, m, mult));
    }
    if degree < n {
        let (l, m) = canonical_param(1.0, -1.0);
        out.push(build_member(p, l, m, n - degree));
    }
    Ok(out)
}

fn build_member(p: &Pencil, lambda: f64, mu: f64, multiplicity: usize) -> DegenerateMember {
    let form = p.member(lambda, mu);
    let nrm = form.norm().max(f64::MIN_POSITIVE);
    let normalized = &form / nrm;
    let tol = rank_tol().max(1e-8);
    let s = singular_values(&normalized);
    let smax = s[0];
    let corank = s.iter().filter(|&&x| x <= tol * smax).count();
    let signature = signature_tol(&normalized, tol);
    DegenerateMember {
        lambda,
        mu,
        form,
        signature,
        corank,
        multiplicity,
        sigma_min: s.last().copied().unwrap_or(0.0) / smax,
    }
}

// ---------------------------------------------------------------------------
// quadric fitting

fn sym_index_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d {
        for b in a..d {
            v.push((a, b));
        }
    }
    v
}

fn bilinear_row(x: &DVector<f64>, y: &DVector<f64>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(a, b)| if a == b { x[a] * y[a] } else { x[a] * y[b] + x[b] * y[a] })
        .collect()
}

/// Linear conditions on the upper-triangular coefficients of a form in
/// `d` variables: one row per point, one per basis pair of each subspace.
pub fn quadric_constraint_matrix(points: &[&HPoint], isotropic: &[&Subspace], d: usize) -> Result<DMatrix<f64>> {
    let pairs = sym_index_pairs(d);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for p in points {
        check_ambient(d - 1, p.ambient())?;
        rows.push(bilinear_row(p.coords(), p.coords(), &pairs));
    }
    for s in isotropic {
        check_ambient(d - 1, s.ambient())?;
        let b = s.basis();
        for i in 0..b.ncols() {
            for j in i..b.ncols() {
                let bi = b.column(i).into_owned();
                let bj = b.column(j).into_owned();
                rows.push(bilinear_row(&bi, &bj, &pairs));
            }
        }
    }
    let m = DMatrix::from_fn(rows.len(), pairs.len(), |r, c| rows[r][c]);
    Ok(m)
}

/// Symmetric form from upper-triangular coefficients, in the order of
/// [`quadric_constraint_matrix`].
pub fn form_from_coeffs(c: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let pairs = sym_index_pairs(d);
    let mut f = DMatrix::zeros(d, d);
    for (k, &(a, b)) in pairs.iter().enumerate() {
        f[(a, b)] = c[k];
        f[(b, a)] = c[k];
    }
    f
}

/// The unique quadric through the points that contains the given subspaces.
pub fn quadric_through(points: &[&HPoint], isotropic: &[&Subspace]) -> Result<Quadric> {
    let d = points
        .first()
        .map(|p| p.coords().len())
        .or_else(|| isotropic.first().map(|s| s.basis().nrows()))
        .ok_or(GeomError::Invalid("no constraints".into()))?;
    let m = quadric_constraint_matrix(points, isotropic, d)?;
    let null = null_basis(&m, rank_tol());
    match null.ncols() {
        0 => Err(GeomError::OverConstrained),
        1 => Quadric::new(form_from_coeffs(&null.column(0).into_owned(), d)),
        k => Err(GeomError::UnderDetermined { dim: k }),
    }
}

/// Least-squares quadric fit.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadricFit {
    pub quadric: Quadric,
    /// Smallest singular value of the constraint system, relative.
    pub residual: f64,
    /// Second smallest singular value, relative; a large gap certifies
    /// uniqueness of the fitted quadric.
    pub gap: f64,
}

/// Best quadric through the points containing the given subspaces, in the
/// least-squares sense on unit-normalized coefficient vectors.
pub fn fit_quadric(points: &[&HPoint], isotropic: &[&Subspace]) -> Result<QuadricFit> {
    let d = points
        .first()
        .map(|p| p.coords().len())
        .or_else(|| isotropic.first().map(|s| s.basis().nrows()))
        .ok_or(GeomError::Invalid("no constraints".into()))?;
    let m = quadric_constraint_matrix(points, isotropic, d)?;
    let (v, asc) = smallest_right_vectors(&m, 1);
    let quadric = Quadric::new(form_from_coeffs(&v.column(0).into_owned(), d))?;
    Ok(QuadricFit { quadric, residual: asc[0], gap: asc.get(1).copied().unwrap_or(0.0) })
}

/// Dual form of a quadric as its adjugate up to scale, from the SVD, so
/// that nearly singular forms (centres far away) keep a stable dual.
pub fn dual_form(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (u, s, v) = svd_full(g);
    let last = s.len() - 1;
    if s[0] == 0.0 {
        return Err(GeomError::PencilDegenerate);
    }
    let w = DVector::from_fn(s.len(), |i, _| if i == last { 1.0 } else { s[last] / s[i] });
    Ok(&v * DMatrix::from_diagonal(&w) * u.transpose())
}

/// Residual of the best approximation of `target` in `span(members)`,
/// with all matrices normalized to unit Frobenius norm first.
pub fn span_residual(target: &DMatrix<f64>, members: &[&DMatrix<f64>]) -> f64 {
    let d = target.len();
    let t = target / target.norm();
    let mut a = DMatrix::zeros(d, members.len());
    for (k, m) in members.iter().enumerate() {
        let mm = *m / m.norm();
        a.set_column(k, &DVector::from_column_slice(mm.as_slice()));
    }
    let tv = DVector::from_column_slice(t.as_slice());
    let basis = range_basis(&a, 1e-12);
    let proj = &basis * (basis.transpose() * &tv);
    (tv - proj).norm()
}
