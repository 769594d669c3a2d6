//! Q-nets inscribed in quadrics.
//!
//! Checks of the conjugacy criterion for `m × m` nets, the meets `X` and `Y`
//! of the parameter-line spans, the termination theorems relating Goursat
//! and Laplace degeneracy, the extension algorithm for nets whose parameter
//! lines span `d`-dimensional subspaces, and the pencil of quadrics carried
//! by such nets in `RP^(2m)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::projlin::{self, HPoint, Quadric, Signature, Subspace, INCIDENCE_TOL};
use crate::qnet::{self, DegeneracyReport, Direction, QNet, DEGENERACY_TOL};
use crate::sample::{self, Rng};

/// A Q-net whose vertices lie on a quadric.
#[derive(Debug, Clone, PartialEq)]
pub struct InscribedNet {
    pub net: QNet,
    pub quadric: Quadric,
    /// Max over vertices of `|phi(P, P)|`.
    pub incidence_residual: f64,
    /// Number of edge lines contained in the quadric.
    pub isotropic_edges: usize,
}

/// Threshold below which a restricted edge form counts as isotropic.
pub const ISOTROPY_TOL: f64 = 1e-8;

impl InscribedNet {
    pub fn new(net: QNet, quadric: Quadric) -> Result<Self> {
        if net.ambient() != quadric.ambient() {
            return Err(GeomError::DimensionMismatch { expected: quadric.ambient(), found: net.ambient() });
        }
        let incidence_residual = max_incidence(&net, &quadric);
        if incidence_residual > INCIDENCE_TOL {
            return Err(GeomError::NotOnQuadric { residual: incidence_residual });
        }
        let isotropic_edges = count_isotropic_edges(&net, &quadric);
        Ok(InscribedNet { net, quadric, incidence_residual, isotropic_edges })
    }

    pub fn to_json(&self) -> InscribedNetJson {
        let q = self.net.to_json();
        InscribedNetJson {
            ambient: q.ambient,
            rows: q.rows,
            cols: q.cols,
            vertices: q.vertices,
            quadric: matrix_rows(self.quadric.form()),
        }
    }

    pub fn from_json(j: &InscribedNetJson) -> Result<Self> {
        let net = QNet::from_json(&qnet::QNetJson {
            ambient: j.ambient,
            rows: j.rows,
            cols: j.cols,
            vertices: j.vertices.clone(),
        })?;
        let q = Quadric::new(matrix_from_rows(&j.quadric)?)?;
        InscribedNet::new(net, q)
    }
}

/// Serialized form: QNet fields plus the dense row-major form.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct InscribedNetJson {
    pub ambient: usize,
    pub rows: usize,
    pub cols: usize,
    pub vertices: Vec<Vec<f64>>,
    pub quadric: Vec<Vec<f64>>,
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 || rows.iter().any(|row| row.len() != r) {
        return Err(GeomError::Invalid("matrix must be square and nonempty".into()));
    }
    Ok(DMatrix::from_fn(r, r, |a, b| rows[a][b]))
}

pub fn max_incidence(net: &QNet, q: &Quadric) -> f64 {
    net.vertices().iter().map(|p| q.incidence(p)).fold(0.0, f64::max)
}

fn edge_isotropic(a: &HPoint, b: &HPoint, q: &Quadric) -> bool {
    let (x, y) = (a.coords(), b.coords());
    let f = q.form();
    let vals = [x.dot(&(f * x)), x.dot(&(f * y)), y.dot(&(f * y))];
    vals.iter().all(|v| v.abs() < ISOTROPY_TOL)
}

fn count_isotropic_edges(net: &QNet, q: &Quadric) -> usize {
    let mut k = 0;
    for i in 0..net.rows() {
        for j in 0..net.cols() {
            if i + 1 < net.rows() && edge_isotropic(net.at(i, j), net.at(i + 1, j), q) {
                k += 1;
            }
            if j + 1 < net.cols() && edge_isotropic(net.at(i, j), net.at(i, j + 1), q) {
                k += 1;
            }
        }
    }
    k
}

// ---------------------------------------------------------------------------
// random inscribed nets

/// Minimal chordal separation of neighbouring vertices in random nets.
pub const MIN_SEPARATION: f64 = 1e-2;

fn line(a: &HPoint, b: &HPoint) -> Result<Subspace> {
    projlin::join(&[&a.to_subspace(), &b.to_subspace()])
}

fn plane(a: &HPoint, b: &HPoint, c: &HPoint) -> Result<Subspace> {
    Ok(Subspace::from_points_dim(&[a, b, c], 2)?.0)
}

/// Second intersection of a random line through `p` inside `s`, rejecting
/// near-tangent lines.
fn random_chord(s: &Subspace, p: &HPoint, q: &Quadric, rng: &mut Rng) -> Result<HPoint> {
    sample::point_on_quadric(q, s, Some(p), rng)
}

fn well_separated(net: &QNet) -> bool {
    for i in 0..net.rows() {
        for j in 0..net.cols() {
            if i + 1 < net.rows() && net.at(i, j).distance(net.at(i + 1, j)) < MIN_SEPARATION {
                return false;
            }
            if j + 1 < net.cols() && net.at(i, j).distance(net.at(i, j + 1)) < MIN_SEPARATION {
                return false;
            }
        }
    }
    true
}

/// Random Q-net inscribed in `q`: the first row and column by random chords,
/// every further vertex as the second intersection of a random line of the
/// quad plane through a known vertex.
pub fn random_inscribed_net(rows: usize, cols: usize, q: &Quadric, rng: &mut Rng) -> Result<InscribedNet> {
    let n = q.ambient();
    let whole = Subspace::whole(n);
    'retry: for _ in 0..sample::MAX_RETRIES {
        let mut v: Vec<Option<HPoint>> = vec![None; rows * cols];
        let p00 = sample::point_on_quadric(q, &whole, None, rng)?;
        v[0] = Some(p00);
        for i in 1..rows {
            let prev = v[(i - 1) * cols].clone().unwrap();
            match random_chord(&whole, &prev, q, rng) {
                Ok(p) => v[i * cols] = Some(p),
                Err(_) => continue 'retry,
            }
        }
        for j in 1..cols {
            let prev = v[j - 1].clone().unwrap();
            match random_chord(&whole, &prev, q, rng) {
                Ok(p) => v[j] = Some(p),
                Err(_) => continue 'retry,
            }
        }
        for i in 1..rows {
            for j in 1..cols {
                let a = v[(i - 1) * cols + j - 1].clone().unwrap();
                let b = v[i * cols + j - 1].clone().unwrap();
                let c = v[(i - 1) * cols + j].clone().unwrap();
                let pl = match plane(&a, &b, &c) {
                    Ok(p) => p,
                    Err(_) => continue 'retry,
                };
                match random_chord(&pl, &b, q, rng) {
                    Ok(p) => v[i * cols + j] = Some(p),
                    Err(_) => continue 'retry,
                }
            }
        }
        let net = QNet::new(rows, cols, v.into_iter().map(Option::unwrap).collect())?;
        if qnet::quad_genericity(&net) > qnet::GENERICITY_TOL && well_separated(&net) {
            if let Ok(ins) = InscribedNet::new(net, q.clone()) {
                if ins.isotropic_edges == 0 {
                    return Ok(ins);
                }
            }
        }
    }
    Err(GeomError::NonGeneric("random inscribed net failed the genericity filter".into()))
}

// ---------------------------------------------------------------------------
// conjugacy criterion

/// Both sides of the conjugacy criterion for an `m × m` net.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerConjugacyReport {
    pub m: usize,
    /// `|phi(P, P)|` for the last vertex.
    pub incidence_residual: f64,
    /// `|phi(L_A^(m-1) P, L_B^(m-1) P)|`.
    pub conjugacy_residual: f64,
    pub lhs: bool,
    pub rhs: bool,
}

/// Evaluates "last vertex on `q`" and "`L_A^(m-1) P` conjugate to
/// `L_B^(m-1) P`" independently.
pub fn check_theorem_1_1(net: &QNet, q: &Quadric) -> Result<CornerConjugacyReport> {
    let m = net.rows();
    if net.cols() != m || m < 2 {
        return Err(GeomError::Invalid(format!("expected a square net, got {}x{}", net.rows(), net.cols())));
    }
    for i in 0..m {
        for j in 0..m {
            if (i, j) != (m - 1, m - 1) && q.incidence(net.at(i, j)) > INCIDENCE_TOL {
                return Err(GeomError::Hypothesis(format!("vertex ({i},{j}) is not on the quadric")));
            }
        }
    }
    let a = qnet::laplace_power(net, Direction::A, m - 1)
        .map_err(|e| GeomError::Hypothesis(format!("A-iteration degenerates: {e}")))?;
    let b = qnet::laplace_power(net, Direction::B, m - 1)
        .map_err(|e| GeomError::Hypothesis(format!("B-iteration degenerates: {e}")))?;
    let incidence_residual = q.incidence(net.at(m - 1, m - 1));
    let conjugacy_residual = projlin::conjugate(a.at(0, 0), b.at(0, 0), q)?.residual;
    Ok(CornerConjugacyReport {
        m,
        incidence_residual,
        conjugacy_residual,
        lhs: incidence_residual < INCIDENCE_TOL,
        rhs: conjugacy_residual < INCIDENCE_TOL,
    })
}

/// Moves the last vertex of a square net off the quadric by chordal
/// distance `size`, inside the plane of its three quad neighbours, along the
/// in-plane gradient of the quadratic form.
pub fn perturb_last_vertex(net: &QNet, q: &Quadric, size: f64, rng: &mut Rng) -> Result<QNet> {
    let m = net.rows();
    if net.cols() != m || m < 2 {
        return Err(GeomError::Invalid("expected a square net".into()));
    }
    let pl = plane(net.at(m - 2, m - 2), net.at(m - 1, m - 2), net.at(m - 2, m - 1))?;
    let x = net.at(m - 1, m - 1).coords().clone();
    let b = pl.basis();
    let mut g = b * (b.transpose() * (q.form() * &x));
    g -= &x * x.dot(&g);
    if g.norm() < 1e-12 {
        // gradient tangent to the quadric inside the plane: any in-plane direction
        let r = sample::random_point_in(&pl, rng);
        g = r.coords() - &x * x.dot(r.coords());
    }
    let dir = g.normalize();
    // chordal distance between x and x + t dir is 2 sin(atan(t)/2)
    let t = (2.0 * (size / 2.0).asin()).tan();
    let mut out = net.clone();
    out.set(m - 1, m - 1, HPoint::new(&x + dir * t)?);
    Ok(out)
}

/// `X = ∩ H_j`, `Y = ∩ V_i` and their agreement with the iterated Laplace
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct XYReport {
    pub x: HPoint,
    pub y: HPoint,
    pub x_meet_residual: f64,
    pub y_meet_residual: f64,
    pub x_vs_laplace: f64,
    pub y_vs_laplace: f64,
}

/// Spans `H_j` truncated to dimension `k`.
pub fn h_spans(net: &QNet, k: usize) -> Result<Vec<Subspace>> {
    (0..net.cols()).map(|j| Ok(Subspace::from_points_dim(&net.h_points(j), k)?.0)).collect()
}

/// Spans `V_i` truncated to dimension `k`.
pub fn v_spans(net: &QNet, k: usize) -> Result<Vec<Subspace>> {
    (0..net.rows()).map(|i| Ok(Subspace::from_points_dim(&net.v_points(i), k)?.0)).collect()
}

fn point_meet(spaces: &[Subspace]) -> Result<(HPoint, f64)> {
    let refs: Vec<&Subspace> = spaces.iter().collect();
    let spec = projlin::meet_spectrum(&refs)?;
    if spec.len() > 1 && spec[1] < 1e-8 {
        return Err(GeomError::NonGeneric("meet is not a point".into()));
    }
    let (s, r) = projlin::meet_dim(&refs, 0)?;
    Ok((s.as_point().unwrap(), r))
}

pub fn corollary_xy(net: &QNet) -> Result<XYReport> {
    let m = net.rows();
    if net.cols() != m || m < 2 {
        return Err(GeomError::Invalid("expected a square net".into()));
    }
    let (x, xr) = point_meet(&h_spans(net, m - 1)?)?;
    let (y, yr) = point_meet(&v_spans(net, m - 1)?)?;
    let la = qnet::laplace_power(net, Direction::A, m - 1)?;
    let lb = qnet::laplace_power(net, Direction::B, m - 1)?;
    Ok(XYReport {
        x_vs_laplace: x.distance(la.at(0, 0)),
        y_vs_laplace: y.distance(lb.at(0, 0)),
        x,
        y,
        x_meet_residual: xr,
        y_meet_residual: yr,
    })
}

// ---------------------------------------------------------------------------
// extension of nets with d-dimensional parameter lines

/// A `(d+1) × (d+1)` inscribed patch with boundary data for one extension.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSeed {
    pub patch: InscribedNet,
    pub d: usize,
    /// New vertices `P(s, 0)` on `Q ∩ H_0`, one per extension step.
    pub boundary_row: Vec<HPoint>,
    /// New vertices `P(0, s)` on `Q ∩ V_0`, one per extension step.
    pub boundary_col: Vec<HPoint>,
}

/// Diagnostics of one extension step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionReport {
    /// Max `|phi(P, P)|` over vertices placed by triple meets.
    pub new_incidence: f64,
    /// Max least-squares residual of the triple meets.
    pub meet_residual: f64,
    /// Min transversality of the second intersections (near-tangency flag).
    pub min_transversality: f64,
    /// Drift of `∩ H_j` and `∩ V_i` against the previous step.
    pub x_drift: f64,
    pub y_drift: f64,
    /// Max relative singular value beyond dimension `d` over all parameter
    /// lines, and min relative singular value at dimension `d`.
    pub excess_dim: f64,
    pub min_dim_gap: f64,
}

impl ExtensionReport {
    pub fn dims_exact(&self) -> bool {
        self.excess_dim < 1e-9 && self.min_dim_gap > 1e-9
    }
}

/// Quadric for `d = 1`: signature `(3, 3)` in `RP^5`, which carries the
/// isotropic planes that nets with collinear parameter lines require.
fn isotropic_plane(q_diag: &[f64], o: &DMatrix<f64>, rng: &mut Rng) -> Result<Subspace> {
    let r = sample::random_orthogonal(3, rng);
    let mut basis = DMatrix::zeros(6, 3);
    for k in 0..3 {
        let z = DVector::from_fn(3, |a, _| if a == k { 1.0 } else { 0.0 });
        let ez = DVector::from_fn(3, |a, _| (-q_diag[a + 3]).sqrt() * z[a]);
        let rz = &r * ez;
        let mut y = DVector::zeros(6);
        for a in 0..3 {
            y[a] = rz[a] / q_diag[a].sqrt();
            y[a + 3] = z[a];
        }
        basis.set_column(k, &(o.transpose() * y));
    }
    Subspace::from_columns(&basis)
}

impl ConstrainedSeed {
    /// Random seed with `d`-dimensional parameter lines in `RP^n`, with
    /// boundary data for `steps` extensions. For `d = 1` the net lies in an
    /// isotropic plane of a `(3, 3)` quadric in `RP^5`.
    pub fn random(d: usize, n: usize, steps: usize, rng: &mut Rng) -> Result<Self> {
        if d == 0 || d >= n {
            return Err(GeomError::Invalid(format!("need 0 < d < n, got d={d}, n={n}")));
        }
        let patch = if d == 1 {
            if n != 5 {
                return Err(GeomError::Invalid("d = 1 is realised in RP^5".into()));
            }
            let o = sample::random_orthogonal(6, rng);
            let diag: Vec<f64> =
                (0..6).map(|k| (0.5 + 1.5 * sample::uniform(rng, 0.0, 1.0)) * if k < 3 { 1.0 } else { -1.0 }).collect();
            let f = o.transpose() * DMatrix::from_diagonal(&DVector::from_vec(diag.clone())) * &o;
            let q = Quadric::new(f)?;
            let pi = isotropic_plane(&diag, &o, rng)?;
            let mut found = None;
            for _ in 0..sample::MAX_RETRIES {
                let pts: Vec<HPoint> = (0..3).map(|_| sample::random_point_in(&pi, rng)).collect();
                let w = sample::gaussian_vector(3, rng);
                let p11 = HPoint::new(pts[0].coords() * w[0] + pts[1].coords() * w[1] + pts[2].coords() * w[2])?;
                let net = QNet::new(2, 2, vec![pts[0].clone(), pts[1].clone(), pts[2].clone(), p11])?;
                if qnet::quad_genericity(&net) > qnet::GENERICITY_TOL && well_separated(&net) {
                    found = Some(InscribedNet::new(net, q.clone())?);
                    break;
                }
            }
            found.ok_or_else(|| GeomError::NonGeneric("isotropic seed".into()))?
        } else {
            let q = sample::random_indefinite_quadric(n, rng);
            random_inscribed_net(d + 1, d + 1, &q, rng)?
        };
        let mut seed = ConstrainedSeed { patch, d, boundary_row: Vec::new(), boundary_col: Vec::new() };
        let h0 = Subspace::from_points_dim(&seed.patch.net.h_points(0), d)?.0;
        let v0 = Subspace::from_points_dim(&seed.patch.net.v_points(0), d)?.0;
        let p0 = seed.patch.net.at(0, 0).clone();
        for _ in 0..steps {
            seed.boundary_row.push(boundary_point(&seed.patch.quadric, &h0, &p0, d, rng)?);
            seed.boundary_col.push(boundary_point(&seed.patch.quadric, &v0, &p0, d, rng)?);
        }
        Ok(seed)
    }
}

fn boundary_point(q: &Quadric, s: &Subspace, p0: &HPoint, d: usize, rng: &mut Rng) -> Result<HPoint> {
    if d == 1 {
        return Ok(sample::random_point_in(s, rng));
    }
    sample::point_on_quadric(q, s, Some(p0), rng)
}

/// Current `X = ∩ H_j` and `Y = ∩ V_i` of a net with `d`-dimensional lines.
pub fn net_xy(net: &QNet, d: usize) -> Result<(HPoint, HPoint)> {
    let hs = h_spans(net, d)?;
    let vs = v_spans(net, d)?;
    let hr: Vec<&Subspace> = hs.iter().collect();
    let vr: Vec<&Subspace> = vs.iter().collect();
    let x = projlin::meet_dim(&hr, 0)?.0.as_point().unwrap();
    let y = projlin::meet_dim(&vr, 0)?.0.as_point().unwrap();
    Ok((x, y))
}

fn dimension_profile(net: &QNet, d: usize) -> (f64, f64) {
    let mut excess = 0.0f64;
    let mut gap = f64::INFINITY;
    let mut eval = |pts: Vec<&HPoint>| {
        let s = projlin::singular_values(&projlin::stack_points(&pts).expect("ambient"));
        let smax = s[0];
        if let Some(x) = s.get(d + 1) {
            excess = excess.max(x / smax);
        }
        gap = gap.min(s.get(d).copied().unwrap_or(0.0) / smax);
    };
    for j in 0..net.cols() {
        eval(net.h_points(j));
    }
    for i in 0..net.rows() {
        eval(net.v_points(i));
    }
    (excess, gap)
}

/// Extends an `s × s` inscribed net with `d`-dimensional parameter lines by
/// one row and one column, given `P(0, s) ∈ Q ∩ V_0` and `P(s, 0) ∈ Q ∩ H_0`.
pub fn extend_once(
    net: &InscribedNet,
    d: usize,
    p_col: &HPoint,
    p_row: &HPoint,
) -> Result<(InscribedNet, ExtensionReport)> {
    let frame = Frame::fit(net, d)?;
    extend_framed(net, d, &frame, p_col, p_row).map(|(n, r, _)| (n, r))
}

/// `X`, `Y` and the parameter-line spans, carried across extension steps
/// so that each is computed once from the vertices that define it.
struct Frame {
    x: HPoint,
    y: HPoint,
    hs: Vec<Subspace>,
    vs: Vec<Subspace>,
}

impl Frame {
    fn fit(net: &InscribedNet, d: usize) -> Result<Self> {
        let (x, y) = net_xy(&net.net, d)?;
        Ok(Frame { x, y, hs: h_spans(&net.net, d)?, vs: v_spans(&net.net, d)? })
    }
}

fn extend_framed(
    net: &InscribedNet,
    d: usize,
    frame: &Frame,
    p_col: &HPoint,
    p_row: &HPoint,
) -> Result<(InscribedNet, ExtensionReport, Frame)> {
    let s = net.net.rows();
    if net.net.cols() != s || s < d + 1 {
        return Err(GeomError::Invalid("extension needs a square net of size at least d+1".into()));
    }
    if qnet::quad_genericity(&net.net) < GENERIC_SEED_TOL {
        return Err(GeomError::NonGeneric("seed has a collinear vertex triple".into()));
    }
    let q = &net.quadric;
    let old = &net.net;
    let (x, y) = (frame.x.clone(), frame.y.clone());
    let (hs, vs) = (&frame.hs, &frame.vs);
    let mut new_spans: Vec<Subspace> = Vec::with_capacity(2);
    let mut grid: Vec<Option<HPoint>> = vec![None; (s + 1) * (s + 1)];
    let idx = |i: usize, j: usize| i * (s + 1) + j;
    for i in 0..s {
        for j in 0..s {
            grid[idx(i, j)] = Some(old.at(i, j).clone());
        }
    }
    let mut meet_residual = 0.0f64;
    let mut new_incidence = 0.0f64;
    let mut min_trans = f64::INFINITY;

    // transposition trick: build the new H_s, then the new V_s by symmetry
    for pass in 0..2 {
        let get = |g: &Vec<Option<HPoint>>, i: usize, j: usize| -> HPoint {
            if pass == 0 {
                g[idx(i, j)].clone().unwrap()
            } else {
                g[idx(j, i)].clone().unwrap()
            }
        };
        let (lines_across, pole, first) = if pass == 0 { (vs, &x, p_col) } else { (hs, &y, p_row) };
        let mut new_pts: Vec<HPoint> = vec![first.clone()];
        for i in 1..d {
            let pl = plane(&get(&grid, i - 1, s - 1), &new_pts[i - 1], &get(&grid, i, s - 1))?;
            let (l, r) = projlin::meet_dim(&[&lines_across[i], &pl], 1)?;
            meet_residual = meet_residual.max(r);
            let p = get(&grid, i, s - 1);
            let si = projlin::second_intersection(&l, &p, q)?;
            if si.tangent {
                return Err(GeomError::NonGeneric(format!("tangent line at step position {i}")));
            }
            min_trans = min_trans.min(si.transversality);
            new_pts.push(si.point);
        }
        let mut gens: Vec<&HPoint> = vec![pole];
        gens.extend(new_pts.iter());
        let (span_new, _) = Subspace::from_points_dim(&gens, d)?;
        new_spans.push(span_new.clone());
        for i in d..s {
            let pl = plane(&get(&grid, i - 1, s - 1), &get(&grid, i, s - 1), &new_pts[i - 1])?;
            let (pt, r) = projlin::meet_dim(&[&lines_across[i], &span_new, &pl], 0)?;
            let pt = pt.as_point().unwrap();
            meet_residual = meet_residual.max(r);
            new_incidence = new_incidence.max(q.incidence(&pt));
            new_pts.push(pt);
        }
        for (i, p) in new_pts.into_iter().enumerate() {
            if pass == 0 {
                grid[idx(i, s)] = Some(p);
            } else {
                grid[idx(s, i)] = Some(p);
            }
        }
    }
    // corner
    let (h_span, v_span) = (&new_spans[0], &new_spans[1]);
    let pl = plane(
        grid[idx(s - 1, s - 1)].as_ref().unwrap(),
        grid[idx(s, s - 1)].as_ref().unwrap(),
        grid[idx(s - 1, s)].as_ref().unwrap(),
    )?;
    let (corner, r) = projlin::meet_dim(&[h_span, v_span, &pl], 0)?;
    let corner = corner.as_point().unwrap();
    meet_residual = meet_residual.max(r);
    new_incidence = new_incidence.max(q.incidence(&corner));
    grid[idx(s, s)] = Some(corner);

    let grown = QNet::new(s + 1, s + 1, grid.into_iter().map(Option::unwrap).collect())?;
    let (x2, y2) = net_xy(&grown, d)?;
    let (excess_dim, min_dim_gap) = dimension_profile(&grown, d);
    let report = ExtensionReport {
        new_incidence,
        meet_residual,
        min_transversality: if min_trans.is_finite() { min_trans } else { 1.0 },
        x_drift: x.distance(&x2),
        y_drift: y.distance(&y2),
        excess_dim,
        min_dim_gap,
    };
    let incidence_residual = max_incidence(&grown, q);
    let isotropic_edges = count_isotropic_edges(&grown, q);
    let mut next = Frame { x, y, hs: hs.clone(), vs: vs.clone() };
    next.hs.push(new_spans[0].clone());
    next.vs.push(new_spans[1].clone());
    Ok((InscribedNet { net: grown, quadric: q.clone(), incidence_residual, isotropic_edges }, report, next))
}

/// Minimal quad genericity of a net accepted for extension.
pub const GENERIC_SEED_TOL: f64 = 1e-8;

/// One extension step of a seed, using its first boundary pair.
pub fn extend_constrained(seed: &ConstrainedSeed) -> Result<(InscribedNet, ExtensionReport)> {
    let (pc, pr) = match (seed.boundary_col.first(), seed.boundary_row.first()) {
        (Some(c), Some(r)) => (c, r),
        _ => return Err(GeomError::Invalid("seed carries no boundary data".into())),
    };
    extend_once(&seed.patch, seed.d, pc, pr)
}

/// All extension steps of a seed. Boundary point `k` is placed at the new
/// index `d + 1 + k`.
pub fn extend_all(seed: &ConstrainedSeed) -> Result<(InscribedNet, Vec<ExtensionReport>)> {
    let mut cur = seed.patch.clone();
    let mut frame = Frame::fit(&cur, seed.d)?;
    let mut reports = Vec::new();
    for (pc, pr) in seed.boundary_col.iter().zip(&seed.boundary_row) {
        let (next, rep, f) = extend_framed(&cur, seed.d, &frame, pc, pr)?;
        reports.push(rep);
        cur = next;
        frame = f;
    }
    Ok((cur, reports))
}

// ---------------------------------------------------------------------------
// termination theorems

/// Hypothesis and conclusion of a degeneracy implication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImplicationReport {
    pub hypothesis: DegeneracyReport,
    pub conclusion: DegeneracyReport,
    /// Spread of the concluded kind one step earlier (`None` at step 0).
    pub previous_spread: Option<f64>,
    /// Whether the conclusion is Laplace (otherwise Goursat) degeneracy.
    pub concludes_laplace: bool,
}

impl ImplicationReport {
    /// Laplace (for the Goursat hypothesis) or Goursat (for the Laplace
    /// hypothesis) degeneracy of the concluded transform.
    pub fn holds(&self) -> bool {
        if self.concludes_laplace {
            self.conclusion.laplace
        } else {
            self.conclusion.goursat
        }
    }
}

/// `L_A^m` Goursat and no isotropic edges imply `L_B^m` Laplace.
pub fn check_goursat_implies_laplace(net: &InscribedNet, m: usize) -> Result<ImplicationReport> {
    if net.isotropic_edges > 0 {
        return Err(GeomError::Hypothesis(format!("{} isotropic edge lines", net.isotropic_edges)));
    }
    let hyp = qnet::classify_degeneracy(&net.net, Direction::A, m)?;
    if !hyp.goursat {
        return Err(GeomError::Hypothesis(format!("L_A^{m} is not Goursat (spread {:e})", hyp.goursat_spread)));
    }
    let conc = qnet::classify_degeneracy(&net.net, Direction::B, m)?;
    let previous_spread = m.checked_sub(2).and_then(|k| conc.per_step.get(k)).map(|s| s.1);
    Ok(ImplicationReport { hypothesis: hyp, conclusion: conc, previous_spread, concludes_laplace: true })
}

/// For a nondegenerate quadric of `RP^n`, `L_A^m` Laplace implies
/// `L_B^(m+n-1)` Goursat.
pub fn check_laplace_implies_goursat(net: &InscribedNet, m: usize) -> Result<ImplicationReport> {
    let n = net.quadric.ambient();
    let steps = m + n - 1;
    if net.net.rows() <= steps + 1 || net.net.cols() <= steps + 1 {
        return Err(GeomError::GridTooSmall(format!(
            "{steps} B-steps with a spread need a grid of at least {0}x{0}, got {1}x{2}",
            steps + 2,
            net.net.rows(),
            net.net.cols()
        )));
    }
    if projlin::signature(&net.quadric).r > 0 {
        return Err(GeomError::Hypothesis("quadric is degenerate".into()));
    }
    let hyp = qnet::classify_degeneracy(&net.net, Direction::A, m)?;
    if !hyp.laplace {
        return Err(GeomError::Hypothesis(format!("L_A^{m} is not Laplace (spread {:e})", hyp.laplace_spread)));
    }
    let conc = qnet::classify_degeneracy(&net.net, Direction::B, steps)?;
    let previous_spread = steps.checked_sub(2).and_then(|k| conc.per_step.get(k)).map(|s| s.0);
    Ok(ImplicationReport { hypothesis: hyp, conclusion: conc, previous_spread, concludes_laplace: false })
}

/// Random net inscribed in `q` whose lines `H_j` span `m`-dimensional
/// subspaces while the lines `V_i` stay generic.
pub fn inscribed_goursat_net(rows: usize, cols: usize, m: usize, q: &Quadric, rng: &mut Rng) -> Result<InscribedNet> {
    let n = q.ambient();
    if m == 0 || m >= n {
        return Err(GeomError::Invalid(format!("need 0 < m < n, got m={m}, n={n}")));
    }
    'retry: for _ in 0..sample::MAX_RETRIES {
        let h0 = sample::random_subspace(n, m, rng)?;
        let mut col: Vec<HPoint> = Vec::new();
        let mut prev: Option<HPoint> = None;
        for _ in 0..rows {
            let p = match sample::point_on_quadric(q, &h0, prev.as_ref(), rng) {
                Ok(p) => p,
                Err(_) => continue 'retry,
            };
            prev = Some(p.clone());
            col.push(p);
        }
        let mut grid = vec![col];
        let mut h = h0;
        for j in 0..cols - 1 {
            let k = sample::random_subspace_in(&h, m - 1, rng)?;
            let p0 = match random_chord(&Subspace::whole(n), &grid[j][0], q, rng) {
                Ok(p) => p,
                Err(_) => continue 'retry,
            };
            let mut next = vec![p0.clone()];
            for i in 0..rows - 1 {
                let edge = line(&grid[j][i], &grid[j][i + 1])?;
                let (z, _) = projlin::meet_dim(&[&edge, &k], 0)?;
                let z = z.as_point().unwrap();
                let l = line(&next[i], &z)?;
                let si = match projlin::second_intersection(&l, &next[i], q) {
                    Ok(si) if !si.tangent && si.transversality > 1e-3 => si,
                    _ => continue 'retry,
                };
                next.push(si.point);
            }
            h = projlin::join(&[&k, &p0.to_subspace()])?;
            grid.push(next);
        }
        let net = QNet::from_fn(rows, cols, |i, j| Ok(grid[j][i].clone()))?;
        if qnet::quad_genericity(&net) > qnet::GENERICITY_TOL && well_separated(&net) {
            if let Ok(ins) = InscribedNet::new(net, q.clone()) {
                if ins.isotropic_edges == 0 {
                    return Ok(ins);
                }
            }
        }
    }
    Err(GeomError::NonGeneric("inscribed Goursat net failed the genericity filter".into()))
}

/// Random net inscribed in `q` with `L_A^m` Laplace degenerate, for `m`
/// in `{1, 2}`: the edge lines `P(i,j) ∨ P(i+1,j)` pass through `X_i`
/// (`m = 1`), or the planes `P(i,j) ∨ P(i+1,j) ∨ P(i+2,j)` through `X_i`
/// (`m = 2`, ambient `RP^3`).
pub fn inscribed_laplace_net(rows: usize, cols: usize, m: usize, q: &Quadric, rng: &mut Rng) -> Result<InscribedNet> {
    let n = q.ambient();
    if !(m == 1 || (m == 2 && n == 3)) {
        return Err(GeomError::Invalid(format!("unsupported (m, n) = ({m}, {n})")));
    }
    let whole = Subspace::whole(n);
    'retry: for _ in 0..sample::MAX_RETRIES {
        let xs: Vec<HPoint> = (0..rows).map(|_| sample::random_point(n, rng)).collect();
        let mut g: Vec<Vec<HPoint>> = Vec::new();
        // first m parameter lines V_0 .. V_(m-1)
        let mut v0 = vec![match sample::point_on_quadric(q, &whole, None, rng) {
            Ok(p) => p,
            Err(_) => continue 'retry,
        }];
        for j in 1..cols {
            match random_chord(&whole, &v0[j - 1], q, rng) {
                Ok(p) => v0.push(p),
                Err(_) => continue 'retry,
            }
        }
        g.push(v0);
        if m == 2 {
            let mut v1 = vec![match random_chord(&whole, &g[0][0], q, rng) {
                Ok(p) => p,
                Err(_) => continue 'retry,
            }];
            for j in 1..cols {
                let pl = plane(&g[0][j - 1], &v1[j - 1], &g[0][j])?;
                match random_chord(&pl, &g[0][j], q, rng) {
                    Ok(p) => v1.push(p),
                    Err(_) => continue 'retry,
                }
            }
            g.push(v1);
        }
        for i in m..rows {
            let mut vi: Vec<HPoint> = Vec::new();
            for j in 0..cols {
                let p = if m == 1 {
                    let l = line(&xs[i - 1], &g[i - 1][j])?;
                    match projlin::second_intersection(&l, &g[i - 1][j], q) {
                        Ok(si) if !si.tangent && si.transversality > 1e-3 => si.point,
                        _ => continue 'retry,
                    }
                } else {
                    let span = plane(&g[i - 2][j], &g[i - 1][j], &xs[i - 2])?;
                    if j == 0 {
                        match random_chord(&span, &g[i - 1][0], q, rng) {
                            Ok(p) => p,
                            Err(_) => continue 'retry,
                        }
                    } else {
                        let pl = plane(&g[i - 1][j - 1], &vi[j - 1], &g[i - 1][j])?;
                        let (l, _) = projlin::meet_dim(&[&span, &pl], 1)?;
                        match projlin::second_intersection(&l, &g[i - 1][j], q) {
                            Ok(si) if !si.tangent && si.transversality > 1e-3 => si.point,
                            _ => continue 'retry,
                        }
                    }
                };
                vi.push(p);
            }
            g.push(vi);
        }
        let net = QNet::from_fn(rows, cols, |i, j| Ok(g[i][j].clone()))?;
        if qnet::quad_genericity(&net) > qnet::GENERICITY_TOL && well_separated(&net) {
            if let Ok(ins) = InscribedNet::new(net, q.clone()) {
                if ins.isotropic_edges == 0 {
                    return Ok(ins);
                }
            }
        }
    }
    Err(GeomError::NonGeneric("inscribed Laplace net failed the genericity filter".into()))
}

// ---------------------------------------------------------------------------
// pencil structure in RP^(2m)

/// Quadrics `V` and `H` containing the parameter-line spans, and the
/// pencil relation with the inscribing quadric.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilStructure {
    pub v: Quadric,
    pub h: Quadric,
    pub v_signature: Signature,
    pub h_signature: Signature,
    /// Distance of the inscribing form to `span{V, H}` (unit forms).
    pub pencil_residual: f64,
    /// Pairs `(i, k, dim(V_i ∩ V_k), same_system)` for the `V` family.
    pub v_systems: Vec<(usize, usize, i64, bool)>,
    pub h_systems: Vec<(usize, usize, i64, bool)>,
    /// Whether generator systems alternate with index parity.
    pub alternation: bool,
}

/// Projective dimension of a meet, decided with relative threshold `tol`.
pub fn meet_dimension(spaces: &[&Subspace], tol: f64) -> Result<i64> {
    let spec = projlin::meet_spectrum(spaces)?;
    Ok(spec.iter().filter(|&&s| s < tol).count() as i64 - 1)
}

/// Two `m`-dimensional generators of a quadric of signature `(m, m, 1)`
/// lie in the same system iff `dim(G1 ∩ G2) - 1` and `m` have different
/// parity.
pub fn same_system(meet_dim: i64, m: usize) -> bool {
    (meet_dim - 1).rem_euclid(2) != (m as i64) % 2
}

fn systems(spans: &[Subspace], m: usize) -> Result<(Vec<(usize, usize, i64, bool)>, bool)> {
    let mut out = Vec::new();
    let mut ok = true;
    for i in 0..spans.len() {
        for k in i + 1..spans.len() {
            let dim = meet_dimension(&[&spans[i], &spans[k]], 1e-8)?;
            let same = same_system(dim, m);
            ok &= same == ((k - i) % 2 == 0);
            out.push((i, k, dim, same));
        }
    }
    Ok((out, ok))
}

pub fn recover_pencil_structure(net: &InscribedNet) -> Result<PencilStructure> {
    let n = net.quadric.ambient();
    if n % 2 != 0 {
        return Err(GeomError::Hypothesis(format!("ambient RP^{n} is not even-dimensional")));
    }
    let m = n / 2;
    if projlin::signature(&net.quadric).r > 0 {
        return Err(GeomError::Hypothesis("inscribing quadric is degenerate".into()));
    }
    let hs = h_spans(&net.net, m)?;
    let vs = v_spans(&net.net, m)?;
    let (excess, _) = dimension_profile(&net.net, m);
    if excess > 1e-8 {
        return Err(GeomError::Hypothesis(format!("parameter lines exceed dimension {m}")));
    }
    let vr: Vec<&Subspace> = vs.iter().collect();
    let hr: Vec<&Subspace> = hs.iter().collect();
    let v = projlin::fit_quadric(&[], &vr)?;
    let h = projlin::fit_quadric(&[], &hr)?;
    for fit in [&v, &h] {
        if fit.residual > 1e-8 {
            return Err(GeomError::OverConstrained);
        }
        if fit.gap < 1e-8 {
            return Err(GeomError::UnderDetermined { dim: 2 });
        }
    }
    let pencil_residual = projlin::span_residual(net.quadric.form(), &[v.quadric.form(), h.quadric.form()]);
    let (v_systems, va) = systems(&vs, m)?;
    let (h_systems, ha) = systems(&hs, m)?;
    Ok(PencilStructure {
        v_signature: projlin::signature_tol(v.quadric.form(), 1e-8),
        h_signature: projlin::signature_tol(h.quadric.form(), 1e-8),
        v: v.quadric,
        h: h.quadric,
        pencil_residual,
        v_systems,
        h_systems,
        alternation: va && ha,
    })
}

// ---------------------------------------------------------------------------
// small nets with concurrent row spans

/// Outcome of the small-net degeneracy propositions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallDegeneracyReport {
    /// Projective dimension of the row spans.
    pub row_dim: usize,
    /// Projective dimension of `∩ H_j`.
    pub meet_dim: i64,
    /// Whether the meet dimension matches one of the hypotheses.
    pub hypothesis_met: bool,
    /// Laplace step named by the applicable proposition.
    pub step: usize,
    pub laplace_spread: f64,
    pub laplace: bool,
}

/// `3 × 3` nets with planar rows whose spans share a line have `L_A`
/// Laplace degenerate; `4 × 4` nets with 3-dimensional rows have `L_A^2`
/// (shared line) or `L_A` (shared plane) Laplace degenerate.
pub fn check_small_degeneracy_props(net: &QNet) -> Result<SmallDegeneracyReport> {
    let size = net.rows();
    if net.cols() != size || !(size == 3 || size == 4) {
        return Err(GeomError::Invalid("expected a 3x3 or 4x4 net".into()));
    }
    let row_dim = size - 1;
    let hs = h_spans(net, row_dim)?;
    let refs: Vec<&Subspace> = hs.iter().collect();
    let meet_dim = meet_dimension(&refs, 1e-8)?;
    let (hypothesis_met, step) = match (size, meet_dim) {
        (3, 1) => (true, 1),
        (4, 1) => (true, 2),
        (4, 2) => (true, 1),
        (3, _) => (false, 1),
        _ => (false, 2),
    };
    let rep = qnet::classify_degeneracy(net, Direction::A, step)?;
    Ok(SmallDegeneracyReport {
        row_dim,
        meet_dim,
        hypothesis_met,
        step,
        laplace_spread: rep.laplace_spread,
        laplace: rep.laplace_spread < DEGENERACY_TOL,
    })
}
