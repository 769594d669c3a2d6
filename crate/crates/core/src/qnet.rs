//! Q-nets on finite grids and their Laplace transforms.
//!
//! A net stores vertices `P(i, j)` for `i < rows`, `j < cols`. The parameter
//! line `H_j` collects the vertices with fixed `j`, the parameter line `V_i`
//! those with fixed `i`. The Laplace point `A(i, j)` is the meet of the edge
//! lines `P(i,j) ∨ P(i+1,j)` and `P(i,j+1) ∨ P(i+1,j+1)`; `B(i, j)` meets
//! `P(i,j) ∨ P(i,j+1)` with `P(i+1,j) ∨ P(i+1,j+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::projlin::{self, HPoint, Subspace};
use crate::sample::{self, Rng};

/// Spread threshold for Goursat and Laplace degeneracy.
pub const DEGENERACY_TOL: f64 = 1e-7;

/// Direction of a Laplace transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    A,
    B,
}

/// A Q-net on a `rows × cols` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    rows: usize,
    cols: usize,
    vertices: Vec<HPoint>,
}

impl QNet {
    /// Builds a net from row-major vertices (`index = i * cols + j`).
    pub fn new(rows: usize, cols: usize, vertices: Vec<HPoint>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(GeomError::GridTooSmall("empty grid".into()));
        }
        if vertices.len() != rows * cols {
            return Err(GeomError::DimensionMismatch { expected: rows * cols, found: vertices.len() });
        }
        let n = vertices[0].ambient();
        for v in &vertices {
            if v.ambient() != n {
                return Err(GeomError::DimensionMismatch { expected: n, found: v.ambient() });
            }
        }
        Ok(QNet { rows, cols, vertices })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Result<HPoint>) -> Result<Self> {
        let mut v = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                v.push(f(i, j)?);
            }
        }
        QNet::new(rows, cols, v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ambient(&self) -> usize {
        self.vertices[0].ambient()
    }

    pub fn vertices(&self) -> &[HPoint] {
        &self.vertices
    }

    pub fn at(&self, i: usize, j: usize) -> &HPoint {
        &self.vertices[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: HPoint) {
        self.vertices[i * self.cols + j] = p;
    }

    /// Vertices of the parameter line `H_j`.
    pub fn h_points(&self, j: usize) -> Vec<&HPoint> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    /// Vertices of the parameter line `V_i`.
    pub fn v_points(&self, i: usize) -> Vec<&HPoint> {
        (0..self.cols).map(|j| self.at(i, j)).collect()
    }

    /// Span of `H_j`.
    pub fn h_span(&self, j: usize) -> Result<Subspace> {
        Subspace::from_points(&self.h_points(j))
    }

    /// Span of `V_i`.
    pub fn v_span(&self, i: usize) -> Result<Subspace> {
        Subspace::from_points(&self.v_points(i))
    }

    /// The four vertices of quad `(i, j)` in the order
    /// `P(i,j), P(i+1,j), P(i,j+1), P(i+1,j+1)`.
    pub fn quad(&self, i: usize, j: usize) -> [&HPoint; 4] {
        [self.at(i, j), self.at(i + 1, j), self.at(i, j + 1), self.at(i + 1, j + 1)]
    }

    /// Sub-grid of size `r × c` starting at `(i0, j0)`.
    pub fn window(&self, i0: usize, j0: usize, r: usize, c: usize) -> Result<QNet> {
        if i0 + r > self.rows || j0 + c > self.cols {
            return Err(GeomError::GridTooSmall(format!(
                "window {r}x{c} at ({i0},{j0}) exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        QNet::from_fn(r, c, |i, j| Ok(self.at(i0 + i, j0 + j).clone()))
    }

    /// Net with the roles of `i` and `j` exchanged.
    pub fn transposed(&self) -> QNet {
        QNet::from_fn(self.cols, self.rows, |i, j| Ok(self.at(j, i).clone())).expect("same vertices")
    }

    pub fn to_json(&self) -> QNetJson {
        QNetJson {
            ambient: self.ambient(),
            rows: self.rows,
            cols: self.cols,
            vertices: self.vertices.iter().map(|p| p.coords().iter().copied().collect()).collect(),
        }
    }

    pub fn from_json(j: &QNetJson) -> Result<Self> {
        let v = j
            .vertices
            .iter()
            .map(|c| {
                if c.len() != j.ambient + 1 {
                    return Err(GeomError::DimensionMismatch { expected: j.ambient + 1, found: c.len() });
                }
                HPoint::from_slice(c)
            })
            .collect::<Result<Vec<_>>>()?;
        QNet::new(j.rows, j.cols, v)
    }
}

/// Serialized form of a [`QNet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetJson {
    pub ambient: usize,
    pub rows: usize,
    pub cols: usize,
    pub vertices: Vec<Vec<f64>>,
}

/// Meet of the lines `a1 ∨ a2` and `b1 ∨ b2`, assumed coplanar.
pub fn line_meet(a1: &HPoint, a2: &HPoint, b1: &HPoint, b2: &HPoint) -> Option<HPoint> {
    let d = a1.coords().len();
    let mut m = nalgebra::DMatrix::zeros(d, 4);
    m.set_column(0, a1.coords());
    m.set_column(1, a2.coords());
    m.set_column(2, &(-b1.coords()));
    m.set_column(3, &(-b2.coords()));
    let (v, asc) = projlin::smallest_right_vectors(&m, 1);
    // a second (near) null direction means coincident lines or points
    if asc.len() < 2 || asc[1] <= projlin::rank_tol() {
        return None;
    }
    let x = a1.coords() * v[(0, 0)] + a2.coords() * v[(1, 0)];
    if x.norm() < 1e-12 {
        return None;
    }
    HPoint::new(x).ok()
}

/// Laplace points of a planar quad given as `P(i,j), P(i+1,j), P(i,j+1), P(i+1,j+1)`.
pub fn laplace_points(quad: [&HPoint; 4]) -> Result<(HPoint, HPoint)> {
    let [p00, p10, p01, p11] = quad;
    let degenerate = || GeomError::DegenerateQuad { i: 0, j: 0 };
    let a = line_meet(p00, p10, p01, p11).ok_or_else(degenerate)?;
    let b = line_meet(p00, p01, p10, p11).ok_or_else(degenerate)?;
    Ok((a, b))
}

fn laplace_point(quad: [&HPoint; 4], dir: Direction) -> Option<HPoint> {
    let [p00, p10, p01, p11] = quad;
    match dir {
        Direction::A => line_meet(p00, p10, p01, p11),
        Direction::B => line_meet(p00, p01, p10, p11),
    }
}

/// One Laplace transform; the result is `(rows-1) × (cols-1)`.
pub fn laplace_transform(net: &QNet, dir: Direction) -> Result<QNet> {
    if net.rows < 2 || net.cols < 2 {
        return Err(GeomError::GridTooSmall(format!("{}x{} net has no quads", net.rows, net.cols)));
    }
    QNet::from_fn(net.rows - 1, net.cols - 1, |i, j| {
        laplace_point(net.quad(i, j), dir).ok_or(GeomError::DegenerateQuad { i, j })
    })
}

/// The nets `P, L P, ..., L^steps P`.
pub fn iterate_laplace(net: &QNet, dir: Direction, steps: usize) -> Result<Vec<QNet>> {
    if net.rows <= steps || net.cols <= steps {
        return Err(GeomError::GridTooSmall(format!(
            "{} Laplace steps need more than a {}x{} grid",
            steps, net.rows, net.cols
        )));
    }
    let mut out = vec![net.clone()];
    for s in 1..=steps {
        let next = laplace_transform(out.last().unwrap(), dir)
            .map_err(|e| GeomError::NonGeneric(format!("Laplace step {s}: {e}")))?;
        out.push(next);
    }
    Ok(out)
}

/// `L^steps P`.
pub fn laplace_power(net: &QNet, dir: Direction, steps: usize) -> Result<QNet> {
    Ok(iterate_laplace(net, dir, steps)?.pop().unwrap())
}

/// Outcome of [`classify_degeneracy`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyReport {
    pub direction: Direction,
    pub steps: usize,
    pub goursat: bool,
    pub laplace: bool,
    /// Spread along the Goursat direction at the final step.
    pub goursat_spread: f64,
    /// Spread along the Laplace direction at the final step.
    pub laplace_spread: f64,
    /// `(goursat_spread, laplace_spread)` for steps `1..=steps`.
    pub per_step: Vec<(f64, f64)>,
}

/// Max pairwise chordal distance within each fixed-`j` family (varying `i`).
pub fn spread_over_i(net: &QNet) -> f64 {
    let mut s = 0.0f64;
    for j in 0..net.cols {
        for i in 0..net.rows {
            for k in i + 1..net.rows {
                s = s.max(net.at(i, j).distance(net.at(k, j)));
            }
        }
    }
    s
}

/// Max pairwise chordal distance within each fixed-`i` family (varying `j`).
pub fn spread_over_j(net: &QNet) -> f64 {
    spread_over_i(&net.transposed())
}

fn spreads(net: &QNet, dir: Direction) -> (f64, f64) {
    match dir {
        Direction::A => (spread_over_i(net), spread_over_j(net)),
        Direction::B => (spread_over_j(net), spread_over_i(net)),
    }
}

/// Goursat and Laplace degeneracy of `L^steps P`. For direction `A`,
/// Goursat means independence of `i` and Laplace independence of `j`;
/// direction `B` is mirrored.
pub fn classify_degeneracy(net: &QNet, dir: Direction, steps: usize) -> Result<DegeneracyReport> {
    classify_with_tol(net, dir, steps, DEGENERACY_TOL)
}

pub fn classify_with_tol(net: &QNet, dir: Direction, steps: usize, tol: f64) -> Result<DegeneracyReport> {
    let hist = iterate_laplace(net, dir, steps)?;
    let per_step: Vec<(f64, f64)> = hist.iter().skip(1).map(|t| spreads(t, dir)).collect();
    let (g, l) = spreads(hist.last().unwrap(), dir);
    Ok(DegeneracyReport {
        direction: dir,
        steps,
        goursat: g < tol,
        laplace: l < tol,
        goursat_spread: g,
        laplace_spread: l,
        per_step,
    })
}

/// Max over quads of the smallest singular value of the four stacked unit
/// vertices, relative to the largest.
pub fn planarity_residual(net: &QNet) -> f64 {
    if net.ambient() < 3 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..net.rows.saturating_sub(1) {
        for j in 0..net.cols.saturating_sub(1) {
            let m = projlin::stack_points(&net.quad(i, j)).expect("shared ambient");
            let s = projlin::singular_values(&m);
            worst = worst.max(s[3] / s[0]);
        }
    }
    worst
}

/// Min over quads and vertex triples of the third singular value of the
/// stacked triple, relative: small values flag collinear triples or
/// coincident vertices.
pub fn quad_genericity(net: &QNet) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..net.rows.saturating_sub(1) {
        for j in 0..net.cols.saturating_sub(1) {
            let q = net.quad(i, j);
            for skip in 0..4 {
                let tri: Vec<&HPoint> = (0..4).filter(|&k| k != skip).map(|k| q[k]).collect();
                let s = projlin::singular_values(&projlin::stack_points(&tri).expect("ambient"));
                best = best.min(s[2] / s[0]);
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// line congruences

/// A discrete line congruence: neighbouring lines intersect.
#[derive(Debug, Clone, PartialEq)]
pub struct LineCongruence {
    rows: usize,
    cols: usize,
    lines: Vec<Subspace>,
}

/// Tolerance for the neighbouring-intersection invariant.
pub const CONGRUENCE_TOL: f64 = 1e-8;

fn lines_meet_residual(a: &Subspace, b: &Subspace) -> f64 {
    let mut m = nalgebra::DMatrix::zeros(a.basis().nrows(), 4);
    m.view_mut((0, 0), (a.basis().nrows(), 2)).copy_from(a.basis());
    m.view_mut((0, 2), (a.basis().nrows(), 2)).copy_from(b.basis());
    let s = projlin::singular_values(&m);
    s[3] / s[0]
}

impl LineCongruence {
    pub fn new(rows: usize, cols: usize, lines: Vec<Subspace>) -> Result<Self> {
        if rows == 0 || cols == 0 || lines.len() != rows * cols {
            return Err(GeomError::DimensionMismatch { expected: rows * cols, found: lines.len() });
        }
        for l in &lines {
            if l.dim() != 1 {
                return Err(GeomError::Invalid(format!("congruence element of dimension {}", l.dim())));
            }
        }
        let lc = LineCongruence { rows, cols, lines };
        let r = lc.neighbor_residual();
        if r > CONGRUENCE_TOL {
            return Err(GeomError::Hypothesis(format!("neighbouring lines do not intersect ({r:e})")));
        }
        Ok(lc)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &Subspace {
        &self.lines[i * self.cols + j]
    }

    pub fn lines(&self) -> &[Subspace] {
        &self.lines
    }

    /// Max over neighbouring pairs of the failure of the two lines to meet.
    pub fn neighbor_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i + 1 < self.rows {
                    worst = worst.max(lines_meet_residual(self.at(i, j), self.at(i + 1, j)));
                }
                if j + 1 < self.cols {
                    worst = worst.max(lines_meet_residual(self.at(i, j), self.at(i, j + 1)));
                }
            }
        }
        worst
    }

    /// Line congruence with the roles of `i` and `j` exchanged.
    pub fn transposed(&self) -> LineCongruence {
        let mut lines = Vec::with_capacity(self.lines.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                lines.push(self.at(i, j).clone());
            }
        }
        LineCongruence { rows: self.cols, cols: self.rows, lines }
    }

    pub fn to_json(&self) -> CongruenceJson {
        CongruenceJson {
            ambient: self.lines[0].ambient(),
            rows: self.rows,
            cols: self.cols,
            lines: self
                .lines
                .iter()
                .map(|l| (0..2).map(|k| l.basis().column(k).iter().copied().collect()).collect())
                .collect(),
        }
    }
}

/// Serialized form of a [`LineCongruence`]: two basis vectors per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceJson {
    pub ambient: usize,
    pub rows: usize,
    pub cols: usize,
    pub lines: Vec<Vec<Vec<f64>>>,
}

fn plane_of(a: &Subspace, b: &Subspace) -> Result<Subspace> {
    let (p, dropped) = projlin::join_dim(&[a, b], 2)?;
    if dropped > CONGRUENCE_TOL {
        return Err(GeomError::Hypothesis("neighbouring lines do not span a plane".into()));
    }
    let s = projlin::meet_spectrum(&[a, b])?;
    if s.len() > 1 && s[1] < projlin::rank_tol() {
        return Err(GeomError::NonGeneric("neighbouring lines coincide".into()));
    }
    Ok(p)
}

/// Laplace transform of a line congruence.
pub fn congruence_laplace(lc: &LineCongruence, dir: Direction) -> Result<LineCongruence> {
    if lc.rows < 2 || lc.cols < 2 {
        return Err(GeomError::GridTooSmall("congruence has no quads".into()));
    }
    let mut lines = Vec::with_capacity((lc.rows - 1) * (lc.cols - 1));
    for i in 0..lc.rows - 1 {
        for j in 0..lc.cols - 1 {
            let (p1, p2) = match dir {
                Direction::A => (
                    plane_of(lc.at(i, j), lc.at(i + 1, j))?,
                    plane_of(lc.at(i, j + 1), lc.at(i + 1, j + 1))?,
                ),
                Direction::B => (
                    plane_of(lc.at(i, j), lc.at(i, j + 1))?,
                    plane_of(lc.at(i + 1, j), lc.at(i + 1, j + 1))?,
                ),
            };
            let (l, _) = projlin::meet_dim(&[&p1, &p2], 1)?;
            lines.push(l);
        }
    }
    LineCongruence::new(lc.rows - 1, lc.cols - 1, lines)
}

/// Iterated congruence transform.
pub fn congruence_laplace_power(lc: &LineCongruence, dir: Direction, steps: usize) -> Result<LineCongruence> {
    let mut cur = lc.clone();
    for s in 1..=steps {
        cur = congruence_laplace(&cur, dir).map_err(|e| GeomError::NonGeneric(format!("congruence step {s}: {e}")))?;
    }
    Ok(cur)
}

/// Degeneracy of an iterated congruence transform, mirroring the point-net
/// orientation: Goursat for `A` means independence of `i`.
pub fn classify_congruence(lc: &LineCongruence, dir: Direction, steps: usize) -> Result<DegeneracyReport> {
    let mut per_step = Vec::new();
    let mut cur = lc.clone();
    for _ in 0..steps {
        cur = congruence_laplace(&cur, dir)?;
        per_step.push(congruence_spreads(&cur, dir));
    }
    let (g, l) = per_step.last().copied().unwrap_or_else(|| congruence_spreads(lc, dir));
    Ok(DegeneracyReport {
        direction: dir,
        steps,
        goursat: g < DEGENERACY_TOL,
        laplace: l < DEGENERACY_TOL,
        goursat_spread: g,
        laplace_spread: l,
        per_step,
    })
}

fn congruence_spreads(lc: &LineCongruence, dir: Direction) -> (f64, f64) {
    let over_i = |c: &LineCongruence| {
        let mut s = 0.0f64;
        for j in 0..c.cols {
            for i in 0..c.rows {
                for k in i + 1..c.rows {
                    s = s.max(c.at(i, j).distance(c.at(k, j)));
                }
            }
        }
        s
    };
    let t = lc.transposed();
    match dir {
        Direction::A => (over_i(lc), over_i(&t)),
        Direction::B => (over_i(&t), over_i(lc)),
    }
}

// ---------------------------------------------------------------------------
// random constructions

/// Minimal quad genericity accepted by the random constructions.
pub const GENERICITY_TOL: f64 = 1e-3;

/// Random generic Q-net in `RP^n`.
pub fn random_qnet(rows: usize, cols: usize, n: usize, rng: &mut Rng) -> Result<QNet> {
    'retry: for _ in 0..sample::MAX_RETRIES {
        let mut v: Vec<Option<HPoint>> = vec![None; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                let p = if i == 0 || j == 0 {
                    sample::random_point(n, rng)
                } else {
                    let a = v[(i - 1) * cols + j - 1].clone().unwrap();
                    let b = v[i * cols + j - 1].clone().unwrap();
                    let c = v[(i - 1) * cols + j].clone().unwrap();
                    // redraw the vertex until its quad is generic
                    let mut found = None;
                    for _ in 0..sample::MAX_RETRIES {
                        let w = sample::gaussian_vector(3, rng);
                        let p = HPoint::new(a.coords() * w[0] + b.coords() * w[1] + c.coords() * w[2])?;
                        if quad_genericity(&QNet::new(2, 2, vec![a.clone(), c.clone(), b.clone(), p.clone()])?) > GENERICITY_TOL {
                            found = Some(p);
                            break;
                        }
                    }
                    match found {
                        Some(p) => p,
                        None => continue 'retry,
                    }
                };
                v[i * cols + j] = Some(p);
            }
        }
        let net = QNet::new(rows, cols, v.into_iter().map(Option::unwrap).collect())?;
        if quad_genericity(&net) > GENERICITY_TOL {
            return Ok(net);
        }
    }
    Err(GeomError::NonGeneric("random Q-net failed the genericity filter".into()))
}

/// Random Q-net whose parameter lines `H_j` lie in `m`-dimensional
/// subspaces. Consecutive spans share an `(m-1)`-dimensional subspace
/// `K_j`, which contains `common` when given.
pub fn goursat_net(
    rows: usize,
    cols: usize,
    n: usize,
    m: usize,
    common: Option<&Subspace>,
    rng: &mut Rng,
) -> Result<QNet> {
    if m == 0 || m >= n {
        return Err(GeomError::Invalid(format!("need 0 < m < n, got m={m}, n={n}")));
    }
    'retry: for _ in 0..sample::MAX_RETRIES {
        let mut h = match common {
            Some(c) => {
                let extra = sample::random_subspace(n, m - c.dim() - 1, rng)?;
                projlin::join(&[c, &extra])?
            }
            None => sample::random_subspace(n, m, rng)?,
        };
        let mut v: Vec<HPoint> = Vec::with_capacity(rows * cols);
        let mut grid: Vec<Vec<HPoint>> = vec![Vec::new(); cols];
        for _ in 0..rows {
            grid[0].push(sample::random_point_in(&h, rng));
        }
        for j in 0..cols - 1 {
            let k = match common {
                Some(c) if c.dim() + 1 == m => c.clone(),
                Some(c) => {
                    let extra = sample::random_subspace_in(&h, m - 2 - c.dim(), rng)?;
                    projlin::join(&[c, &extra])?
                }
                None => sample::random_subspace_in(&h, m - 1, rng)?,
            };
            let p0 = sample::random_point(n, rng);
            let next_h = projlin::join(&[&k, &p0.to_subspace()])?;
            if next_h.dim() != m {
                continue 'retry;
            }
            let mut col = vec![p0];
            for i in 0..rows - 1 {
                let edge = projlin::join(&[&grid[j][i].to_subspace(), &grid[j][i + 1].to_subspace()])?;
                let (z, _) = projlin::meet_dim(&[&edge, &k], 0)?;
                let z = z.as_point().unwrap();
                let t = sample::gaussian(rng);
                let prev = &col[i];
                col.push(HPoint::new(prev.coords() + z.coords() * t)?);
            }
            grid[j + 1] = col;
            h = next_h;
        }
        for i in 0..rows {
            for g in grid.iter() {
                v.push(g[i].clone());
            }
        }
        let net = QNet::new(rows, cols, v)?;
        if quad_genericity(&net) > GENERICITY_TOL {
            return Ok(net);
        }
    }
    Err(GeomError::NonGeneric("Goursat net failed the genericity filter".into()))
}

/// Random Q-net whose edge lines `P(i,j) ∨ P(i+1,j)` pass through a point
/// `X_i` for every `j`, so that `L_A P` is Laplace degenerate.
pub fn laplace_base_net(rows: usize, cols: usize, n: usize, rng: &mut Rng) -> Result<QNet> {
    for _ in 0..sample::MAX_RETRIES {
        let xs: Vec<HPoint> = (0..rows).map(|_| sample::random_point(n, rng)).collect();
        let mut v: Vec<HPoint> = Vec::with_capacity(rows * cols);
        let first: Vec<HPoint> = (0..cols).map(|_| sample::random_point(n, rng)).collect();
        v.extend(first);
        for i in 1..rows {
            for j in 0..cols {
                let prev = v[(i - 1) * cols + j].coords().clone();
                let t = sample::gaussian(rng);
                v.push(HPoint::new(prev + xs[i - 1].coords() * t)?);
            }
        }
        let net = QNet::new(rows, cols, v)?;
        if quad_genericity(&net) > GENERICITY_TOL {
            return Ok(net);
        }
    }
    Err(GeomError::NonGeneric("Laplace base net failed the genericity filter".into()))
}

/// Random `rows × cols` Q-net with `L_A^m` Laplace degenerate, obtained as
/// `L_B^(m-1)` of a [`laplace_base_net`].
pub fn laplace_degenerate_net(rows: usize, cols: usize, n: usize, m: usize, rng: &mut Rng) -> Result<QNet> {
    for _ in 0..sample::MAX_RETRIES {
        let base = laplace_base_net(rows + m - 1, cols + m - 1, n, rng)?;
        let net = match laplace_power(&base, Direction::B, m - 1) {
            Ok(n) => n,
            Err(_) => continue,
        };
        if quad_genericity(&net) > GENERICITY_TOL {
            return Ok(net);
        }
    }
    Err(GeomError::NonGeneric("Laplace degenerate net failed the genericity filter".into()))
}

/// The subspaces `P(i,j) ∨ ... ∨ P(i+m,j)` for all `j`, and their meet
/// computed with expected dimension 0, with its residual.
pub fn laplace_meet(net: &QNet, i: usize, m: usize) -> Result<(HPoint, f64)> {
    let spans = (0..net.cols())
        .map(|j| {
            let pts: Vec<&HPoint> = (i..=i + m).map(|k| net.at(k, j)).collect();
            Subspace::from_points_dim(&pts, m).map(|(s, _)| s)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Subspace> = spans.iter().collect();
    let (s, r) = projlin::meet_dim(&refs, 0)?;
    Ok((s.as_point().unwrap(), r))
}
