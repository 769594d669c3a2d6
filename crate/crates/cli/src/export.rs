//! OBJ polylines and fitted parameter-line objects.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use qnets::cyclide::{self, CyclideGenerations};
use qnets::moebius::{self, CircularNet, EnvelopeReport, LineKind, MoebiusSpace};
use qnets::projlin;
use qnets::sample::Rng;
use qnets::GeomError;

use crate::{AnyNet, Failure};

/// Samples per closed circle.
const CIRCLE_SAMPLES: usize = 64;

/// Euclidean coordinates of every vertex, padded or cut to three.
fn xyz(net: &AnyNet) -> (usize, usize, Vec<[f64; 3]>) {
    let pad = |c: &[f64]| -> [f64; 3] { std::array::from_fn(|k| c.get(k).copied().unwrap_or(0.0)) };
    match net {
        AnyNet::Circular(c) => (c.rows(), c.cols(), c.points().iter().map(|p| pad(p.as_slice())).collect()),
        AnyNet::Projective(q) => {
            let pts = q
                .vertices()
                .iter()
                .map(|p| {
                    let x = p.coords();
                    let w = x[x.len() - 1];
                    // affine chart of the last coordinate; points at infinity keep their direction
                    let s = if w.abs() > 1e-12 { 1.0 / w } else { 1.0 };
                    pad(&x.as_slice()[..x.len() - 1].iter().map(|v| v * s).collect::<Vec<_>>())
                })
                .collect();
            (q.rows(), q.cols(), pts)
        }
    }
}

/// Vertices and one polyline per parameter line.
pub fn obj(net: &AnyNet) -> String {
    let (rows, cols, pts) = xyz(net);
    let mut s = String::new();
    for p in &pts {
        let _ = writeln!(s, "v {} {} {}", p[0], p[1], p[2]);
    }
    let id = |i: usize, j: usize| i * cols + j + 1;
    for i in 0..rows {
        let _ = writeln!(s, "o row_{i}");
        let idx: Vec<String> = (0..cols).map(|j| id(i, j).to_string()).collect();
        let _ = writeln!(s, "l {}", idx.join(" "));
    }
    for j in 0..cols {
        let _ = writeln!(s, "o col_{j}");
        let idx: Vec<String> = (0..rows).map(|i| id(i, j).to_string()).collect();
        let _ = writeln!(s, "l {}", idx.join(" "));
    }
    s
}

/// A parameter line with the object it is constrained to.
#[derive(Debug, Serialize)]
pub struct FittedLine {
    pub family: &'static str,
    pub index: usize,
    pub object: Fit,
    /// Largest distance of a vertex from the object, relative to `1 + r`.
    pub residual: f64,
    pub samples: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Fit {
    /// `m`-sphere: centre, radius and an orthonormal basis of its affine span.
    Sphere { dim: usize, centre: Vec<f64>, radius: f64, basis: Vec<Vec<f64>> },
    /// Affine `m`-plane through `origin` spanned by `basis`.
    Plane { dim: usize, origin: Vec<f64>, basis: Vec<Vec<f64>> },
    /// Projective span of a line of a Q-net.
    Span { dim: usize },
}

#[derive(Debug, Serialize)]
pub struct FittedObjects {
    pub kind: &'static str,
    pub ambient: usize,
    pub rows: usize,
    pub cols: usize,
    pub constraints: Option<String>,
    pub lines: Vec<FittedLine>,
    /// Envelope and cyclide claims of a constrained circular net.
    pub envelope: Option<EnvelopeReport>,
    pub envelope_error: Option<String>,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Orthonormal basis of the affine span of `pts[1..] - pts[0]`.
fn affine_basis(pts: &[&DVector<f64>]) -> DMatrix<f64> {
    let d = DMatrix::from_fn(pts[0].len(), pts.len() - 1, |r, c| pts[c + 1][r] - pts[0][r]);
    projlin::range_basis(&d, 1e-10)
}

fn sphere_fit(pts: &[&DVector<f64>], m: usize) -> Option<(Fit, f64, Vec<Vec<Vec<f64>>>)> {
    if pts.len() < m + 2 {
        return None;
    }
    let b = affine_basis(&pts[..m + 2]);
    if b.ncols() != m + 1 {
        return None;
    }
    let p0 = pts[0];
    // circumcentre p0 + B s with |B s - (p_k - p0)|^2 = |B s|^2
    let y = DMatrix::from_fn(m + 1, m + 1, |r, c| b.column(r).dot(&(pts[c + 1] - p0)));
    let rhs = DVector::from_fn(m + 1, |c, _| 0.5 * (pts[c + 1] - p0).norm_squared());
    let s = y.transpose().lu().solve(&rhs)?;
    let centre = p0 + &b * &s;
    let r = (p0 - &centre).norm();
    let mut residual = 0.0f64;
    for p in pts {
        let off = *p - &centre;
        let inplane = &b * (b.transpose() * &off);
        residual = residual.max(((off.norm() - r).abs() + (&off - &inplane).norm()) / (1.0 + r));
    }
    let mut samples = Vec::new();
    for a in 0..=m {
        for c in a + 1..=m {
            let circle = (0..=CIRCLE_SAMPLES)
                .map(|k| {
                    let t = TAU * k as f64 / CIRCLE_SAMPLES as f64;
                    to_vec(&(&centre + (b.column(a) * t.cos() + b.column(c) * t.sin()) * r))
                })
                .collect();
            samples.push(circle);
        }
    }
    let basis = (0..=m).map(|k| to_vec(&b.column(k).into_owned())).collect();
    Some((Fit::Sphere { dim: m, centre: to_vec(&centre), radius: r, basis }, residual, samples))
}

fn plane_fit(pts: &[&DVector<f64>], m: usize) -> Option<(Fit, f64, Vec<Vec<Vec<f64>>>)> {
    if pts.len() < m + 1 {
        return None;
    }
    let b = affine_basis(&pts[..m + 1]);
    if b.ncols() != m {
        return None;
    }
    let p0 = pts[0];
    let mut residual = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pts {
        let off = *p - p0;
        let coords = b.transpose() * &off;
        residual = residual.max((&off - &b * &coords).norm() / (1.0 + off.norm()));
        lo = lo.min(coords[0]);
        hi = hi.max(coords[0]);
    }
    let samples = if m == 1 { vec![vec![to_vec(&(p0 + b.column(0) * lo)), to_vec(&(p0 + b.column(0) * hi))]] } else { Vec::new() };
    let basis = (0..m).map(|k| to_vec(&b.column(k).into_owned())).collect();
    Some((Fit::Plane { dim: m, origin: to_vec(p0), basis }, residual, samples))
}

fn circular_lines(net: &CircularNet) -> Vec<FittedLine> {
    let pair = net.constraints();
    let mut out = Vec::new();
    for (family, len, kind) in [
        ("row", net.rows(), pair.map_or(LineKind::CIRCULAR, |p| p.rows)),
        ("col", net.cols(), pair.map_or(LineKind::CIRCULAR, |p| p.cols)),
    ] {
        for index in 0..len {
            let pts: Vec<&DVector<f64>> = if family == "row" {
                (0..net.cols()).map(|j| net.point(index, j)).collect()
            } else {
                (0..net.rows()).map(|i| net.point(i, index)).collect()
            };
            let fit = match kind {
                LineKind::Spherical(m) if m < net.n() => sphere_fit(&pts, m),
                LineKind::Planar(m) if m < net.n() => plane_fit(&pts, m),
                _ => None,
            };
            if let Some((object, residual, samples)) = fit {
                out.push(FittedLine { family, index, object, residual, samples });
            }
        }
    }
    out
}

fn projective_lines(net: &qnets::qnet::QNet) -> Vec<FittedLine> {
    let mut out = Vec::new();
    let dim = |pts: Vec<&qnets::projlin::HPoint>| match projlin::stack_points(&pts) {
        Ok(m) => projlin::numerical_rank(&m, projlin::rank_tol()).saturating_sub(1),
        Err(_) => 0,
    };
    for i in 0..net.rows() {
        out.push(FittedLine { family: "row", index: i, object: Fit::Span { dim: dim(net.v_points(i)) }, residual: 0.0, samples: Vec::new() });
    }
    for j in 0..net.cols() {
        out.push(FittedLine { family: "col", index: j, object: Fit::Span { dim: dim(net.h_points(j)) }, residual: 0.0, samples: Vec::new() });
    }
    out
}

pub fn fitted_objects(net: &AnyNet) -> FittedObjects {
    match net {
        AnyNet::Circular(c) => {
            let (envelope, envelope_error) = match c.constraints() {
                Some(pair) => match moebius::verify_envelope(c, pair) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                },
                None => (None, None),
            };
            FittedObjects {
                kind: "circular",
                ambient: c.n(),
                rows: c.rows(),
                cols: c.cols(),
                constraints: c.constraints().map(|p| p.name()),
                lines: circular_lines(c),
                envelope,
                envelope_error,
            }
        }
        AnyNet::Projective(q) => FittedObjects {
            kind: "qnet",
            ambient: q.ambient(),
            rows: q.rows(),
            cols: q.cols(),
            constraints: None,
            lines: projective_lines(q),
            envelope: None,
            envelope_error: None,
        },
    }
}

/// Point cloud of real contact points of the first simple generation: each
/// sampled generation sphere touches the cyclide at up to two points.
pub fn cyclide_obj(space: &MoebiusSpace, c: &CyclideGenerations, rng: &mut Rng) -> Result<String, Failure> {
    let g = c
        .generations
        .iter()
        .find(|g| g.multiplicity == 1)
        .ok_or_else(|| Failure::Usage("no simple real generation to sample".into()))?;
    let mut s = String::new();
    let _ = writeln!(s, "o cyclide_contacts");
    for _ in 0..400 {
        let Ok((sphere, _)) = cyclide::sample_generation_sphere(space, g, rng) else { continue };
        let u = space.form() * &sphere;
        let contact = match cyclide::tangency_certificate(space, &g.form, &g.apex, &u) {
            Ok(t) => t,
            Err(GeomError::Hypothesis(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        if !contact.real {
            continue;
        }
        for p in &contact.points {
            if let Ok(moebius::Projected::Finite(x)) = space.project(p) {
                let _ = writeln!(s, "v {} {} {}", x[0], x.get(1).copied().unwrap_or(0.0), x.get(2).copied().unwrap_or(0.0));
            }
        }
    }
    Ok(s)
}
