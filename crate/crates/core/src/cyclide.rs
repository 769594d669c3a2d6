//! Darboux cyclides `D = M^n ∩ Q` as base loci of pencils through the
//! Möbius quadric, and their generations by hypersphere families.
//!
//! Every degenerate member `K_i` of the pencil spanned by `M^n` and `Q` is
//! a cone with apex `A_i`. The hyperspheres whose poles lie on the dual of
//! `K_i`, i.e. the poles of tangent hyperplanes of `K_i`, touch `D` twice
//! and are orthogonal to `A_i^⊥ ∩ M^n`. Their centres lie on a quadric, and
//! the centre quadrics of all generations are confocal.
//!
//! Only real degenerate members are computed.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::moebius::{absolute_dual, MoebiusSpace, SphereRep};
use crate::projlin::{self, HPoint, Pencil, Quadric, Subspace};
use crate::sample::{self, Rng};

/// Relative eigenvalue threshold for pseudo-inverses of cones.
const PINV_TOL: f64 = 1e-9;
/// Threshold of apex conjugacy.
pub const CONJUGACY_TOL: f64 = 1e-8;
/// Threshold of confocality and orthogonality tests.
pub const CONFOCAL_TOL: f64 = 1e-6;
/// Largest tangency defect accepted by [`tangency_certificate`].
pub const TANGENCY_TOL: f64 = 1e-6;

/// Pseudo-inverse of a symmetric matrix.
pub fn symmetric_pinv(k: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = projlin::symmetric_eigen(k);
    let vmax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let d = k.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (t, &l) in vals.iter().enumerate() {
        if l.abs() > PINV_TOL * vmax {
            let v = vecs.column(t);
            out += v * v.transpose() / l;
        }
    }
    out
}

/// How a tangent hyperplane of a cone touches the cyclide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contact {
    /// The contact line through the apex, as two spanning vectors.
    #[serde(skip)]
    pub line: Option<Subspace>,
    /// Relative tangency defect `|u^T K^+ u|` of the hyperplane.
    pub tangency: f64,
    /// Distance of the contact line's second point to the hyperplane.
    pub in_hyperplane: f64,
    /// Largest value of the cone form on the contact line (unit vectors).
    pub on_cone: f64,
    /// Both intersections with `M^n` are real.
    pub real: bool,
    /// Discriminant of the restricted Möbius form, relative.
    pub discriminant: f64,
    /// The two contact points when real; the midpoint of the conjugate
    /// pair otherwise.
    #[serde(skip)]
    pub points: Vec<HPoint>,
}

/// The isotropic contact line of a hyperplane (normal `u`) tangent to a
/// cone with form `k` and apex `apex`, and its intersection with `M^n`.
pub fn tangency_certificate(space: &MoebiusSpace, k: &DMatrix<f64>, apex: &HPoint, u: &DVector<f64>) -> Result<Contact> {
    let kp = symmetric_pinv(k);
    let un = u / u.norm();
    let tangency = (un.dot(&(&kp * &un))).abs() / kp.norm();
    if tangency > TANGENCY_TOL || un.dot(apex.coords()).abs() > TANGENCY_TOL {
        return Err(GeomError::Hypothesis(format!("hyperplane not tangent to the cone (defect {tangency:e})")));
    }
    let x = &kp * &un;
    let a = apex.coords().clone();
    // remove the apex component so the line is well conditioned
    let x = &x - &a * a.dot(&x);
    if x.norm() < 1e-14 {
        return Err(GeomError::NonGeneric("hyperplane has no contact line".into()));
    }
    let x = &x / x.norm();
    let in_hyperplane = un.dot(&x).abs();
    let kn = k / k.norm();
    let on_cone = [x.dot(&(&kn * &x)).abs(), a.dot(&(&kn * &x)).abs(), a.dot(&(&kn * &a)).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let line = Subspace::from_columns(&DMatrix::from_columns(&[a.clone(), x.clone()]))?;
    let gaa = space.lorentz(&a, &a);
    let gax = space.lorentz(&a, &x);
    let gxx = space.lorentz(&x, &x);
    let disc = gax * gax - gaa * gxx;
    let scale = gax * gax + (gaa * gxx).abs();
    let rel = if scale > 0.0 { disc / scale } else { 0.0 };
    let real = rel >= -1e-12;
    let points = if real {
        let r = disc.max(0.0).sqrt();
        if gaa.abs() > 1e-14 {
            // s a + x with gaa s^2 + 2 gax s + gxx = 0
            let s1 = (-gax + r) / gaa;
            let s2 = (-gax - r) / gaa;
            vec![HPoint::new(&a * s1 + &x)?, HPoint::new(&a * s2 + &x)?]
        } else {
            // the apex lies on M^n: a and one further point
            let t = -gxx / (2.0 * gax);
            vec![HPoint::new(a.clone())?, HPoint::new(&a * t + &x)?]
        }
    } else {
        vec![HPoint::new(&a * (-gax / gaa) + &x)?]
    };
    Ok(Contact { line: Some(line), tangency, in_hyperplane, on_cone, real, discriminant: rel, points })
}

/// A cone with prescribed apex fitted to tangent hyperplanes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationCone {
    pub apex: HPoint,
    #[serde(skip)]
    pub form: DMatrix<f64>,
    /// Relative residual of the dual fit in the quotient by the apex.
    pub residual: f64,
    pub gap: f64,
    pub contacts: Vec<Contact>,
}

/// Fits the cone with apex `apex` tangent to all `hyperplanes`: the dual
/// quadric of the quotient space `RP^{n+1} / apex` through the hyperplane
/// coordinates.
pub fn fit_generation_cone(space: &MoebiusSpace, apex: &HPoint, hyperplanes: &[&Subspace]) -> Result<GenerationCone> {
    let w = apex.to_subspace().complement();
    let d = w.ncols();
    let mut normals = Vec::new();
    let mut coords = Vec::new();
    for h in hyperplanes {
        let c = h.complement();
        if c.ncols() != 1 {
            return Err(GeomError::Invalid("expected hyperplanes".into()));
        }
        let u = c.column(0).into_owned();
        coords.push(HPoint::new(w.transpose() * &u)?);
        normals.push(u);
    }
    if coords.len() < d * (d + 1) / 2 {
        return Err(GeomError::UnderDetermined { dim: d * (d + 1) / 2 - coords.len() });
    }
    let refs: Vec<&HPoint> = coords.iter().collect();
    let fit = projlin::fit_quadric(&refs, &[])?;
    let dual = fit.quadric.form().clone();
    let point_form = dual.clone().try_inverse().ok_or(GeomError::PencilDegenerate)?;
    let k = &w * point_form * w.transpose();
    let k = &k / k.norm();
    let contacts = normals
        .iter()
        .map(|u| tangency_certificate(space, &k, apex, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(GenerationCone { apex: apex.clone(), form: k, residual: fit.residual, gap: fit.gap, contacts })
}

/// One real generation of a cyclide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generation {
    pub lambda: f64,
    pub mu: f64,
    pub multiplicity: usize,
    pub corank: usize,
    #[serde(skip)]
    pub form: DMatrix<f64>,
    pub apex: HPoint,
    /// `A^⊥ ∩ M^n`, orthogonal to every sphere of the generation.
    pub orthogonal_sphere: SphereRep,
    /// Homogeneous form of the centre quadric in `RP^n` (coordinates
    /// `(c, w)`), when the generation has finite centres.
    #[serde(skip)]
    pub centre_quadric: Option<DMatrix<f64>>,
}

/// Output of [`analyze_cyclide`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclideGenerations {
    pub n: usize,
    pub generations: Vec<Generation>,
    /// Real degenerate members counted with multiplicity.
    pub real_count: usize,
    /// `n + 2 - real_count`.
    pub complex_count: usize,
    /// All `n + 2` roots of the determinant are simple.
    pub general: bool,
    /// Largest `|φ(A_i, A_k)|` over pairs of apexes, on unit vectors.
    pub conjugacy: f64,
    /// Largest confocality residual over pairs of centre quadrics.
    pub confocality: f64,
}

/// Centre quadric of the generation with cone `k` and apex `a`: the centres
/// `c / w` of spheres `s = c + w e_0 + t e_inf` with `<a, s> = 0` and
/// `s^T J K^+ J s = 0`.
pub fn centre_quadric(space: &MoebiusSpace, k: &DMatrix<f64>, a: &DVector<f64>) -> Option<DMatrix<f64>> {
    let n = space.n();
    let e0 = space.e0();
    let einf = space.e_inf();
    let ainf = space.lorentz(a, &einf);
    if ainf.abs() < 1e-10 * a.norm() {
        return None;
    }
    // columns: images of the unit coordinates of (c, w)
    let mut l = DMatrix::zeros(n + 2, n + 1);
    for t in 0..=n {
        let base = if t < n {
            let mut v = DVector::zeros(n);
            v[t] = 1.0;
            space.from_parts(&v, 0.0, 0.0)
        } else {
            e0.clone()
        };
        let col = &base - &einf * (space.lorentz(a, &base) / ainf);
        l.set_column(t, &col);
    }
    let j = space.form();
    let c = &j * symmetric_pinv(k) * &j;
    let g = l.transpose() * c * l;
    Some((&g + g.transpose()) * 0.5)
}

/// Confocality of two centre quadrics: the dual of one lies in the pencil
/// spanned by the dual of the other and the absolute dual.
pub fn confocal_residual(g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> Result<f64> {
    let k = g1.nrows() - 1;
    let d1 = projlin::dual_form(g1)?;
    let d2 = projlin::dual_form(g2)?;
    Ok(projlin::span_residual(&d2, &[&d1, &absolute_dual(k)]))
}

/// Real generations of the cyclide `M^n ∩ q`.
pub fn analyze_cyclide(q: &Quadric, space: &MoebiusSpace) -> Result<CyclideGenerations> {
    let n = space.n();
    let j = space.form();
    if projlin::span_residual(q.form(), &[&j]) < 1e-10 {
        return Err(GeomError::ProportionalForms);
    }
    let pencil = Pencil::from_forms(j.clone(), q.form().clone())?;
    let members = projlin::degenerate_members(&pencil)?;
    let mut generations = Vec::new();
    for m in &members {
        let (vals, vecs) = projlin::symmetric_eigen(&m.form);
        let t = (0..vals.len()).min_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs())).expect("nonempty");
        let apex = HPoint::new(vecs.column(t).into_owned())?;
        let orthogonal_sphere = space.classify(apex.coords());
        let centre = centre_quadric(space, &m.form, apex.coords());
        generations.push(Generation {
            lambda: m.lambda,
            mu: m.mu,
            multiplicity: m.multiplicity,
            corank: m.corank,
            form: m.form.clone(),
            apex,
            orthogonal_sphere,
            centre_quadric: centre,
        });
    }
    let mut conjugacy = 0.0f64;
    let mut confocality = 0.0f64;
    for a in 0..generations.len() {
        for b in a + 1..generations.len() {
            let (x, y) = (generations[a].apex.coords(), generations[b].apex.coords());
            conjugacy = conjugacy.max(space.phi_unit(x, y));
            if let (Some(g1), Some(g2)) = (&generations[a].centre_quadric, &generations[b].centre_quadric) {
                if let Ok(r) = confocal_residual(g1, g2) {
                    confocality = confocality.max(r);
                }
            }
        }
    }
    let real_count: usize = members.iter().map(|m| m.multiplicity).sum();
    let general = pencil_is_general(&pencil, n + 2)?;
    Ok(CyclideGenerations {
        n,
        generations,
        real_count,
        complex_count: (n + 2).saturating_sub(real_count),
        general,
        conjugacy,
        confocality,
    })
}

/// The determinant polynomial has `degree` simple roots over `C`, decided
/// by the minimal root separation of the companion matrix.
fn pencil_is_general(p: &Pencil, degree: usize) -> Result<bool> {
    let coeffs = projlin::pencil_polynomial(p)?;
    // coefficients of det(t a + b), ascending in t
    let lead = coeffs.iter().rposition(|c| c.abs() > 1e-10 * coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs())));
    let deg = match lead {
        Some(d) => d,
        None => return Ok(false),
    };
    if deg < degree {
        // a root at infinity; simple iff the remaining roots are simple and
        // the degree drops by one
        if deg + 1 < degree {
            return Ok(false);
        }
    }
    let mut comp = DMatrix::zeros(deg, deg);
    for r in 1..deg {
        comp[(r, r - 1)] = 1.0;
    }
    for r in 0..deg {
        comp[(r, deg - 1)] = -coeffs[r] / coeffs[deg];
    }
    let roots = projlin::general_eigenvalues(&comp);
    for a in 0..roots.len() {
        for b in a + 1..roots.len() {
            let d = ((roots[a].0 - roots[b].0).powi(2) + (roots[a].1 - roots[b].1).powi(2)).sqrt();
            let s = 1.0 + (roots[a].0.powi(2) + roots[a].1.powi(2)).sqrt();
            if d < 1e-5 * s {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Random hypersphere of a generation: the pole of the tangent hyperplane
/// of the cone at a random real point.
pub fn sample_generation_sphere(space: &MoebiusSpace, g: &Generation, rng: &mut Rng) -> Result<(DVector<f64>, HPoint)> {
    let cone = Quadric::new(g.form.clone())?;
    let n = g.form.nrows() - 1;
    for _ in 0..sample::MAX_RETRIES {
        let x = sample::point_on_quadric(&cone, &Subspace::whole(n), None, rng)?;
        if x.distance(&g.apex) < 1e-3 {
            continue;
        }
        let u = &g.form * x.coords();
        if u.norm() < 1e-10 * g.form.norm() {
            continue;
        }
        let s = space.form() * u;
        return Ok((s, x));
    }
    Err(GeomError::NonGeneric("no regular point on the cone".into()))
}
