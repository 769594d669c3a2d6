//! Deterministic random sampling of points, subspaces and quadrics.

use nalgebra::{DMatrix, DVector};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GeomError, Result};
use crate::projlin::{self, HPoint, Quadric, Subspace};

/// The random generator used throughout: ChaCha with 8 rounds, seeded
/// from a 64-bit integer via `SeedableRng::seed_from_u64`.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of attempts before a genericity failure aborts.
pub const MAX_RETRIES: usize = 20;

pub fn gaussian(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn gaussian_vector(dim: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| gaussian(rng))
}

pub fn gaussian_matrix(r: usize, c: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| gaussian(rng))
}

/// Uniformly random point of `RP^n`.
pub fn random_point(n: usize, rng: &mut Rng) -> HPoint {
    loop {
        if let Ok(p) = HPoint::new(gaussian_vector(n + 1, rng)) {
            return p;
        }
    }
}

/// Random point of a subspace.
pub fn random_point_in(s: &Subspace, rng: &mut Rng) -> HPoint {
    loop {
        let c = gaussian_vector(s.dim() + 1, rng);
        if let Ok(p) = s.point_at(&c) {
            return p;
        }
    }
}

/// Random subspace of projective dimension `k` inside `s`.
pub fn random_subspace_in(s: &Subspace, k: usize, rng: &mut Rng) -> Result<Subspace> {
    if k > s.dim() {
        return Err(GeomError::Invalid(format!("dimension {k} exceeds {}", s.dim())));
    }
    for _ in 0..MAX_RETRIES {
        let c = gaussian_matrix(s.dim() + 1, k + 1, rng);
        let sub = Subspace::from_columns(&(s.basis() * c))?;
        if sub.dim() == k {
            return Ok(sub);
        }
    }
    Err(GeomError::NonGeneric("random subspace rank deficient".into()))
}

pub fn random_subspace(n: usize, k: usize, rng: &mut Rng) -> Result<Subspace> {
    random_subspace_in(&Subspace::whole(n), k, rng)
}

/// Random orthogonal matrix (QR of a Gaussian matrix, sign corrected).
pub fn random_orthogonal(d: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = gaussian_matrix(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            let col = -q.column(k);
            q.set_column(k, &col);
        }
    }
    q
}

/// Random nondegenerate quadric in `RP^n` with `p` positive and `n+1-p`
/// negative eigenvalues, eigenvalue magnitudes in `[0.5, 2]`.
pub fn random_quadric(n: usize, p: usize, rng: &mut Rng) -> Quadric {
    let d = n + 1;
    let o = random_orthogonal(d, rng);
    let diag = DVector::from_fn(d, |k, _| {
        let m = 0.5 + 1.5 * rng.random::<f64>();
        if k < p {
            m
        } else {
            -m
        }
    });
    let f = &o * DMatrix::from_diagonal(&diag) * o.transpose();
    Quadric::new(f).expect("nonzero form")
}

/// Random nondegenerate quadric with real points and random split of signs.
pub fn random_indefinite_quadric(n: usize, rng: &mut Rng) -> Quadric {
    let p = rng.random_range(1..=n);
    random_quadric(n, p, rng)
}

/// Random point on `q ∩ s`. When `through` is a known point of `q ∩ s`, the
/// result is the second intersection of a random line of `s` through it.
pub fn point_on_quadric(q: &Quadric, s: &Subspace, through: Option<&HPoint>, rng: &mut Rng) -> Result<HPoint> {
    if s.dim() == 0 {
        let p = s.as_point().expect("point subspace");
        let r = q.incidence(&p);
        if r > projlin::INCIDENCE_TOL {
            return Err(GeomError::NotOnQuadric { residual: r });
        }
        return Ok(p);
    }
    if let Some(p0) = through {
        for _ in 0..MAX_RETRIES {
            let other = random_point_in(s, rng);
            let line = match projlin::join(&[&p0.to_subspace(), &other.to_subspace()]) {
                Ok(l) if l.dim() == 1 => l,
                _ => continue,
            };
            match projlin::second_intersection(&line, p0, q) {
                Ok(x) if !x.tangent && x.transversality > 1e-3 && x.point.distance(p0) > 1e-3 => {
                    return Ok(x.point)
                }
                Ok(_) | Err(GeomError::IsotropicLine) => continue,
                Err(e) => return Err(e),
            }
        }
        return Err(GeomError::NonGeneric("no transversal line through known point".into()));
    }
    let b = s.basis();
    let g = b.transpose() * q.form() * b;
    let k = g.nrows();
    for _ in 0..(20 * MAX_RETRIES) {
        let x = gaussian_vector(k, rng);
        let y = gaussian_vector(k, rng);
        let gxx = x.dot(&(&g * &x));
        let gyy = y.dot(&(&g * &y));
        if gxx * gyy >= 0.0 {
            continue;
        }
        let gxy = x.dot(&(&g * &y));
        // roots of gxx + 2 t gxy + t^2 gyy = 0, real because gxx gyy < 0
        let disc = gxy * gxy - gxx * gyy;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let t = (-gxy + sign * disc.sqrt()) / gyy;
        let c = &x + &y * t;
        return s.point_at(&c);
    }
    Err(GeomError::NonGeneric("restricted quadric has no real points".into()))
}
