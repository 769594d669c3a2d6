//! Randomized verification suites.
//!
//! Each criterion runs a fixed number of random trials and reduces them to
//! named checks: the worst value seen, the bound it must respect, and how
//! many trials violated it. Trials draw from their own generator derived
//! from `(seed, criterion, trial)`, so reports are reproducible
//! byte-for-byte and independent of evaluation order.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cyclide;
use crate::error::GeomError;
use crate::inscribed::{self, ConstrainedSeed};
use crate::lie;
use crate::moebius::{self, CircularNet, ConstraintPair, Family, MoebiusSpace};
use crate::projlin::{self, HPoint, Subspace};
use crate::qnet::{self, Direction};
use crate::sample::{self, Rng};

/// Which criteria to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Laplace,
    QuadricNets,
    Extend,
    Envelope,
    Lie,
    Cyclide,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        Some(match s {
            "laplace" => Suite::Laplace,
            "thm11" => Suite::QuadricNets,
            "extend" => Suite::Extend,
            "envelope" => Suite::Envelope,
            "lie" => Suite::Lie,
            "cyclide" => Suite::Cyclide,
            "all" => Suite::All,
            _ => return None,
        })
    }

    pub fn criteria(self) -> Vec<u32> {
        match self {
            Suite::QuadricNets => vec![1],
            Suite::Laplace => vec![2],
            Suite::Extend => vec![3, 4],
            Suite::Envelope => vec![5, 6],
            Suite::Lie => vec![7],
            Suite::Cyclide => vec![8],
            Suite::All => (1..=8).collect(),
        }
    }
}

/// Seed and trial-count override for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Replaces every per-group trial count when set.
    pub trials: Option<usize>,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        SuiteConfig { seed, trials: None }
    }

    fn trials(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }
}

/// One reduced check of a criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// `"below"`: every value must be `< threshold`; `"above"`: `> threshold`.
    pub bound: &'static str,
    pub threshold: f64,
    /// Worst value over the samples.
    pub worst: Option<f64>,
    pub samples: usize,
    pub violations: usize,
    pub pass: bool,
}

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub checks: Vec<Check>,
    /// Trials aborted by an error.
    pub errors: usize,
    /// The first few error messages.
    pub error_messages: Vec<String>,
    pub notes: Vec<String>,
    pub pass: bool,
}

/// Outcome of a suite, criteria sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
    pub pass: bool,
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> SuiteReport {
    let mut criteria: Vec<CriterionReport> = suite.criteria().into_iter().map(|id| run_criterion(id, cfg)).collect();
    criteria.sort_by_key(|c| c.id);
    let pass = criteria.iter().all(|c| c.pass);
    SuiteReport { seed: cfg.seed, criteria, pass }
}

/// Runs criterion `id` (1 to 8).
pub fn run_criterion(id: u32, cfg: &SuiteConfig) -> CriterionReport {
    match id {
        1 => quadric_nets(cfg),
        2 => laplace_identities(cfg),
        3 => extension(cfg),
        4 => termination(cfg),
        5 => incidence(cfg),
        6 => envelope(cfg),
        7 => lie_suite(cfg),
        8 => cyclide_suite(cfg),
        _ => {
            let mut b = Builder::new(id, "unknown");
            b.error("criterion", GeomError::Invalid(format!("no criterion {id}")));
            b.finish()
        }
    }
}

// ---------------------------------------------------------------------------
// bookkeeping

struct Acc {
    name: String,
    threshold: f64,
    above: bool,
    worst: Option<f64>,
    samples: usize,
    violations: usize,
}

impl Acc {
    fn add(&mut self, v: f64) {
        self.samples += 1;
        let ok = if self.above { v > self.threshold } else { v < self.threshold };
        if !ok {
            self.violations += 1;
        }
        self.worst = Some(match self.worst {
            None => v,
            Some(w) if v.is_nan() || w.is_nan() => f64::NAN,
            Some(w) if self.above => w.min(v),
            Some(w) => w.max(v),
        });
    }
}

const MAX_MESSAGES: usize = 5;

struct Builder {
    id: u32,
    name: String,
    accs: Vec<Acc>,
    errors: usize,
    messages: Vec<String>,
    notes: Vec<String>,
}

impl Builder {
    fn new(id: u32, name: &str) -> Self {
        Builder { id, name: name.into(), accs: Vec::new(), errors: 0, messages: Vec::new(), notes: Vec::new() }
    }

    fn acc(&mut self, name: &str, threshold: f64, above: bool) -> &mut Acc {
        if let Some(k) = self.accs.iter().position(|a| a.name == name) {
            return &mut self.accs[k];
        }
        self.accs.push(Acc { name: name.into(), threshold, above, worst: None, samples: 0, violations: 0 });
        self.accs.last_mut().expect("just pushed")
    }

    /// Declares a check so that it is reported even without samples.
    fn declare_below(&mut self, name: &str, threshold: f64) {
        self.acc(name, threshold, false);
    }

    fn below(&mut self, name: &str, threshold: f64, v: f64) {
        self.acc(name, threshold, false).add(v);
    }

    fn above(&mut self, name: &str, threshold: f64, v: f64) {
        self.acc(name, threshold, true).add(v);
    }

    /// Records a boolean as a count of violations.
    fn holds(&mut self, name: &str, ok: bool) {
        self.below(name, 0.5, if ok { 0.0 } else { 1.0 });
    }

    fn error(&mut self, context: &str, e: GeomError) {
        self.errors += 1;
        if self.messages.len() < MAX_MESSAGES {
            self.messages.push(format!("{context}: {e}"));
        }
    }

    fn redraws(&mut self, n: usize) {
        if n > 0 {
            self.note(format!("{n} non-generic random constructions redrawn"));
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    fn finish(self) -> CriterionReport {
        let checks: Vec<Check> = self
            .accs
            .into_iter()
            .map(|a| Check {
                pass: a.samples > 0 && a.violations == 0,
                name: a.name,
                bound: if a.above { "above" } else { "below" },
                threshold: a.threshold,
                worst: a.worst,
                samples: a.samples,
                violations: a.violations,
            })
            .collect();
        let pass = self.errors == 0 && !checks.is_empty() && checks.iter().all(|c| c.pass);
        CriterionReport {
            id: self.id,
            name: self.name,
            checks,
            errors: self.errors,
            error_messages: self.messages,
            notes: self.notes,
            pass,
        }
    }
}

/// Runs a random construction, drawing again from the same generator when
/// it reports a non-generic configuration.
fn draw<T>(count: &Cell<usize>, rng: &mut Rng, mut f: impl FnMut(&mut Rng) -> crate::error::Result<T>) -> crate::error::Result<T> {
    let mut last = None;
    for _ in 0..sample::MAX_RETRIES {
        match f(rng) {
            Err(e) if matches!(e.root(), GeomError::NonGeneric(_)) => {
                count.set(count.get() + 1);
                last = Some(e);
            }
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Generator of trial `k` of criterion `id`.
fn trial_rng(seed: u64, id: u32, k: usize) -> Rng {
    let mix = seed ^ (u64::from(id) << 56) ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    sample::rng(mix)
}

// ---------------------------------------------------------------------------
// 1: nets with parameter lines in quadrics

fn quadric_nets(cfg: &SuiteConfig) -> CriterionReport {
    let mut b = Builder::new(1, "Conjugate nets with all lines in quadrics");
    let redraws = Cell::new(0usize);
    let trials = cfg.trials(500);
    let mut k = 0;
    for m in 2..=4usize {
        for n in m..=m + 2 {
            let fwd = format!("forward conjugacy m={m} n={n}");
            let conv = format!("converse conjugacy after 1e-2 perturbation m={m} n={n}");
            b.declare_below(&fwd, 1e-8);
            for _ in 0..trials {
                let mut rng = trial_rng(cfg.seed, 1, k);
                k += 1;
                let res = (|| {
                    let q = sample::random_indefinite_quadric(n, &mut rng);
                    let ins = draw(&redraws, &mut rng, |r| inscribed::random_inscribed_net(m, m, &q, r))?;
                    let on = inscribed::check_theorem_1_1(&ins.net, &q)?;
                    let off = draw(&redraws, &mut rng, |r| inscribed::perturb_last_vertex(&ins.net, &q, 1e-2, r))?;
                    let off = inscribed::check_theorem_1_1(&off, &q)?;
                    Ok::<_, GeomError>((on.conjugacy_residual, off.conjugacy_residual))
                })();
                match res {
                    Ok((on, off)) => {
                        b.below(&fwd, 1e-8, on);
                        b.above(&conv, 1e-4, off);
                    }
                    Err(e) => b.error(&format!("m={m} n={n}"), e),
                }
            }
        }
    }
    b.redraws(redraws.get());
    b.finish()
}

// ---------------------------------------------------------------------------
// 2: Laplace transforms

fn laplace_identities(cfg: &SuiteConfig) -> CriterionReport {
    let mut b = Builder::new(2, "Laplace transform identities");
    let redraws = Cell::new(0usize);
    let trials = cfg.trials(200);
    let tol = 1e-8;
    for k in 0..trials {
        let mut rng = trial_rng(cfg.seed, 2, k);
        let res = (|| {
            use rand::Rng as _;
            // shift identity
            let (r, c, n) = (rng.random_range(3..=6), rng.random_range(3..=6), rng.random_range(2..=5));
            let net = draw(&redraws, &mut rng, |g| qnet::random_qnet(r, c, n, g))?;
            let ab = qnet::laplace_transform(&qnet::laplace_transform(&net, Direction::B)?, Direction::A)?;
            let ba = qnet::laplace_transform(&qnet::laplace_transform(&net, Direction::A)?, Direction::B)?;
            let mut shift = 0.0f64;
            for i in 0..ab.rows() {
                for j in 0..ab.cols() {
                    shift = shift.max(ab.at(i, j).distance(net.at(i + 1, j + 1)));
                    shift = shift.max(ba.at(i, j).distance(net.at(i + 1, j + 1)));
                }
            }
            b.below("L_A L_B equals the diagonal shift", tol, shift);

            // transforms are Q-nets
            let (r, c, n) = (rng.random_range(3..=8), rng.random_range(3..=8), rng.random_range(3..=6));
            let net = draw(&redraws, &mut rng, |g| qnet::random_qnet(r, c, n, g))?;
            let mut planar = 0.0f64;
            for dir in [Direction::A, Direction::B] {
                planar = planar.max(qnet::planarity_residual(&qnet::laplace_transform(&net, dir)?));
            }
            b.below("Laplace transforms are Q-nets", tol, planar);

            // parameter lines in m-dimensional subspaces <=> Goursat at step m
            let m = 1 + k % 3;
            let n = m + 2;
            let net = draw(&redraws, &mut rng, |g| qnet::goursat_net(m + 2, m + 2, n, m, None, g))?;
            let rep = qnet::classify_degeneracy(&net, Direction::A, m)?;
            b.below("subspace parameter lines give Goursat degeneracy", tol, rep.goursat_spread);
            let mut excess = 0.0f64;
            for j in 0..net.cols() {
                let pts = net.h_points(j);
                let mat = DMatrix::from_fn(n + 1, pts.len(), |r, c| pts[c].coords()[r]);
                let mut s = projlin::singular_values(&mat);
                s.sort_by(|a, b| b.total_cmp(a));
                excess = excess.max(s.get(m + 1).copied().unwrap_or(0.0) / s[0]);
            }
            b.below("Goursat degeneracy gives parameter lines of dimension m", tol, excess);

            // meets of consecutive row spans are points <=> Laplace at step m
            let net = draw(&redraws, &mut rng, |g| qnet::laplace_degenerate_net(m + 2, m + 3, m + 2, m, g))?;
            let lm = qnet::laplace_power(&net, Direction::A, m)?;
            let rep = qnet::classify_degeneracy(&net, Direction::A, m)?;
            b.below("point meets give Laplace degeneracy", tol, rep.laplace_spread);
            let mut meet_res = 0.0f64;
            let mut dist = 0.0f64;
            for i in 0..lm.rows() {
                let (x, r) = qnet::laplace_meet(&net, i, m)?;
                meet_res = meet_res.max(r);
                dist = dist.max(x.distance(lm.at(i, 0)));
            }
            b.below("Laplace degeneracy gives point meets", tol, meet_res);
            b.below("degenerate point equals the meet", tol, dist);
            Ok::<_, GeomError>(())
        })();
        if let Err(e) = res {
            b.error(&format!("trial {k}"), e);
        }
    }
    b.redraws(redraws.get());
    b.finish()
}

// ---------------------------------------------------------------------------
// 3: extension of inscribed nets

fn extension(cfg: &SuiteConfig) -> CriterionReport {
    let mut b = Builder::new(3, "Extension of nets with d-dimensional parameter lines");
    let redraws = Cell::new(0usize);
    let trials = cfg.trials(100);
    let steps = 5;
    let mut k = 0;
    for (d, n) in [(1, 5), (2, 4), (3, 6)] {
        for _ in 0..trials {
            let mut rng = trial_rng(cfg.seed, 3, k);
            k += 1;
            let res = (|| {
                let (_, reports) = draw(&redraws, &mut rng, |r| inscribed::extend_all(&ConstrainedSeed::random(d, n, steps, r)?))?;
                if reports.len() != steps {
                    return Err(GeomError::Invalid(format!("{} extension steps instead of {steps}", reports.len())));
                }
                Ok(reports)
            })();
            match res {
                Ok(reports) => {
                    for r in &reports {
                        b.below(&format!("new vertices on the quadric d={d}"), 1e-8, r.new_incidence);
                        b.below(&format!("X and Y drift d={d}"), 1e-7, r.x_drift.max(r.y_drift));
                        b.below(&format!("parameter lines beyond dimension d d={d}"), 1e-9, r.excess_dim);
                        b.above(&format!("parameter lines reach dimension d d={d}"), 1e-9, r.min_dim_gap);
                    }
                }
                Err(e) => b.error(&format!("d={d}"), e),
            }
        }
    }
    b.redraws(redraws.get());
    b.finish()
}

// ---------------------------------------------------------------------------
// 4: terminating Goursat and Laplace sequences

fn termination(cfg: &SuiteConfig) -> CriterionReport {
    let mut b = Builder::new(4, "Degeneracy of inscribed nets at the stated step");
    let redraws = Cell::new(0usize);
    let trials = cfg.trials(50);
    let tol = qnet::DEGENERACY_TOL;
    let goursat_cases = [(2, 3), (2, 4), (3, 4), (3, 5)];
    for k in 0..trials {
        let (m, n) = goursat_cases[k % goursat_cases.len()];
        let mut rng = trial_rng(cfg.seed, 4, k);
        let res = (|| {
            let q = sample::random_indefinite_quadric(n, &mut rng);
            let net = draw(&redraws, &mut rng, |r| inscribed::inscribed_goursat_net(m + 3, m + 3, m, &q, r))?;
            let rep = inscribed::check_goursat_implies_laplace(&net, m)?;
            let ctrl = draw(&redraws, &mut rng, |r| inscribed::random_inscribed_net(m + 3, m + 3, &q, r))?;
            let c = qnet::classify_degeneracy(&ctrl.net, Direction::B, m)?;
            Ok::<_, GeomError>((rep, c))
        })();
        match res {
            Ok((rep, c)) => {
                b.below("Goursat hypothesis: Laplace spread at step m", tol, rep.conclusion.laplace_spread);
                b.above("Goursat hypothesis: Laplace spread at step m-1", tol, rep.previous_spread.unwrap_or(f64::INFINITY));
                b.above("Goursat hypothesis: generic control spread", tol, c.goursat_spread.min(c.laplace_spread));
            }
            Err(e) => b.error(&format!("Goursat m={m} n={n}"), e),
        }
    }
    let laplace_cases = [(1, 2), (1, 3), (2, 3)];
    for k in 0..trials {
        let (m, n) = laplace_cases[k % laplace_cases.len()];
        let mut rng = trial_rng(cfg.seed, 4, 100_000 + k);
        let size = m + n + 2;
        let res = (|| {
            let q = sample::random_quadric(n, 2, &mut rng);
            let net = draw(&redraws, &mut rng, |r| inscribed::inscribed_laplace_net(size, size, m, &q, r))?;
            let rep = inscribed::check_laplace_implies_goursat(&net, m)?;
            let ctrl = draw(&redraws, &mut rng, |r| inscribed::random_inscribed_net(size, size, &q, r))?;
            let c = qnet::classify_degeneracy(&ctrl.net, Direction::B, m + n - 1)?;
            Ok::<_, GeomError>((rep, c))
        })();
        match res {
            Ok((rep, c)) => {
                b.below("Laplace hypothesis: Goursat spread at step m+n-1", tol, rep.conclusion.goursat_spread);
                b.above("Laplace hypothesis: Goursat spread at step m+n-2", tol, rep.previous_spread.unwrap_or(f64::INFINITY));
                b.above("Laplace hypothesis: generic control spread", tol, c.goursat_spread.min(c.laplace_spread));
            }
            Err(e) => b.error(&format!("Laplace m={m} n={n}"), e),
        }
    }
    b.redraws(redraws.get());
    b.finish()
}

// ---------------------------------------------------------------------------
// 5: incidence theorems of circular nets

fn incidence(cfg: &SuiteConfig) -> CriterionReport {
    let mut b = Builder::new(5, "Incidence theorems of constrained circular nets");
    let redraws = Cell::new(0usize);
    let trials = cfg.trials(100);
    let mut k = 0;
    for entry in moebius::pair_table() {
        let corner = format!("{}: corner certificates", entry.name);
        b.declare_below(&corner, moebius::CERT_TOL);
        for t in 0..trials {
            let n = entry.ambients[t % entry.ambients.len()];
            let mut rng = trial_rng(cfg.seed, 5, k);
            k += 1;
            let res = (|| {
                let space = MoebiusSpace::new(n)?;
                let (_, report) = draw(&redraws, &mut rng, |r| {
                    let seed = moebius::random_seed(&space, entry.pair, r)?;
                    moebius::grow_net(&seed, entry.pair, 2, r)
                })?;
                Ok::<_, GeomError>(report)
            })();
            match res {
                Ok(report) => {
                    b.below(&corner, moebius::CERT_TOL, report.worst_corner());
                    let six: Vec<f64> = report.corners.iter().filter_map(|c| c.six_circles).collect();
                    if !six.is_empty() {
                        b.below(&format!("{}: six concyclicity conditions", entry.name), 1e-8, six.iter().copied().fold(0.0, f64::max));
                    }
                }
                Err(e) => b.error(&format!("{} n={n}", entry.name), e),
            }
        }
    }
    if !b.accs.iter().any(|a| a.name.contains("six concyclicity")) {
        b.declare_below("circular-circular: six concyclicity conditions", 1e-8);
    }
    b.redraws(redraws.get());
    b.finish()
}

// ---------------------------------------------------------------------------
// 6: envelopes

fn envelope(cfg: &SuiteConfig) -> CriterionReport {
    let mut b = Builder::new(6, "Envelopes and cyclides of constrained circular nets");
    let redraws = Cell::new(0usize);
    let trials = cfg.trials(10);
    let mut k = 0;
    let cases: [(&str, usize, Option<usize>); 5] = [
        ("circular-circular", 2, None),
        ("spherical-spherical", 3, Some(11)),
        ("linear-linear", 2, Some(6)),
        ("linear-planar", 3, Some(7)),
        ("planar-planar", 3, Some(7)),
    ];
    for (name, n, size) in cases {
        let pair = ConstraintPair::parse(name).expect("known pair");
        for _ in 0..trials {
            let mut rng = trial_rng(cfg.seed, 6, k);
            k += 1;
            let res = (|| {
                let space = MoebiusSpace::new(n)?;
                let net = draw(&redraws, &mut rng, |r| match size {
                    Some(s) => Ok(moebius::construct(&space, pair, s, s, r)?.0),
                    None => {
                        let seed = moebius::random_seed(&space, pair, r)?;
                        Ok(moebius::grow_net(&seed, pair, 3, r)?.0)
                    }
                })?;
                let report = moebius::verify_envelope(&net, pair)?;
                Ok::<_, GeomError>((net, report))
            })();
            let (net, report) = match res {
                Ok(v) => v,
                Err(e) => {
                    b.error(name, e);
                    continue;
                }
            };
            for c in &report.claims {
                b.below(&format!("{name}: {}", c.name), c.threshold, c.residual);
            }
            if name == "circular-circular" {
                match circle_oracles(&net, pair) {
                    Ok(o) => {
                        b.below("circular-circular: Euclidean orthogonal circle of the rows", 1e-6, o.row_orthogonal);
                        b.below("circular-circular: Euclidean orthogonal circle of the columns", 1e-6, o.col_orthogonal);
                        b.below("circular-circular: Euclidean orthogonality agrees with X and Y", 1e-6, o.agreement);
                        b.below("circular-circular: Euclidean orthogonal circles orthogonal", 1e-6, o.orthogonal);
                        b.below("circular-circular: Euclidean foci of the centre conics agree", 1e-6, o.foci);
                    }
                    Err(e) => b.error("circular-circular oracle", e),
                }
            }
        }
    }
    b.redraws(redraws.get());
    b.finish()
}

struct CircleOracles {
    row_orthogonal: f64,
    col_orthogonal: f64,
    agreement: f64,
    orthogonal: f64,
    foci: f64,
}

/// Circle through three points of the plane by perpendicular bisectors.
fn circle3(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> crate::error::Result<(DVector<f64>, f64)> {
    let m = DMatrix::from_row_slice(2, 2, &[b[0] - a[0], b[1] - a[1], c[0] - a[0], c[1] - a[1]]);
    let rhs = DVector::from_column_slice(&[0.5 * (b.norm_squared() - a.norm_squared()), 0.5 * (c.norm_squared() - a.norm_squared())]);
    let centre = m.lu().solve(&rhs).ok_or(GeomError::NonGeneric("collinear points".into()))?;
    let r2 = (a - &centre).norm_squared();
    Ok((centre, r2))
}

/// Circle orthogonal to all given circles, by least squares on
/// `2 <c, c_k> - (|c|^2 - r^2) = |c_k|^2 - r_k^2`; returns centre, radius²
/// (negative when imaginary) and the relative residual.
fn orthogonal_circle(circles: &[(DVector<f64>, f64)]) -> (DVector<f64>, f64, f64) {
    let a = DMatrix::from_fn(circles.len(), 4, |r, c| match c {
        0 | 1 => 2.0 * circles[r].0[c],
        2 => -1.0,
        _ => -(circles[r].0.norm_squared() - circles[r].1),
    });
    let (v, asc) = projlin::smallest_right_vectors(&a, 1);
    let x = v.column(0);
    let centre = DVector::from_column_slice(&[x[0] / x[3], x[1] / x[3]]);
    let w = x[2] / x[3];
    (centre.clone(), centre.norm_squared() - w, asc[0])
}

fn fit_conic(points: &[DVector<f64>]) -> [f64; 6] {
    let m = DMatrix::from_fn(points.len(), 6, |r, c| {
        let (x, y) = (points[r][0], points[r][1]);
        [x * x, x * y, y * y, x, y, 1.0][c]
    });
    let (v, _) = projlin::smallest_right_vectors(&m, 1);
    std::array::from_fn(|k| v[(k, 0)])
}

/// Foci of a central conic with coefficients of `x², xy, y², x, y, 1`.
fn conic_foci(coef: &[f64; 6]) -> crate::error::Result<Vec<DVector<f64>>> {
    let a = DMatrix::from_row_slice(2, 2, &[coef[0], coef[1] / 2.0, coef[1] / 2.0, coef[2]]);
    let bv = DVector::from_column_slice(&[coef[3] / 2.0, coef[4] / 2.0]);
    let centre = -a.clone().lu().solve(&bv).ok_or(GeomError::NonGeneric("conic without a centre".into()))?;
    let k = -(coef[5] + bv.dot(&centre));
    let (vals, vecs) = projlin::symmetric_eigen(&a);
    let (p, q) = (k / vals[0], k / vals[1]);
    let (axis, c2) = if p > q { (vecs.column(0).into_owned(), p - q) } else { (vecs.column(1).into_owned(), q - p) };
    let c = c2.sqrt();
    Ok(vec![&centre + &axis * c, &centre - &axis * c])
}

/// Euclidean cross-checks of a circular net with circular parameter lines
/// in the plane, independent of the Möbius lift.
fn circle_oracles(net: &CircularNet, pair: ConstraintPair) -> crate::error::Result<CircleOracles> {
    let circles = |fam: Family| -> crate::error::Result<Vec<(DVector<f64>, f64)>> {
        let len = if fam == Family::Rows { net.rows() } else { net.cols() };
        (0..len)
            .map(|k| {
                let p = |t: usize| if fam == Family::Rows { net.point(k, t) } else { net.point(t, k) };
                circle3(p(0), p(1), p(2))
            })
            .collect()
    };
    let rows = circles(Family::Rows)?;
    let cols = circles(Family::Cols)?;
    let (cy, ry2, row_orthogonal) = orthogonal_circle(&rows);
    let (cx, rx2, col_orthogonal) = orthogonal_circle(&cols);
    let d2 = (&cx - &cy).norm_squared();
    let orthogonal = (d2 - rx2 - ry2).abs() / (1.0 + d2 + rx2.abs() + ry2.abs());

    // the Möbius meets X and Y against the Euclidean circles
    let space = net.space();
    let mut agreement = 0.0f64;
    for (fam, c, r2) in [(Family::Rows, &cy, ry2), (Family::Cols, &cx, rx2)] {
        let spans = moebius::family_spans(net, pair, fam)?;
        let refs: Vec<&Subspace> = spans.iter().collect();
        let apex: HPoint = projlin::meet_dim(&refs, 0)?.0.as_point().expect("point meet");
        let s = space.classify(apex.coords());
        match (&s.center, s.radius2) {
            (Some(c2), Some(r2b)) => {
                agreement = agreement.max((c2 - c).norm() / (1.0 + c.norm())).max((r2b - r2).abs() / (1.0 + r2.abs()));
            }
            _ => agreement = f64::INFINITY,
        }
    }

    let centres = |cs: &[(DVector<f64>, f64)]| cs.iter().map(|c| c.0.clone()).collect::<Vec<_>>();
    let fv = conic_foci(&fit_conic(&centres(&rows)))?;
    let fh = conic_foci(&fit_conic(&centres(&cols)))?;
    let mut foci = 0.0f64;
    for f in &fv {
        let best = fh.iter().map(|g| (f - g).norm()).fold(f64::INFINITY, f64::min);
        foci = foci.max(best / (1.0 + f.norm()));
    }
    Ok(CircleOracles { row_orthogonal, col_orthogonal, agreement, orthogonal, foci })
}

// ---------------------------------------------------------------------------
// 7: Lie sphere geometry

fn lie_suite(cfg: &SuiteConfig) -> CriterionReport {
    let mut b = Builder::new(7, "Principal contact element nets");
    let redraws = Cell::new(0usize);
    let trials = cfg.trials(20);
    let free = ConstraintPair::new(moebius::LineKind::Free, moebius::LineKind::Free);
    for k in 0..trials {
        let mut rng = trial_rng(cfg.seed, 7, k);
        let res = (|| {
            // contact elements over a random circular net
            let space = MoebiusSpace::new(3)?;
            let (pce, rep) = draw(&redraws, &mut rng, |r| {
                let (net, _) = moebius::construct(&space, free, 6, 6, r)?;
                lie::random_pce(&net, r)
            })?;
            b.below("contact element isotropy", lie::ISOTROPY_TOL, rep.isotropy);
            b.below("plane propagation path independence", lie::PATH_TOL, rep.path_residual);
            b.below("neighbouring elements share an oriented sphere", 1e-8, rep.contact_residual);
            let generic = lie::spherical_line_check(&pce, 2)?;
            b.holds("generic parameter line: three conditions agree", generic.equivalent && !generic.spherical_lines);

            // spherical parameter lines
            let net = draw(&redraws, &mut rng, |r| lie::alternating_net(7, 4, r))?;
            for j in 0..net.cols() {
                let c = lie::spherical_line_check(&net, j)?;
                b.holds("spherical parameter line: three conditions hold", c.spherical_lines && c.spherical_points && c.tangent_sphere_exists);
                b.below("spherical parameter line: angle spread (rad)", lie::ANGLE_TOL, c.angle_spread.unwrap_or(f64::INFINITY));
            }
            let fam = lie::family_spherical_check(&net, Family::Cols)?;
            b.holds("generic spherical family is alternating", fam.case == lie::FamilyCase::Alternating);
            for a in &fam.alternation {
                b.holds("generator systems alternate", a.alternation);
                b.holds("meet-dimension parity agrees", a.meet_parity_agrees);
            }

            // one family with concurrent planes
            let net = draw(&redraws, &mut rng, |r| lie::one_family_net(7, 6, r))?;
            let fam = lie::family_spherical_check(&net, Family::Cols)?;
            match fam.concurrent {
                Some(cc) => {
                    let tol = qnet::DEGENERACY_TOL;
                    b.below("L_A^3 Goursat spread", tol, cc.goursat_a3.goursat_spread);
                    b.above("L_A^2 Goursat spread", tol, cc.control_a2);
                    b.below("L_B^2 Laplace spread", tol, cc.laplace_b2.laplace_spread);
                    b.above("L_B Laplace spread", tol, cc.control_b1);
                    b.below("composed central projections map parameter lines", lie::MAP_TOL, cc.projection_distance);
                    let worst = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
                    b.below("circle planes concurrent", 1e-7, worst(&cc.circle_planes));
                    b.below("circles share an orthogonal sphere", 1e-7, worst(&cc.circles_orthogonal));
                    b.below("spheres share an orthogonal sphere", 1e-7, worst(&cc.spheres_orthogonal));
                    b.below("lifted net L_B^2 Laplace spread", tol, cc.moebius_laplace);
                    b.below("normal-line planes concurrent", 1e-7, worst(&cc.normal_planes));
                    b.below("concurrency point on the centre line", 1e-7, worst(&cc.centre_line));
                    b.below("points K coplanar", 1e-7, worst(&cc.k_coplanarity));
                }
                None => b.holds("constructed family is concurrent", false),
            }

            // two families
            let net = draw(&redraws, &mut rng, |r| lie::two_family_net(6, 6, r))?;
            let t = lie::two_family_check(&net)?;
            b.below("two families: L_A^2 Laplace spread", qnet::DEGENERACY_TOL, t.laplace_a2.laplace_spread);
            b.below("two families: L_B^2 Laplace spread", qnet::DEGENERACY_TOL, t.laplace_b2.laplace_spread);
            b.below("two families: conjugate planes", lie::CONJUGATE_TOL, t.conjugacy);
            b.below("two families: centre planes orthogonal (rad)", 1e-6, t.centre_plane_angle);
            Ok::<_, GeomError>(())
        })();
        if let Err(e) = res {
            b.error(&format!("trial {k}"), e);
        }
    }
    b.redraws(redraws.get());
    b.finish()
}

// ---------------------------------------------------------------------------
// 8: pencils through the Möbius quadric

fn cyclide_suite(cfg: &SuiteConfig) -> CriterionReport {
    let mut b = Builder::new(8, "Generations of Darboux cyclides");
    let trials = cfg.trials(50);
    let mut k = 0;
    for n in [2, 3] {
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..trials {
            let mut rng = trial_rng(cfg.seed, 8, k);
            k += 1;
            let res = (|| {
                let space = MoebiusSpace::new(n)?;
                let q = sample::random_quadric(n + 1, 1, &mut rng);
                let c = cyclide::analyze_cyclide(&q, &space)?;
                let mut orth = 0.0f64;
                for g in c.generations.iter().filter(|g| g.multiplicity == 1) {
                    for _ in 0..3 {
                        if let Ok((s, _)) = cyclide::sample_generation_sphere(&space, g, &mut rng) {
                            let a = g.apex.coords();
                            orth = orth.max(space.lorentz(&s, a).abs() / (s.norm() * a.norm()));
                        }
                    }
                }
                Ok::<_, GeomError>((c, orth))
            })();
            match res {
                Ok((c, orth)) => {
                    *counts.entry(c.real_count).or_insert(0usize) += 1;
                    b.below(&format!("apex conjugacy n={n}"), 1e-8, c.conjugacy);
                    b.below(&format!("generation spheres orthogonal to the apex n={n}"), 1e-7, orth);
                    b.below(&format!("centre quadrics confocal n={n}"), 1e-6, c.confocality);
                    b.below(&format!("real generations at most n+2, n={n}"), (n + 2) as f64 + 0.5, c.real_count as f64);
                }
                Err(e) => b.error(&format!("n={n}"), e),
            }
        }
        let hist: Vec<String> = counts.iter().map(|(r, c)| format!("{r}: {c}")).collect();
        b.note(format!("n={n} pencils by real generation count: {}", hist.join(", ")));
    }
    b.finish()
}
