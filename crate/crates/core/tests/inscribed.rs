use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qnets::inscribed::*;
use qnets::projlin::{self, HPoint, Quadric, Signature, Subspace};
use qnets::qnet::{self, Direction, QNet};
use qnets::sample;
use qnets::GeomError;

fn pt(c: &[f64]) -> HPoint {
    HPoint::from_slice(c).unwrap()
}

fn circle() -> Quadric {
    Quadric::diagonal(&[1.0, 1.0, -1.0]).unwrap()
}

/// The circle form normalized to unit Frobenius norm.
fn circle_form() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0])) / 3f64.sqrt()
}

fn cross(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])
}

/// Laplace points of a quad in RP^2 via cross products.
fn oracle_laplace(p: [&DVector<f64>; 4]) -> (DVector<f64>, DVector<f64>) {
    let a = cross(&cross(p[0], p[1]), &cross(p[2], p[3]));
    let b = cross(&cross(p[0], p[2]), &cross(p[1], p[3]));
    (a, b)
}

/// Bilinear form on raw representatives, normalized.
fn phi(f: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    x.dot(&(f * y)) / (x.norm() * y.norm())
}

#[test]
fn unit_circle_square_satisfies_both_sides() {
    let net = QNet::new(
        2,
        2,
        vec![pt(&[1.0, 0.0, 1.0]), pt(&[0.0, -1.0, 1.0]), pt(&[0.0, 1.0, 1.0]), pt(&[-1.0, 0.0, 1.0])],
    )
    .unwrap();
    let rep = check_theorem_1_1(&net, &circle()).unwrap();
    assert!(rep.lhs && rep.rhs);
    let (a, b) = oracle_laplace([
        net.at(0, 0).coords(),
        net.at(1, 0).coords(),
        net.at(0, 1).coords(),
        net.at(1, 1).coords(),
    ]);
    assert!(phi(&circle_form(), &a, &b).abs() < 1e-15);
}

#[test]
fn unit_circle_square_perturbed_fails_both_sides() {
    let p11 = [-1.1, 0.05, 1.0];
    let net = QNet::new(2, 2, vec![pt(&[1.0, 0.0, 1.0]), pt(&[0.0, -1.0, 1.0]), pt(&[0.0, 1.0, 1.0]), pt(&p11)]).unwrap();
    let rep = check_theorem_1_1(&net, &circle()).unwrap();
    assert!(!rep.lhs && !rep.rhs);
    let (a, b) = oracle_laplace([
        net.at(0, 0).coords(),
        net.at(1, 0).coords(),
        net.at(0, 1).coords(),
        net.at(1, 1).coords(),
    ]);
    let expect = phi(&circle_form(), &a, &b).abs();
    assert!((rep.conjugacy_residual - expect).abs() < 1e-12);
    // frozen value of the oracle for this configuration
    assert!((expect - 0.026_490_129_983_367_06).abs() < 1e-12, "{expect}");
}

#[test]
fn planar_conjugacy_is_proportional_to_incidence() {
    // with three vertices on a conic, phi(A, B) on the cross-product
    // representatives is a fixed multiple of phi(P, P) for the fourth vertex
    let mut rng = sample::rng(97);
    let q = sample::random_quadric(2, 2, &mut rng);
    let f = q.form().clone();
    let ins = random_inscribed_net(2, 2, &q, &mut rng).unwrap();
    let p = [ins.net.at(0, 0).coords(), ins.net.at(1, 0).coords(), ins.net.at(0, 1).coords()];
    let mut ratio = None;
    for _ in 0..20 {
        let p11 = sample::gaussian_vector(3, &mut rng);
        let (a, b) = oracle_laplace([p[0], p[1], p[2], &p11]);
        let r = a.dot(&(&f * &b)) / p11.dot(&(&f * &p11));
        let r0 = *ratio.get_or_insert(r);
        assert!((r - r0).abs() < 1e-9 * r0.abs());
    }
}

#[test]
fn off_quadric_vertex_other_than_the_last_is_rejected() {
    let net = QNet::new(2, 2, vec![pt(&[1.1, 0.0, 1.0]), pt(&[0.0, -1.0, 1.0]), pt(&[0.0, 1.0, 1.0]), pt(&[-1.0, 0.0, 1.0])])
        .unwrap();
    assert!(matches!(check_theorem_1_1(&net, &circle()), Err(GeomError::Hypothesis(_))));
}

#[test]
fn corner_on_quadric_iff_conjugate_on_random_nets() {
    let mut rng = sample::rng(101);
    for m in 2..5 {
        for n in m..m + 3 {
            for _ in 0..5 {
                let q = sample::random_indefinite_quadric(n, &mut rng);
                let ins = random_inscribed_net(m, m, &q, &mut rng).unwrap();
                let rep = check_theorem_1_1(&ins.net, &q).unwrap();
                assert!(rep.lhs && rep.rhs, "m={m} n={n} {rep:?}");
                let off = perturb_last_vertex(&ins.net, &q, 1e-2, &mut rng).unwrap();
                assert!((off.at(m - 1, m - 1).distance(ins.net.at(m - 1, m - 1)) - 1e-2).abs() < 1e-12);
                let rep = check_theorem_1_1(&off, &q).unwrap();
                assert!(!rep.lhs && !rep.rhs, "m={m} n={n} {rep:?}");
            }
        }
    }
}

#[test]
fn inscribed_net_json_roundtrip() {
    let mut rng = sample::rng(103);
    let q = sample::random_indefinite_quadric(3, &mut rng);
    let ins = random_inscribed_net(3, 3, &q, &mut rng).unwrap();
    let s = serde_json::to_string(&ins.to_json()).unwrap();
    let back = InscribedNet::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
    assert!((back.quadric.form() - ins.quadric.form()).norm() < 1e-15);
    assert_eq!(back.net.rows(), 3);
}

#[test]
fn corollary_xy_for_2x2_is_the_laplace_pair() {
    let mut rng = sample::rng(107);
    let net = qnet::random_qnet(2, 2, 3, &mut rng).unwrap();
    let rep = corollary_xy(&net).unwrap();
    let (a, b) = qnet::laplace_points(net.quad(0, 0)).unwrap();
    assert!(rep.x.distance(&a) < 1e-12);
    assert!(rep.y.distance(&b) < 1e-12);
}

#[test]
fn corollary_xy_conjugacy_on_inscribed_3x3() {
    let mut rng = sample::rng(109);
    let seed = ConstrainedSeed::random(2, 4, 1, &mut rng).unwrap();
    let (ext, _) = extend_constrained(&seed).unwrap();
    assert_eq!(ext.net.rows(), 4);
    let w = ext.net.window(1, 1, 3, 3).unwrap();
    let rep = corollary_xy(&w).unwrap();
    assert!(rep.x_vs_laplace < 1e-8 && rep.y_vs_laplace < 1e-8);
    assert!(projlin::conjugate(&rep.x, &rep.y, &ext.quadric).unwrap().residual < 1e-8);
    let th = check_theorem_1_1(&w, &ext.quadric).unwrap();
    assert!(th.lhs && th.rhs);
}

#[test]
fn corollary_xy_on_random_net_is_not_conjugate() {
    let mut rng = sample::rng(113);
    let net = qnet::random_qnet(3, 3, 4, &mut rng).unwrap();
    let q = sample::random_indefinite_quadric(4, &mut rng);
    let rep = corollary_xy(&net).unwrap();
    assert!(rep.x_vs_laplace < 1e-8 && rep.y_vs_laplace < 1e-8);
    assert!(projlin::conjugate(&rep.x, &rep.y, &q).unwrap().residual > 1e-4);
}

/// Quads with vertices `u, v, w, u+v+w` and `x, y, z, x+y+z`, whose
/// Laplace points are `v+w, u+v` and `y+z, x+y`.
struct TwoQuads {
    u: DVector<f64>,
    v: DVector<f64>,
    w: DVector<f64>,
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
}

impl TwoQuads {
    /// Raw bilinear values of the six conditions.
    fn conditions(&self, f: &DMatrix<f64>) -> [f64; 6] {
        let b = |a: &DVector<f64>, c: &DVector<f64>| a.dot(&(f * c));
        [
            b(&self.u, &self.x),
            b(&self.v, &self.y),
            b(&self.w, &self.z),
            b(&(&self.u + &self.v), &(&self.y + &self.z)),
            b(&(&self.v + &self.w), &(&self.x + &self.y)),
            b(&(&self.u + &self.v + &self.w), &(&self.x + &self.y + &self.z)),
        ]
    }
}

/// Linear functionals on (x, y, z) for each condition.
fn condition_rows(u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>, f: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let d = u.len();
    let row = |cx: DVector<f64>, cy: DVector<f64>, cz: DVector<f64>| {
        let mut r = DVector::zeros(3 * d);
        r.rows_mut(0, d).copy_from(&(f * cx));
        r.rows_mut(d, d).copy_from(&(f * cy));
        r.rows_mut(2 * d, d).copy_from(&(f * cz));
        r
    };
    let z = DVector::zeros(d);
    vec![
        row(u.clone(), z.clone(), z.clone()),
        row(z.clone(), v.clone(), z.clone()),
        row(z.clone(), z.clone(), w.clone()),
        row(z.clone(), u + v, u + v),
        row(v + w, v + w, z.clone()),
        row(u + v + w, u + v + w, u + v + w),
    ]
}

/// Two quads whose configuration satisfies all conditions except possibly
/// `skip`, built by solving the five imposed linear conditions.
fn two_quads(n: usize, skip: usize, f: &DMatrix<f64>, rng: &mut sample::Rng) -> TwoQuads {
    let d = n + 1;
    let u = sample::gaussian_vector(d, rng);
    let v = sample::gaussian_vector(d, rng);
    let w = sample::gaussian_vector(d, rng);
    let rows = condition_rows(&u, &v, &w, f);
    let imposed: Vec<&DVector<f64>> = rows.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, r)| r).collect();
    let a = DMatrix::from_fn(5, 3 * d, |r, c| imposed[r][c]);
    let null = projlin::null_basis(&a, 1e-12);
    let sol = &null * sample::gaussian_vector(null.ncols(), rng);
    TwoQuads {
        u,
        v,
        w,
        x: sol.rows(0, d).into_owned(),
        y: sol.rows(d, d).into_owned(),
        z: sol.rows(2 * d, d).into_owned(),
    }
}

#[test]
fn five_conjugacies_imply_the_sixth() {
    let mut rng = sample::rng(127);
    for n in 2..6 {
        for skip in 0..6 {
            let q = sample::random_indefinite_quadric(n, &mut rng);
            let tq = two_quads(n, skip, q.form(), &mut rng);
            // geometric evaluation: Laplace points via the library
            let o = [&tq.v, &tq.w, &tq.u, &(&tq.u + &tq.v + &tq.w)].map(|c| HPoint::new(c.clone()).unwrap());
            let p = [&tq.y, &tq.z, &tq.x, &(&tq.x + &tq.y + &tq.z)].map(|c| HPoint::new(c.clone()).unwrap());
            let (la_o, lb_o) = qnet::laplace_points([&o[0], &o[1], &o[2], &o[3]]).unwrap();
            let (la_p, lb_p) = qnet::laplace_points([&p[0], &p[1], &p[2], &p[3]]).unwrap();
            assert!(la_o.distance(&HPoint::new(&tq.v + &tq.w).unwrap()) < 1e-9);
            assert!(lb_o.distance(&HPoint::new(&tq.u + &tq.v).unwrap()) < 1e-9);
            let pairs = [
                (o[2].clone(), p[2].clone()),
                (o[0].clone(), p[0].clone()),
                (o[1].clone(), p[1].clone()),
                (lb_o.clone(), la_p.clone()),
                (la_o.clone(), lb_p.clone()),
                (o[3].clone(), p[3].clone()),
            ];
            let res: Vec<f64> = pairs.iter().map(|(a, b)| projlin::conjugate(a, b, &q).unwrap().residual).collect();
            assert!(res[skip] < 1e-8, "n={n} skip={skip} {res:?}");
            // the raw identity behind it
            let c = tq.conditions(q.form());
            let identity = c[0] - c[1] + c[2] + c[3] + c[4] - c[5];
            assert!(identity.abs() < 1e-10);
        }
    }
}

#[test]
fn four_conjugacies_do_not_imply_the_others() {
    let mut rng = sample::rng(131);
    let q = sample::random_indefinite_quadric(4, &mut rng);
    let d = 5;
    let u = sample::gaussian_vector(d, &mut rng);
    let v = sample::gaussian_vector(d, &mut rng);
    let w = sample::gaussian_vector(d, &mut rng);
    let rows = condition_rows(&u, &v, &w, q.form());
    let a = DMatrix::from_fn(4, 3 * d, |r, c| rows[r][c]);
    let null = projlin::null_basis(&a, 1e-12);
    let sol = &null * sample::gaussian_vector(null.ncols(), &mut rng);
    let tq = TwoQuads {
        u,
        v,
        w,
        x: sol.rows(0, d).into_owned(),
        y: sol.rows(d, d).into_owned(),
        z: sol.rows(2 * d, d).into_owned(),
    };
    let c = tq.conditions(q.form());
    assert!(c[4].abs() > 1e-6 && c[5].abs() > 1e-6);
}

#[test]
fn extension_keeps_everything_exact() {
    let mut rng = sample::rng(137);
    for (d, n) in [(1, 5), (2, 4), (3, 6)] {
        let seed = ConstrainedSeed::random(d, n, 5, &mut rng).unwrap();
        let (net, reports) = extend_all(&seed).unwrap();
        assert_eq!(net.net.rows(), d + 6);
        assert!(net.incidence_residual < 1e-8, "d={d} {}", net.incidence_residual);
        for r in &reports {
            assert!(r.new_incidence < 1e-8, "d={d} {r:?}");
            assert!(r.x_drift < 1e-7 && r.y_drift < 1e-7, "d={d} {r:?}");
            assert!(r.dims_exact(), "d={d} {r:?}");
        }
        let (x0, y0) = net_xy(&seed.patch.net, d).unwrap();
        let (x1, y1) = net_xy(&net.net, d).unwrap();
        assert!(x0.distance(&x1) < 1e-7 && y0.distance(&y1) < 1e-7);
    }
}

#[test]
fn seed_boundary_points_lie_in_the_first_lines() {
    let mut rng = sample::rng(139);
    let seed = ConstrainedSeed::random(2, 4, 3, &mut rng).unwrap();
    let h0 = seed.patch.net.h_span(0).unwrap();
    let v0 = seed.patch.net.v_span(0).unwrap();
    for p in &seed.boundary_row {
        assert!(h0.residual(p) < 1e-10 && seed.patch.quadric.incidence(p) < 1e-10);
    }
    for p in &seed.boundary_col {
        assert!(v0.residual(p) < 1e-10 && seed.patch.quadric.incidence(p) < 1e-10);
    }
}

#[test]
fn extension_of_a_collinear_seed_fails() {
    let mut rng = sample::rng(149);
    let mut seed = ConstrainedSeed::random(2, 4, 1, &mut rng).unwrap();
    let p = seed.patch.net.at(0, 0).clone();
    seed.patch.net.set(1, 0, p);
    assert!(extend_constrained(&seed).is_err());
}

#[test]
fn goursat_implies_laplace_on_extended_nets() {
    let mut rng = sample::rng(151);
    let seed = ConstrainedSeed::random(2, 4, 2, &mut rng).unwrap();
    let (net, _) = extend_all(&seed).unwrap();
    let rep = check_goursat_implies_laplace(&net, 2).unwrap();
    assert!(rep.holds(), "{rep:?}");
}

#[test]
fn goursat_implies_laplace_at_exactly_step_m() {
    let mut rng = sample::rng(157);
    for m in 2..4 {
        for n in m + 1..m + 3 {
            let q = sample::random_indefinite_quadric(n, &mut rng);
            let net = inscribed_goursat_net(m + 3, m + 3, m, &q, &mut rng).unwrap();
            let rep = check_goursat_implies_laplace(&net, m).unwrap();
            assert!(rep.holds(), "m={m} n={n} {:e}", rep.conclusion.laplace_spread);
            assert!(rep.previous_spread.unwrap() > 1e-4);
            let ctrl = random_inscribed_net(m + 3, m + 3, &q, &mut rng).unwrap();
            let c = qnet::classify_degeneracy(&ctrl.net, Direction::B, m).unwrap();
            assert!(!c.goursat && !c.laplace);
        }
    }
}

#[test]
fn goursat_hypothesis_is_checked() {
    let mut rng = sample::rng(163);
    let q = sample::random_indefinite_quadric(3, &mut rng);
    let net = random_inscribed_net(5, 5, &q, &mut rng).unwrap();
    assert!(matches!(check_goursat_implies_laplace(&net, 2), Err(GeomError::Hypothesis(_))));
}

#[test]
fn laplace_implies_goursat_at_exactly_step_m_plus_n_minus_one() {
    let mut rng = sample::rng(167);
    for (m, n) in [(1, 2), (1, 3), (2, 3)] {
        let q = sample::random_quadric(n, if n == 2 { 2 } else { 2 }, &mut rng);
        let size = m + n + 2;
        let net = inscribed_laplace_net(size, size, m, &q, &mut rng).unwrap();
        let rep = check_laplace_implies_goursat(&net, m).unwrap();
        assert!(rep.holds(), "m={m} n={n} {:e}", rep.conclusion.goursat_spread);
        assert!(rep.previous_spread.unwrap() > 1e-4, "m={m} n={n} {rep:?}");
        let ctrl = random_inscribed_net(size, size, &q, &mut rng).unwrap();
        let c = qnet::classify_degeneracy(&ctrl.net, Direction::B, m + n - 1).unwrap();
        assert!(!c.goursat && !c.laplace);
    }
}

#[test]
fn laplace_implies_goursat_needs_a_large_grid() {
    let mut rng = sample::rng(173);
    let q = sample::random_quadric(3, 2, &mut rng);
    let net = inscribed_laplace_net(4, 4, 1, &q, &mut rng).unwrap();
    assert!(matches!(check_laplace_implies_goursat(&net, 1), Err(GeomError::GridTooSmall(_))));
}

#[test]
fn pencil_structure_in_rp4() {
    let mut rng = sample::rng(179);
    let seed = ConstrainedSeed::random(2, 4, 3, &mut rng).unwrap();
    let (net, _) = extend_all(&seed).unwrap();
    let ps = recover_pencil_structure(&net).unwrap();
    assert_eq!(ps.v_signature, Signature { p: 2, q: 2, r: 1 });
    assert_eq!(ps.h_signature, Signature { p: 2, q: 2, r: 1 });
    assert!(ps.pencil_residual < 1e-8, "{}", ps.pencil_residual);
    assert!(ps.alternation);
    for &(i, k, dim, _) in &ps.v_systems {
        match k - i {
            1 => assert_eq!(dim, 1),
            2 => assert_eq!(dim, 0),
            _ => {}
        }
    }
    // pencil membership as a min over the unit circle of (λ, μ)
    let qf = net.quadric.form();
    let best = (0..20000)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / 20000.0;
            let m = ps.v.form() * t.cos() + ps.h.form() * t.sin();
            let m = &m / m.norm();
            (qf - &m).norm().min((qf + &m).norm())
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-3, "{best}");
}

#[test]
fn pencil_structure_needs_even_ambient() {
    let mut rng = sample::rng(181);
    let q = sample::random_indefinite_quadric(3, &mut rng);
    let net = random_inscribed_net(4, 4, &q, &mut rng).unwrap();
    assert!(matches!(recover_pencil_structure(&net), Err(GeomError::Hypothesis(_))));
}

#[test]
fn same_system_parity_rule() {
    assert!(same_system(0, 2));
    assert!(!same_system(1, 2));
    assert!(same_system(1, 1));
    assert!(!same_system(0, 1));
}

fn common_line(n: usize, rng: &mut sample::Rng) -> Subspace {
    sample::random_subspace(n, 1, rng).unwrap()
}

#[test]
fn small_net_with_rows_through_a_line() {
    let mut rng = sample::rng(191);
    for n in [3, 4] {
        let l = common_line(n, &mut rng);
        let net = qnet::goursat_net(3, 3, n, 2, Some(&l), &mut rng).unwrap();
        let rep = check_small_degeneracy_props(&net).unwrap();
        assert!(rep.hypothesis_met && rep.meet_dim == 1 && rep.step == 1);
        assert!(rep.laplace, "{rep:?}");
    }
}

#[test]
fn four_by_four_with_rows_through_a_line_or_plane() {
    let mut rng = sample::rng(193);
    for n in [4, 6] {
        let l = common_line(n, &mut rng);
        let net = qnet::goursat_net(4, 4, n, 3, Some(&l), &mut rng).unwrap();
        let rep = check_small_degeneracy_props(&net).unwrap();
        assert!(rep.hypothesis_met && rep.meet_dim == 1 && rep.step == 2, "{rep:?}");
        assert!(rep.laplace, "{rep:?}");
        let pl = sample::random_subspace(n, 2, &mut rng).unwrap();
        let net = qnet::goursat_net(4, 4, n, 3, Some(&pl), &mut rng).unwrap();
        let rep = check_small_degeneracy_props(&net).unwrap();
        assert!(rep.hypothesis_met && rep.meet_dim == 2 && rep.step == 1, "{rep:?}");
        assert!(rep.laplace, "{rep:?}");
    }
}

#[test]
fn generic_3x3_is_not_degenerate() {
    let mut rng = sample::rng(197);
    let net = qnet::random_qnet(3, 3, 3, &mut rng).unwrap();
    let rep = check_small_degeneracy_props(&net).unwrap();
    assert!(!rep.hypothesis_met && !rep.laplace);
    assert!(check_small_degeneracy_props(&qnet::random_qnet(3, 4, 3, &mut rng).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn corner_on_quadric_iff_conjugate(seed in any::<u64>(), m in 2usize..5, dn in 0usize..3) {
        let mut rng = sample::rng(seed);
        let n = m + dn;
        let q = sample::random_indefinite_quadric(n, &mut rng);
        let ins = random_inscribed_net(m, m, &q, &mut rng).unwrap();
        let rep = check_theorem_1_1(&ins.net, &q).unwrap();
        prop_assert!(rep.lhs && rep.rhs);
        let off = perturb_last_vertex(&ins.net, &q, 1e-2, &mut rng).unwrap();
        let rep = check_theorem_1_1(&off, &q).unwrap();
        prop_assert!(!rep.lhs && !rep.rhs);
    }

    #[test]
    fn lemma_five_imply_sixth(seed in any::<u64>(), n in 2usize..6, skip in 0usize..6) {
        let mut rng = sample::rng(seed);
        let q = sample::random_indefinite_quadric(n, &mut rng);
        let tq = two_quads(n, skip, q.form(), &mut rng);
        let c = tq.conditions(q.form());
        let scale = [(&tq.u, &tq.x), (&tq.v, &tq.y), (&tq.w, &tq.z)]
            .iter()
            .map(|(a, b)| a.norm() * b.norm())
            .fold(0.0, f64::max);
        prop_assert!(c[skip].abs() / scale < 1e-8);
    }

    #[test]
    fn extension_closure(seed in any::<u64>(), d in 1usize..4) {
        let mut rng = sample::rng(seed);
        let n = [5, 4, 6][d - 1];
        let seed = ConstrainedSeed::random(d, n, 3, &mut rng).unwrap();
        let (net, reports) = extend_all(&seed).unwrap();
        prop_assert!(net.incidence_residual < 1e-8);
        for r in &reports {
            prop_assert!(r.x_drift < 1e-7 && r.y_drift < 1e-7 && r.dims_exact());
        }
    }
}
