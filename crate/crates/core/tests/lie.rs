use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qnets::inscribed::check_theorem_1_1;
use qnets::lie::*;
use qnets::moebius::{self, CircularNet, ConstraintPair, Family, LineKind, MoebiusSpace};
use qnets::projlin::{self, Quadric, Subspace};
use qnets::qnet::LineCongruence;
use qnets::sample;
use qnets::GeomError;

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn space3() -> LieSpace {
    LieSpace::new(3).unwrap()
}

/// `e_0`, `e_inf`, `e_6` in R^{4,2} from the Möbius conventions:
/// e_0 = (e_5 - e_4) / 2, e_inf = (e_5 + e_4) / 2.
fn basis() -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    (dv(&[0.0, 0.0, 0.0, -0.5, 0.5, 0.0]), dv(&[0.0, 0.0, 0.0, 0.5, 0.5, 0.0]), dv(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]))
}

fn free_net(n: usize, rows: usize, cols: usize, seed: u64) -> CircularNet {
    let ms = MoebiusSpace::new(n).unwrap();
    let mut rng = sample::rng(seed);
    moebius::construct(&ms, ConstraintPair::new(LineKind::Free, LineKind::Free), rows, cols, &mut rng).unwrap().0
}

#[test]
fn form_has_signature_four_two() {
    let s = projlin::signature(&space3().quadric());
    assert_eq!((s.p, s.q, s.r), (4, 2, 0));
}

#[test]
fn basis_products() {
    let s = space3();
    let (e0, einf, e6) = basis();
    assert_eq!(s.e0(), e0);
    assert_eq!(s.e_inf(), einf);
    assert_eq!(s.e_point(), e6);
    assert_eq!(s.inner(&e0, &einf), -0.5);
    assert_eq!(s.inner(&e0, &e0), 0.0);
    assert_eq!(s.inner(&einf, &einf), 0.0);
    assert_eq!(s.inner(&e6, &e6), -1.0);
}

#[test]
fn lift_examples() {
    let s = space3();
    let (e0, einf, e6) = basis();
    let p = s.lift(&LieObject::Point(dv(&[0.0, 0.0, 0.0]))).unwrap();
    assert_eq!(p.kind, LieKind::Point);
    assert!((&p.vector - &e0).norm() < 1e-15);

    let sp = s.lift(&LieObject::Sphere { center: dv(&[0.0, 0.0, 0.0]), radius: 1.0 }).unwrap();
    assert_eq!(sp.kind, LieKind::Sphere);
    assert!((&sp.vector - (&e0 - &einf + &e6)).norm() < 1e-15);

    let v = dv(&[0.6, 0.0, 0.8]);
    let pl = s.lift(&LieObject::Plane(OrientedPlane::new(&v, 0.0).unwrap())).unwrap();
    assert_eq!(pl.kind, LieKind::Plane);
    let expected = DVector::from_iterator(6, v.iter().copied().chain([0.0, 0.0, 1.0]));
    assert!((&pl.vector - expected).norm() < 1e-15);

    let inf = s.lift(&LieObject::Infinity).unwrap();
    assert_eq!(inf.kind, LieKind::Infinity);
}

#[test]
fn unit_sphere_touches_tangent_plane_of_matching_orientation() {
    let s = space3();
    let e1 = dv(&[1.0, 0.0, 0.0]);
    let sphere = s.lift(&LieObject::Sphere { center: dv(&[0.0, 0.0, 0.0]), radius: 1.0 }).unwrap();
    let flipped = s.lift(&LieObject::Sphere { center: dv(&[0.0, 0.0, 0.0]), radius: -1.0 }).unwrap();
    // the plane x_1 = 1 with normal e_1 faces away from the centre
    let plane_out = s.lift(&LieObject::Plane(OrientedPlane::new(&e1, 1.0).unwrap())).unwrap();
    let plane_in = s.lift(&LieObject::Plane(OrientedPlane::new(&(-&e1), -1.0).unwrap())).unwrap();
    assert!(s.oriented_contact(&sphere, &plane_in).contact);
    assert!(s.oriented_contact(&flipped, &plane_out).contact);
    // <e_1 + 2 e_inf + e_6, e_0 - e_inf + e_6> = -1 - 1 = -2
    assert_eq!(s.inner(&plane_out.vector, &sphere.vector), -2.0);
    assert!(!s.oriented_contact(&sphere, &plane_out).contact);
}

#[test]
fn concentric_spheres_have_no_contact() {
    let s = space3();
    let o = dv(&[0.0, 0.0, 0.0]);
    let a = s.lift(&LieObject::Sphere { center: o.clone(), radius: 1.0 }).unwrap();
    let b = s.lift(&LieObject::Sphere { center: o, radius: 2.0 }).unwrap();
    let t = s.oriented_contact(&a, &b);
    assert!(!t.contact);
    assert!(t.residual > 0.05);
}

#[test]
fn point_on_sphere_has_contact() {
    let s = space3();
    let c = dv(&[1.0, -2.0, 0.5]);
    let sph = s.lift(&LieObject::Sphere { center: c.clone(), radius: 3.0 }).unwrap();
    let on = s.lift(&LieObject::Point(&c + dv(&[0.0, 3.0, 0.0]))).unwrap();
    let off = s.lift(&LieObject::Point(&c + dv(&[0.0, 3.1, 0.0]))).unwrap();
    assert!(s.oriented_contact(&sph, &on).contact);
    assert!(!s.oriented_contact(&sph, &off).contact);
}

#[test]
fn classify_rejects_points_off_the_quadric() {
    let s = space3();
    assert!(matches!(s.classify(&dv(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])), Err(GeomError::Invalid(_))));
    assert!(matches!(s.classify(&dv(&[1.0, 0.0, 0.0])), Err(GeomError::DimensionMismatch { .. })));
}

#[test]
fn lifts_work_in_the_plane() {
    let s = LieSpace::new(2).unwrap();
    let circle = s.lift(&LieObject::Sphere { center: dv(&[1.0, 2.0]), radius: -0.5 }).unwrap();
    assert_eq!(circle.vector.len(), 5);
    assert_eq!(circle.radius, Some(-0.5));
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3)
}

proptest! {
    #[test]
    fn sphere_lift_round_trip(c in coords(), r in -3.0f64..3.0) {
        prop_assume!(r.abs() > 1e-3);
        let s = space3();
        let rep = s.lift(&LieObject::Sphere { center: dv(&c), radius: r }).unwrap();
        prop_assert!(s.inner(&rep.vector, &rep.vector).abs() < 1e-12 * rep.vector.norm_squared());
        prop_assert_eq!(rep.kind, LieKind::Sphere);
        prop_assert!((rep.center.unwrap() - dv(&c)).norm() < 1e-12);
        prop_assert!((rep.radius.unwrap() - r).abs() < 1e-12);
    }

    #[test]
    fn plane_lift_round_trip(v in coords(), d in -3.0f64..3.0) {
        let v = dv(&v);
        prop_assume!(v.norm() > 1e-2);
        let s = space3();
        let e = OrientedPlane::new(&v, d).unwrap();
        let rep = s.lift(&LieObject::Plane(e.clone())).unwrap();
        prop_assert!(s.inner(&rep.vector, &rep.vector).abs() < 1e-12 * rep.vector.norm_squared());
        prop_assert_eq!(rep.kind, LieKind::Plane);
        prop_assert!((rep.normal.unwrap() - e.normal()).norm() < 1e-12);
        prop_assert!((rep.offset.unwrap() - e.d).abs() < 1e-12);
    }

    #[test]
    fn sphere_product_is_tangential_distance(c1 in coords(), c2 in coords(), r1 in -3.0f64..3.0, r2 in -3.0f64..3.0) {
        let s = space3();
        let (c1, c2) = (dv(&c1), dv(&c2));
        let got = s.inner(&s.sphere(&c1, r1), &s.sphere(&c2, r2));
        let expected = -0.5 * ((&c1 - &c2).norm_squared() - (r1 - r2) * (r1 - r2));
        prop_assert!((got - expected).abs() < 1e-10 * (1.0 + expected.abs()));
    }

    #[test]
    fn contact_elements_are_isotropic(p in coords(), v in coords()) {
        let v = dv(&v);
        prop_assume!(v.norm() > 1e-2);
        let s = space3();
        let p = dv(&p);
        let e = OrientedPlane::through(&p, &v).unwrap();
        let ce = ContactElement::new(&s, &p, &e).unwrap();
        prop_assert!(s.isotropy(ce.line()) < ISOTROPY_TOL);
        let back = ContactElement::from_line(&s, ce.line()).unwrap();
        prop_assert!((back.point() - &p).norm() < 1e-9);
        prop_assert!((back.plane().normal() - e.normal()).norm() < 1e-9);
        prop_assert!((back.plane().d - e.d).abs() < 1e-9);
    }
}

#[test]
fn spheres_of_a_contact_element_touch_point_and_plane() {
    let s = space3();
    let p = dv(&[0.3, -1.0, 2.0]);
    let e = OrientedPlane::through(&p, &dv(&[1.0, 1.0, 0.5])).unwrap();
    let ce = ContactElement::new(&s, &p, &e).unwrap();
    for r in [-2.0, 0.5, 4.0] {
        let x = ce.sphere(&s, r);
        assert!(ce.line().residual_vec(&x) < 1e-12);
        // Euclidean oracle: distance from the centre to P and to the plane
        let c = &p + e.normal() * r;
        assert!(((&c - &p).norm() - r.abs()).abs() < 1e-12);
        assert!((e.normal().dot(&c) - e.d - r).abs() < 1e-12);
    }
}

#[test]
fn contact_element_needs_the_point_on_the_plane() {
    let s = space3();
    let e = OrientedPlane::new(&dv(&[0.0, 0.0, 1.0]), 1.0).unwrap();
    let r = ContactElement::new(&s, &dv(&[0.0, 0.0, 0.0]), &e);
    assert!(matches!(r, Err(GeomError::Hypothesis(_))));
}

fn square_net() -> CircularNet {
    let pts = [[0.0, 0.0, 0.0], [0.0, 2.0, 0.0], [2.0, 0.0, 0.0], [2.0, 2.0, 0.0]];
    CircularNet::new(3, 2, 2, pts.iter().map(|p| dv(p)).collect()).unwrap()
}

#[test]
fn reflection_in_the_bisector() {
    let net = square_net();
    let seed = OrientedPlane::new(&dv(&[1.0, 0.0, 0.0]), 0.0).unwrap();
    let (pce, report) = extend_to_pce(&net, &seed).unwrap();
    // P(1,0) = (2,0,0): the plane x = 0 reflected in x = 1 is x = 2, with
    // reversed orientation
    let e = pce.at(1, 0).plane();
    assert!((e.normal() - dv(&[-1.0, 0.0, 0.0])).norm() < 1e-14);
    assert!((e.d + 2.0).abs() < 1e-14);
    assert!(report.path_residual < PATH_TOL);
}

#[test]
fn planar_net_with_its_own_plane_as_seed() {
    let net = free_net(2, 5, 5, 3);
    let pts: Vec<DVector<f64>> = net.points().iter().map(|p| dv(&[p[0], p[1], 0.0])).collect();
    let net3 = CircularNet::new(3, 5, 5, pts).unwrap();
    let seed = OrientedPlane::new(&dv(&[0.0, 0.0, 1.0]), 0.0).unwrap();
    let (pce, _) = extend_to_pce(&net3, &seed).unwrap();
    for e in pce.elements() {
        assert!((e.plane().normal() - seed.normal()).norm() < 1e-12);
        assert!(e.plane().d.abs() < 1e-12);
    }
}

#[test]
fn two_seeds_give_two_nets() {
    let net = free_net(3, 3, 3, 4);
    let p = net.point(0, 0).clone();
    let a = extend_to_pce(&net, &OrientedPlane::through(&p, &dv(&[1.0, 0.0, 0.0])).unwrap()).unwrap().0;
    let b = extend_to_pce(&net, &OrientedPlane::through(&p, &dv(&[0.0, 1.0, 0.3])).unwrap()).unwrap().0;
    assert!((a.at(2, 2).plane().normal() - b.at(2, 2).plane().normal()).norm() > 1e-3);
}

#[test]
fn seed_must_contain_the_first_vertex() {
    let net = square_net();
    let seed = OrientedPlane::new(&dv(&[1.0, 0.0, 0.0]), 0.5).unwrap();
    assert!(matches!(extend_to_pce(&net, &seed), Err(GeomError::Hypothesis(_))));
}

#[test]
fn non_circular_net_fails_path_independence() {
    let pts = [[0.0, 0.0, 0.0], [0.0, 2.0, 0.0], [2.0, 0.0, 0.0], [2.5, 1.7, 0.0]];
    let points: Vec<DVector<f64>> = pts.iter().map(|p| dv(p)).collect();
    let net = CircularNet::new(3, 2, 2, points);
    // either the constructor or the propagation refuses the non-circular quad
    if let Ok(net) = net {
        let seed = OrientedPlane::new(&dv(&[0.0, 0.6, 0.8]), 0.0).unwrap();
        assert!(matches!(extend_to_pce(&net, &seed), Err(GeomError::Hypothesis(_))));
    }
}

#[test]
fn pce_over_a_random_circular_net() {
    let mut rng = sample::rng(11);
    for seed in 0..10 {
        let net = free_net(3, 5, 5, 100 + seed);
        let (pce, report) = random_pce(&net, &mut rng).unwrap();
        assert!(report.path_residual < PATH_TOL);
        assert!(report.isotropy < ISOTROPY_TOL);
        assert!(report.contact_residual < 1e-8);
        // l ∩ [e_6]^⊥ reproduces the lift of the circular net
        let s = pce.space();
        for i in 0..5 {
            for j in 0..5 {
                let b = pce.at(i, j).line().basis();
                let (b1, b2) = (b.column(0).into_owned(), b.column(1).into_owned());
                let x = &b1 * b2[5] - &b2 * b1[5];
                let lifted = s.embed(net.lift().at(i, j).coords());
                assert!(projlin::chordal(&x, &lifted) < 1e-10);
            }
        }
    }
}

#[test]
fn pce_json_round_trip() {
    let mut rng = sample::rng(12);
    let net = free_net(3, 4, 3, 5);
    let (pce, _) = random_pce(&net, &mut rng).unwrap();
    let text = serde_json::to_string(&pce.to_json().unwrap()).unwrap();
    assert!(text.contains("\"planes\""));
    let back = PceNet::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), pce.to_json().unwrap());
}

/// Independent sphere fit: least squares for `2 <c, x> + k = |x|^2`.
fn fit_sphere(points: &[DVector<f64>]) -> (DVector<f64>, f64) {
    let a = DMatrix::from_fn(points.len(), 4, |r, c| if c < 3 { 2.0 * points[r][c] } else { 1.0 });
    let b = DVector::from_fn(points.len(), |r, _| points[r].norm_squared());
    let x = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap();
    let c = dv(&[x[0], x[1], x[2]]);
    let r2 = x[3] + c.norm_squared();
    (c, r2.sqrt())
}

#[test]
fn spherical_column_satisfies_all_three_conditions() {
    let mut rng = sample::rng(13);
    for _ in 0..5 {
        let net = alternating_net(6, 4, &mut rng).unwrap();
        for j in 0..4 {
            let c = spherical_line_check(&net, j).unwrap();
            assert_eq!(c.line_span_dim, 4);
            assert_eq!(c.point_span_dim, 3);
            assert_eq!(c.plane_span_dim, 3);
            assert!(c.spherical_lines && c.spherical_points && c.tangent_sphere_exists && c.equivalent);
            assert!(c.angle_spread.unwrap() < ANGLE_TOL);
            assert!(c.concentricity.unwrap() < 1e-7);
            let pts: Vec<DVector<f64>> = (0..6).map(|i| net.at(i, j).point().clone()).collect();
            let (centre, r) = fit_sphere(&pts);
            for (i, p) in pts.iter().enumerate() {
                let cos = net.at(i, j).plane().normal().dot(&(p - &centre)) / r;
                assert!((cos.clamp(-1.0, 1.0).acos() - c.angles[i]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn generic_row_is_not_spherical() {
    let mut rng = sample::rng(14);
    let net = free_net(3, 6, 6, 7);
    let (pce, _) = random_pce(&net, &mut rng).unwrap();
    let c = spherical_line_check(&pce, 2).unwrap();
    assert_eq!(c.line_span_dim, 5);
    assert!(!c.spherical_lines && !c.spherical_points && !c.tangent_sphere_exists);
    assert!(c.equivalent);
    assert!(c.tangent_sphere.is_none());
}

#[test]
fn planar_row_touches_the_point_at_infinity() {
    let mut rng = sample::rng(15);
    let net = free_net(2, 6, 4, 8);
    let pts: Vec<DVector<f64>> = net.points().iter().map(|p| dv(&[p[0], p[1], 0.0])).collect();
    let net3 = CircularNet::new(3, 6, 4, pts).unwrap();
    let (pce, _) = random_pce(&net3, &mut rng).unwrap();
    let c = spherical_line_check(&pce, 1).unwrap();
    assert!(c.equivalent && c.spherical_points);
    assert_eq!(c.sphere.unwrap().kind, moebius::SphereKind::Plane);
    let t = c.tangent_sphere.unwrap();
    // e_0-component zero
    assert!((t.vector[4] - t.vector[3]).abs() < 1e-12);
    assert!(c.angle_spread.unwrap() < ANGLE_TOL);
}

#[test]
fn spherical_checks_need_three_dimensions() {
    let net = free_net(2, 3, 3, 9);
    let mut rng = sample::rng(16);
    let (pce, _) = random_pce(&net, &mut rng).unwrap();
    assert!(matches!(spherical_line_check(&pce, 0), Err(GeomError::DimensionMismatch { expected: 3, found: 2 })));
}

#[test]
fn generic_spherical_family_alternates() {
    let mut rng = sample::rng(17);
    for _ in 0..5 {
        let net = alternating_net(7, 4, &mut rng).unwrap();
        let c = family_spherical_check(&net, Family::Cols).unwrap();
        assert_eq!(c.case, FamilyCase::Alternating);
        assert!(c.concurrent.is_none());
        for a in &c.alternation {
            assert!(a.alternation);
            assert!(a.fit_residual < 1e-10);
            assert!(a.pencil_residual < 1e-8);
            assert_eq!((a.signature.p, a.signature.q), (3, 3));
            assert!(a.meet_parity_agrees);
            for p in a.pairs.iter().filter(|p| p.well_conditioned) {
                assert_eq!(p.same_system, (p.k - p.i) % 2 == 0);
                assert_eq!(p.same_system, a.systems[p.i] == a.systems[p.k]);
            }
        }
    }
}

#[test]
fn concurrent_family_consequences() {
    let mut rng = sample::rng(18);
    for _ in 0..5 {
        let net = one_family_net(7, 6, &mut rng).unwrap();
        assert!(net.isotropy() < ISOTROPY_TOL);
        let c = family_spherical_check(&net, Family::Cols).unwrap();
        assert_eq!(c.case, FamilyCase::Concurrent);
        let cc = c.concurrent.unwrap();
        assert!(cc.projection_distance < MAP_TOL);
        assert!(cc.goursat_a3.goursat && cc.laplace_b2.laplace);
        assert!(cc.control_a2 > 1e-3 && cc.control_b1 > 1e-3);
        for v in [&cc.circle_planes, &cc.circles_orthogonal, &cc.spheres_orthogonal, &cc.normal_planes, &cc.centre_line, &cc.k_coplanarity] {
            assert!(v.iter().all(|&x| x < 1e-7), "{v:?}");
        }
        assert!(cc.moebius_laplace < 1e-7);
        // the other family is generic
        assert!(matches!(family_spherical_check(&net, Family::Rows), Err(GeomError::Hypothesis(_))));
    }
}

#[test]
fn family_check_needs_enough_lines() {
    let mut rng = sample::rng(19);
    let net = one_family_net(5, 5, &mut rng).unwrap();
    assert!(matches!(family_spherical_check(&net, Family::Cols), Err(GeomError::GridTooSmall(_))));
}

#[test]
fn two_families_give_conjugate_planes() {
    let mut rng = sample::rng(20);
    for _ in 0..5 {
        let net = two_family_net(6, 6, &mut rng).unwrap();
        let t = two_family_check(&net).unwrap();
        assert!(t.laplace_a2.laplace && t.laplace_b2.laplace);
        assert!(t.col_poles_plane < 1e-8 && t.row_poles_plane < 1e-8);
        assert!(t.conjugacy < CONJUGATE_TOL);
        assert!(t.centre_plane_angle < 1e-6);
        for cp in [&t.col_common_points, &t.row_common_points] {
            assert_eq!(cp.real, cp.discriminant > 0.0);
            if cp.real {
                assert_eq!(cp.points.len(), 2);
                assert!(cp.residual < 1e-8);
            } else {
                assert!(cp.points.is_empty());
            }
        }
    }
}

#[test]
fn two_family_check_rejects_one_family_nets() {
    let mut rng = sample::rng(21);
    let net = one_family_net(6, 6, &mut rng).unwrap();
    assert!(matches!(two_family_check(&net), Err(GeomError::Hypothesis(_))));
}

/// Replaces the last line by the line through random points of its two
/// neighbours.
fn broken_corner(lc: &LineCongruence, rng: &mut sample::Rng) -> LineCongruence {
    let m = lc.rows();
    let pick = |s: &Subspace, rng: &mut sample::Rng| s.basis() * sample::gaussian_vector(2, rng);
    let a = pick(lc.at(m - 2, m - 1), rng);
    let b = pick(lc.at(m - 1, m - 2), rng);
    let mut lines = lc.lines().to_vec();
    lines[m * m - 1] = Subspace::from_columns(&DMatrix::from_columns(&[a, b])).unwrap();
    LineCongruence::new(m, m, lines).unwrap()
}

#[test]
fn isotropic_congruence_corner() {
    let mut rng = sample::rng(22);
    let q = Quadric::new(space3().form()).unwrap();
    for m in [3, 4] {
        for k in 0..5 {
            let net = free_net(3, m, m, 200 + k);
            let (pce, _) = random_pce(&net, &mut rng).unwrap();
            let lc = pce.lines();
            let good = congruence_corner(&lc, &q).unwrap();
            assert!(good.lhs && good.rhs, "{good:?}");
            let bad = congruence_corner(&broken_corner(&lc, &mut rng), &q).unwrap();
            assert!(!bad.lhs && !bad.rhs, "{bad:?}");

            // hyperplane slices are point nets of the Lie quadric
            for _ in 0..3 {
                let eta = sample::gaussian_vector(6, &mut rng);
                let slice = pce.slice(&eta).unwrap();
                let r = check_theorem_1_1(&slice, &q).unwrap();
                assert!(r.lhs && r.rhs, "{r:?}");
                let bad = PceNetLike::slice(&broken_corner(&lc, &mut rng), &eta);
                let r = check_theorem_1_1(&bad, &q).unwrap();
                assert!(!r.lhs && !r.rhs, "{r:?}");
            }
        }
    }
}

/// Slices of a raw congruence.
struct PceNetLike;

impl PceNetLike {
    fn slice(lc: &LineCongruence, eta: &DVector<f64>) -> qnets::qnet::QNet {
        qnets::qnet::QNet::from_fn(lc.rows(), lc.cols(), |i, j| {
            let b = lc.at(i, j).basis();
            let (b1, b2) = (b.column(0), b.column(1));
            projlin::HPoint::new(b1 * eta.dot(&b2) - b2 * eta.dot(&b1))
        })
        .unwrap()
    }
}
