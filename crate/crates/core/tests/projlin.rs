use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qnets::projlin::*;
use qnets::sample;
use qnets::GeomError;

fn pt(c: &[f64]) -> HPoint {
    HPoint::from_slice(c).unwrap()
}

fn span(points: &[&[f64]]) -> Subspace {
    let ps: Vec<HPoint> = points.iter().map(|c| pt(c)).collect();
    let refs: Vec<&HPoint> = ps.iter().collect();
    Subspace::from_points(&refs).unwrap()
}

/// Rank by Gaussian elimination with partial pivoting.
fn oracle_rank(mut rows: Vec<Vec<f64>>) -> usize {
    let ncols = rows[0].len();
    let mut rank = 0;
    for c in 0..ncols {
        let piv = (rank..rows.len()).max_by(|&a, &b| rows[a][c].abs().partial_cmp(&rows[b][c].abs()).unwrap());
        let Some(piv) = piv else { break };
        if rows[piv][c].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, piv);
        for r in 0..rows.len() {
            if r != rank {
                let f = rows[r][c] / rows[rank][c];
                for k in 0..ncols {
                    rows[r][k] -= f * rows[rank][k];
                }
            }
        }
        rank += 1;
    }
    rank
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[test]
fn hpoint_is_canonical() {
    let p = pt(&[-3.0, 4.0, 0.0]);
    assert_abs_diff_eq!(p.coords().norm(), 1.0, epsilon = 1e-15);
    assert!(p.coords()[0] > 0.0);
    assert_eq!(HPoint::from_slice(&[0.0, 0.0]), Err(GeomError::ZeroVector));
}

#[test]
fn join_of_two_basis_points_is_a_line() {
    let l = span(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
    assert_eq!(l.dim(), 1);
    assert!(l.residual(&pt(&[1.0, 1.0, 0.0])) < 1e-15);
    assert!(l.residual(&pt(&[0.0, 0.0, 1.0])) > 0.99);
}

#[test]
fn join_is_idempotent() {
    let l = span(&[&[1.0, 2.0, 0.0, 1.0], &[0.0, 1.0, 3.0, 0.0]]);
    let j = join(&[&l, &l]).unwrap();
    assert!(j.distance(&l) < 1e-12);
}

#[test]
fn join_of_quad_vertices_is_a_plane() {
    let u = [1.0, 2.0, -1.0, 0.5, 0.0];
    let v = [0.0, 1.0, 1.0, -2.0, 1.0];
    let w = [3.0, 0.0, 1.0, 1.0, -1.0];
    let s: Vec<f64> = (0..5).map(|k| u[k] + v[k] + w[k]).collect();
    let j = span(&[&u, &v, &w, &s]);
    let rank = oracle_rank(vec![u.to_vec(), v.to_vec(), w.to_vec(), s.clone()]);
    assert_eq!(rank, 3);
    assert_eq!(j.dim(), rank - 1);
}

#[test]
fn meet_of_two_lines_in_the_plane() {
    // lines x + y - w = 0 and x + y + w = 0 as spans of two points each
    let l1 = span(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
    let l2 = span(&[&[1.0, 0.0, -1.0], &[0.0, 1.0, -1.0]]);
    let m = meet(&[&l1, &l2]).unwrap();
    let oracle = cross([1.0, 1.0, -1.0], [1.0, 1.0, 1.0]);
    assert_eq!(m.dim(), 0);
    assert!(m.as_point().unwrap().distance(&pt(&oracle)) < 1e-12);
    assert!(m.as_point().unwrap().distance(&pt(&[1.0, -1.0, 0.0])) < 1e-12);
}

#[test]
fn meet_is_idempotent() {
    let l = span(&[&[1.0, 2.0, 0.0, 1.0], &[0.0, 1.0, 3.0, 0.0]]);
    assert!(meet(&[&l, &l]).unwrap().distance(&l) < 1e-12);
}

#[test]
fn generic_planes_in_rp4_do_not_meet_in_a_line_but_in_a_point() {
    // two generic 2-planes of RP^4 meet in a point; a plane and a line miss
    let mut rng = sample::rng(1);
    let a = sample::random_subspace(4, 2, &mut rng).unwrap();
    let b = sample::random_subspace(4, 1, &mut rng).unwrap();
    assert_eq!(meet(&[&a, &b]), Err(GeomError::EmptyMeet));
    let c = sample::random_subspace(4, 2, &mut rng).unwrap();
    assert_eq!(meet(&[&a, &c]).unwrap().dim(), 0);
}

#[test]
fn conjugate_diagonal_example() {
    let q = Quadric::diagonal(&[1.0, 1.0, -1.0]).unwrap();
    let c = conjugate(&pt(&[1.0, 1.0, 0.0]), &pt(&[1.0, -1.0, 0.0]), &q).unwrap();
    // direct evaluation: 1*1 + 1*(-1) - 0*0
    assert_eq!(1.0 * 1.0 + 1.0 * (-1.0) - 0.0 * 0.0, 0.0);
    assert!(c.conjugate);
    assert!(c.residual < 1e-15);
}

#[test]
fn point_on_quadric_is_self_conjugate() {
    let q = Quadric::diagonal(&[1.0, 1.0, -1.0]).unwrap();
    let a = pt(&[0.6, 0.8, 1.0]);
    assert!(conjugate(&a, &a, &q).unwrap().conjugate);
}

#[test]
fn moebius_e0_einf_not_conjugate() {
    let n = 2;
    let mut form = DMatrix::identity(n + 2, n + 2);
    form[(n + 1, n + 1)] = -1.0;
    let q = Quadric::new(form.clone()).unwrap();
    let mut e0 = DVector::zeros(n + 2);
    e0[n + 1] = 0.5;
    e0[n] = -0.5;
    let mut einf = DVector::zeros(n + 2);
    einf[n + 1] = 0.5;
    einf[n] = 0.5;
    // unnormalized value is -1/2
    assert_abs_diff_eq!(e0.dot(&(&form * &einf)), -0.5, epsilon = 1e-15);
    let c = conjugate(&HPoint::new(e0).unwrap(), &HPoint::new(einf).unwrap(), &q).unwrap();
    assert!(!c.conjugate);
    // unit vectors scale the value by 2, unit Frobenius form by 1/sqrt(n+2)
    assert_abs_diff_eq!(c.residual, 1.0 / ((n + 2) as f64).sqrt(), epsilon = 1e-14);
}

#[test]
fn polar_examples() {
    let q = Quadric::diagonal(&[1.0, 1.0, -1.0]).unwrap();
    let p = polar(&pt(&[0.0, 0.0, 1.0]).to_subspace(), &q).unwrap();
    assert!(p.distance(&span(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]])) < 1e-12);
    let t = polar(&pt(&[1.0, 0.0, 1.0]).to_subspace(), &q).unwrap();
    // form times vector is (1, 0, -1): the line x - w = 0
    let expected = span(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
    assert!(t.distance(&expected) < 1e-12);
    let back = polar(&t, &q).unwrap();
    assert!(back.as_point().unwrap().distance(&pt(&[1.0, 0.0, 1.0])) < 1e-12);
}

#[test]
fn polar_of_singular_point_is_flagged() {
    let q = Quadric::diagonal(&[1.0, -1.0, 0.0]).unwrap();
    assert!(matches!(
        polar(&pt(&[0.0, 0.0, 1.0]).to_subspace(), &q),
        Err(GeomError::PolarUndefined { .. })
    ));
}

#[test]
fn restrict_examples() {
    // Moebius form in RP^3 restricted to span(e_1, e_0, e_inf)
    let m = Quadric::diagonal(&[1.0, 1.0, 1.0, -1.0]).unwrap();
    let s = span(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, -0.5, 0.5], &[0.0, 0.0, 0.5, 0.5]]);
    let Restriction::Form(r) = restrict(&m, &s).unwrap() else { panic!("not isotropic") };
    let eig = nalgebra::SymmetricEigen::new(r.form().clone()).eigenvalues;
    let pos = eig.iter().filter(|&&x| x > 1e-12).count();
    let neg = eig.iter().filter(|&&x| x < -1e-12).count();
    assert_eq!((pos, neg), (2, 1));
    assert_eq!(signature(&r), Signature { p: 2, q: 1, r: 0 });

    let hyp = Quadric::diagonal(&[1.0, 1.0, -1.0, -1.0]).unwrap();
    let iso = span(&[&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0]]);
    assert!(restrict(&hyp, &iso).unwrap().is_isotropic());

    let plane = span(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
    let Restriction::Form(r) = restrict(&m, &plane).unwrap() else { panic!() };
    let expected = Quadric::diagonal(&[1.0, 1.0, -1.0]).unwrap();
    // bases may differ by an orthogonal change; compare spectra
    let e1 = signature(&r);
    assert_eq!(e1, signature(&expected));
}

#[test]
fn signature_examples() {
    let s = signature(&Quadric::diagonal(&[1.0, 1.0, 1.0, -1.0]).unwrap());
    assert_eq!(s, Signature { p: 3, q: 1, r: 0 });
    assert_eq!(s.generator_dim(), 0);
    let s = signature(&Quadric::diagonal(&[1.0, 1.0, -1.0, -1.0]).unwrap());
    assert_eq!(s, Signature { p: 2, q: 2, r: 0 });
    assert_eq!(s.generator_dim(), 1);
    let s = signature(&Quadric::diagonal(&[1.0, 1.0, -1.0, 0.0, 0.0]).unwrap());
    assert_eq!(s, Signature { p: 2, q: 1, r: 2 });
    assert_eq!(s.generator_dim(), 2);
}

#[test]
fn second_intersection_examples() {
    let q = Quadric::diagonal(&[1.0, 1.0, -1.0]).unwrap();
    let p = pt(&[1.0, 0.0, 1.0]);
    let diameter = span(&[&[1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]]);
    let x = second_intersection(&diameter, &p, &q).unwrap();
    assert!(!x.tangent);
    assert!(x.point.distance(&pt(&[-1.0, 0.0, 1.0])) < 1e-12);

    let tangent = span(&[&[1.0, 0.0, 1.0], &[1.0, 1.0, 1.0]]);
    let x = second_intersection(&tangent, &p, &q).unwrap();
    assert!(x.tangent);
    assert_eq!(x.point, p);

    // line (1-t)(1,0) + t(0,1): (1-t)^2 + t^2 = 1 gives t = 0 or t = 1
    let chord = span(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
    let x = second_intersection(&chord, &p, &q).unwrap();
    let t = 1.0;
    assert!(x.point.distance(&pt(&[1.0 - t, t, 1.0])) < 1e-12);
}

#[test]
fn second_intersection_errors() {
    let q = Quadric::diagonal(&[1.0, 1.0, -1.0, -1.0]).unwrap();
    let iso = span(&[&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0]]);
    assert_eq!(second_intersection(&iso, &pt(&[1.0, 0.0, 1.0, 0.0]), &q), Err(GeomError::IsotropicLine));
    let line = span(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]);
    assert!(matches!(
        second_intersection(&line, &pt(&[1.0, 0.0, 0.0, 0.0]), &q),
        Err(GeomError::NotOnQuadric { .. })
    ));
}

#[test]
fn degenerate_members_three_real_roots() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0]));
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 0.0]));
    let p = Pencil::from_forms(a, b).unwrap();
    let members = degenerate_members(&p).unwrap();
    // det = (l + m)(l - m)(-l) by expanding the diagonal
    let expected = [(0.0, 1.0), (1.0, 1.0), (1.0, -1.0)];
    assert_eq!(members.len(), 3);
    for (l, m) in expected {
        let det = (l + m) * (l - m) * (-l);
        assert_eq!(det, 0.0);
        assert!(members.iter().any(|d| d.param_matches(l, m, 1e-9)), "missing [{l}:{m}]");
    }
    for d in &members {
        assert_eq!(d.corank, 1);
        assert_eq!(d.multiplicity, 1);
    }
}

#[test]
fn degenerate_members_concentric_circles() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0]));
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -4.0]));
    let p = Pencil::from_forms(a, b).unwrap();
    let members = degenerate_members(&p).unwrap();
    // det = (l + m)^2 (-l - 4m)
    assert_eq!(members.len(), 2);
    let double = members.iter().find(|d| d.param_matches(1.0, -1.0, 1e-9)).unwrap();
    assert_eq!(double.multiplicity, 2);
    assert_eq!(double.corank, 2);
    let simple = members.iter().find(|d| d.param_matches(4.0, -1.0, 1e-9)).unwrap();
    assert_eq!(simple.multiplicity, 1);
    assert_eq!(simple.corank, 1);
}

#[test]
fn degenerate_members_of_identically_singular_pencil() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 0.0]));
    let p = Pencil::from_forms(a, b).unwrap();
    assert_eq!(degenerate_members(&p), Err(GeomError::PencilDegenerate));
}

#[test]
fn generic_pencil_in_rp3_has_at_most_four_roots() {
    let mut rng = sample::rng(3);
    for _ in 0..20 {
        let a = sample::random_indefinite_quadric(3, &mut rng);
        let b = sample::random_indefinite_quadric(3, &mut rng);
        let p = Pencil::new(&a, &b).unwrap();
        let m = degenerate_members(&p).unwrap();
        assert!(m.iter().map(|d| d.multiplicity).sum::<usize>() <= 4);
        for d in &m {
            assert!(d.corank >= 1);
        }
    }
}

#[test]
fn quadric_through_five_points() {
    let pts: Vec<HPoint> = (0..5)
        .map(|k| {
            let t = 0.7 * k as f64 + 0.1;
            pt(&[2.0 * t.cos(), t.sin(), 1.0])
        })
        .collect();
    let refs: Vec<&HPoint> = pts.iter().collect();
    let q = quadric_through(&refs, &[]).unwrap();
    let expected = Quadric::diagonal(&[0.25, 1.0, -1.0]).unwrap();
    assert!((q.form() - expected.form()).norm() < 1e-10);
}

#[test]
fn quadric_through_points_and_isotropic_line() {
    // w = 0 as a component: 2 points of the circle give w * L = 0 with
    // L the chord through them; 3 points leave only the zero solution
    let line = span(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
    let a = pt(&[1.0, 0.0, 1.0]);
    let b = pt(&[0.0, 1.0, 1.0]);
    let c = pt(&[-1.0, 0.0, 1.0]);
    let q = quadric_through(&[&a, &b], &[&line]).unwrap();
    // oracle: w (x + y - w) = x w + y w - w^2
    let oracle = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, -1.0]);
    let oracle = Quadric::new(oracle).unwrap();
    assert!((q.form() - oracle.form()).norm() < 1e-10);
    assert!(signature(&q).r >= 1);
    assert_eq!(quadric_through(&[&a, &b, &c], &[&line]), Err(GeomError::OverConstrained));
}

#[test]
fn quadric_through_nine_points() {
    let mut rng = sample::rng(9);
    let q0 = sample::random_quadric(3, 2, &mut rng);
    let mut pts = Vec::new();
    for _ in 0..9 {
        pts.push(sample::point_on_quadric(&q0, &Subspace::whole(3), None, &mut rng).unwrap());
    }
    let refs: Vec<&HPoint> = pts.iter().collect();
    let q = quadric_through(&refs, &[]).unwrap();
    assert!((q.form() - q0.form()).norm() < 1e-8);
    assert!(matches!(quadric_through(&refs[..8], &[]), Err(GeomError::UnderDetermined { dim: 2 })));
}

fn arb_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polar_is_an_involution(seed in any::<u64>(), n in 2usize..6, k in 0usize..3) {
        let mut rng = sample::rng(seed);
        let k = k.min(n - 1);
        let q = sample::random_indefinite_quadric(n, &mut rng);
        let s = sample::random_subspace(n, k, &mut rng).unwrap();
        let p = polar(&s, &q).unwrap();
        prop_assert_eq!(p.dim(), n - k - 1);
        let back = polar(&p, &q).unwrap();
        prop_assert!(back.distance(&s) < 1e-9);
    }

    #[test]
    fn dimension_formula(seed in any::<u64>(), n in 3usize..7) {
        let mut rng = sample::rng(seed);
        let whole = Subspace::whole(n);
        let a = sample::random_subspace(n, n - 1, &mut rng).unwrap();
        let kb = (n - 2).max(1);
        let b = sample::random_subspace_in(&whole, kb, &mut rng).unwrap();
        let j = join(&[&a, &b]).unwrap();
        let m = meet(&[&a, &b]).unwrap();
        prop_assert_eq!(j.dim() + m.dim(), a.dim() + b.dim());
    }

    #[test]
    fn conjugacy_is_symmetric_and_scale_free(a in arb_vec(4), b in arb_vec(4), s in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = sample::rng(seed);
        let q = sample::random_indefinite_quadric(3, &mut rng);
        let pa = HPoint::from_slice(&a).unwrap();
        let pb = HPoint::from_slice(&b).unwrap();
        let sa: Vec<f64> = a.iter().map(|x| -s * x).collect();
        let q2 = Quadric::new(q.form() * (3.0 * s)).unwrap();
        let r1 = conjugate(&pa, &pb, &q).unwrap().residual;
        let r2 = conjugate(&pb, &pa, &q).unwrap().residual;
        let r3 = conjugate(&HPoint::from_slice(&sa).unwrap(), &pb, &q2).unwrap().residual;
        prop_assert!((r1 - r2).abs() < 1e-15);
        prop_assert!((r1 - r3).abs() < 1e-12);
    }

    #[test]
    fn signature_is_congruence_invariant(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = sample::rng(seed);
        let q = sample::random_indefinite_quadric(n, &mut rng);
        let g = sample::gaussian_matrix(n + 1, n + 1, &mut rng) + DMatrix::identity(n + 1, n + 1) * 3.0;
        let q2 = Quadric::new(g.transpose() * q.form() * &g).unwrap();
        let (s1, s2) = (signature(&q), signature(&q2));
        let mut a = [s1.p, s1.q];
        let mut b = [s2.p, s2.q];
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        prop_assert_eq!(s1.r, s2.r);
    }

    #[test]
    fn degenerate_members_are_singular(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = sample::rng(seed);
        let a = sample::random_indefinite_quadric(n, &mut rng);
        let b = sample::random_indefinite_quadric(n, &mut rng);
        let p = Pencil::new(&a, &b).unwrap();
        let coeffs = pencil_polynomial(&p).unwrap();
        let scale: f64 = coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
        for d in degenerate_members(&p).unwrap() {
            prop_assert!(d.corank >= 1);
            let det = d.form.determinant() / d.form.norm().powi(n as i32 + 1);
            prop_assert!(det.abs() < 1e-9 * scale.max(1.0), "det {}", det);
        }
    }

    #[test]
    fn quadric_through_satisfies_constraints(seed in any::<u64>()) {
        let mut rng = sample::rng(seed);
        let pts: Vec<HPoint> = (0..5).map(|_| sample::random_point(2, &mut rng)).collect();
        let refs: Vec<&HPoint> = pts.iter().collect();
        let q = quadric_through(&refs, &[]).unwrap();
        for p in &pts {
            prop_assert!(q.incidence(p) < 1e-10);
        }
    }
}
