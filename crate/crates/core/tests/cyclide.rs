use nalgebra::{DMatrix, DVector};
use qnets::cyclide::*;
use qnets::moebius::*;
use qnets::projlin::{self, HPoint, Quadric, Subspace};
use qnets::sample;
use qnets::GeomError;

fn diagonal_space(n: usize, q: &[f64]) -> (MoebiusSpace, Quadric) {
    (MoebiusSpace::new(n).unwrap(), Quadric::diagonal(q).unwrap())
}

fn rel_incidence(f: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(f * x)).abs() / (f.norm() * x.norm_squared())
}

#[test]
fn diagonal_pencil_has_coordinate_apexes() {
    let (space, q) = diagonal_space(3, &[1.5, 2.5, -0.7, 0.3, 4.0]);
    let c = analyze_cyclide(&q, &space).unwrap();
    assert_eq!(c.real_count, 5);
    assert_eq!(c.complex_count, 0);
    assert!(c.general);
    for g in &c.generations {
        let k = (0..5).max_by(|&a, &b| g.apex.coords()[a].abs().total_cmp(&g.apex.coords()[b].abs())).unwrap();
        let mut e = DVector::zeros(5);
        e[k] = 1.0;
        assert!(g.apex.distance(&HPoint::new(e).unwrap()) < 1e-9);
        let rep = &g.orthogonal_sphere;
        match k {
            0..=2 => {
                // the coordinate hyperplane x_k = 0
                assert_eq!(rep.kind, SphereKind::Plane);
                assert!(rep.offset.unwrap().abs() < 1e-9);
            }
            3 => {
                assert_eq!(rep.kind, SphereKind::Sphere);
                assert!(rep.center.clone().unwrap().norm() < 1e-9);
                assert!((rep.radius2.unwrap() - 1.0).abs() < 1e-9);
            }
            _ => {
                assert_eq!(rep.kind, SphereKind::Imaginary);
                assert!(rep.center.clone().unwrap().norm() < 1e-9);
                assert!((rep.radius2.unwrap() + 1.0).abs() < 1e-9);
            }
        }
    }
    assert!(c.conjugacy < 1e-12);
}

#[test]
fn repeated_root_is_not_general() {
    let (space, q) = diagonal_space(2, &[2.0, 2.0, 3.0, -5.0]);
    let c = analyze_cyclide(&q, &space).unwrap();
    assert!(!c.general);
    let double = c.generations.iter().find(|g| g.multiplicity == 2).expect("double root");
    assert_eq!(double.corank, 2);
    assert_eq!(c.real_count, 4);
}

#[test]
fn moebius_form_itself_is_rejected() {
    let space = MoebiusSpace::new(2).unwrap();
    let q = Quadric::new(space.form() * 3.0).unwrap();
    assert!(matches!(analyze_cyclide(&q, &space), Err(GeomError::ProportionalForms)));
}

#[test]
fn random_pencils_satisfy_generation_properties() {
    let mut rng = sample::rng(31);
    let mut imaginary = 0;
    let mut real = 0;
    for n in [2, 3] {
        let space = MoebiusSpace::new(n).unwrap();
        for _ in 0..50 {
            let q = sample::random_quadric(n + 1, 1, &mut rng);
            let c = analyze_cyclide(&q, &space).unwrap();
            assert!(c.real_count <= n + 2);
            assert_eq!(c.real_count + c.complex_count, n + 2);
            assert!(c.conjugacy < CONJUGACY_TOL);
            assert!(c.confocality < CONFOCAL_TOL);
            for g in &c.generations {
                // the apex spans the kernel of the cone
                assert!((&g.form * g.apex.coords()).norm() / g.form.norm() < 1e-8);
                if g.multiplicity > 1 {
                    continue;
                }
                for _ in 0..3 {
                    let Ok((s, x)) = sample_generation_sphere(&space, g, &mut rng) else { continue };
                    assert!(rel_incidence(&g.form, x.coords()) < 1e-8);
                    // orthogonal to the apex sphere
                    assert!(space.lorentz(&s, g.apex.coords()).abs() / s.norm() < 1e-8);
                    let u = space.form() * &s;
                    let contact = tangency_certificate(&space, &g.form, &g.apex, &u).unwrap();
                    let line = contact.line.as_ref().unwrap();
                    assert!(line.residual(&g.apex) < 1e-10);
                    if contact.real {
                        real += 1;
                        for p in &contact.points {
                            assert!(rel_incidence(&space.form(), p.coords()) < 1e-8);
                            assert!(rel_incidence(q.form(), p.coords()) < 1e-8);
                            // a point of the sphere, touching the cyclide
                            assert!(space.lorentz(&s, p.coords()).abs() / s.norm() < 1e-8);
                        }
                    } else {
                        imaginary += 1;
                        assert!(contact.discriminant < 0.0);
                    }
                }
            }
        }
    }
    assert!(real > 0 && imaginary > 0, "real {real}, imaginary {imaginary}");
}

#[test]
fn non_tangent_hyperplane_is_rejected() {
    let (space, q) = diagonal_space(2, &[1.5, 2.5, -0.7, 4.0]);
    let c = analyze_cyclide(&q, &space).unwrap();
    let g = &c.generations[0];
    let u = DVector::from_column_slice(&[0.3, -0.8, 1.1, 0.4]);
    assert!(matches!(tangency_certificate(&space, &g.form, &g.apex, &u), Err(GeomError::Hypothesis(_))));
}

#[test]
fn pseudo_inverse_of_a_cone() {
    let k = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, -4.0, 0.0]));
    let p = symmetric_pinv(&k);
    let expected = DMatrix::from_diagonal(&DVector::from_column_slice(&[0.5, -0.25, 0.0]));
    assert!((p - expected).norm() < 1e-14);
}

/// Independent least-squares conic through plane points, coefficients of
/// x^2, xy, y^2, x, y, 1.
fn fit_conic(points: &[DVector<f64>]) -> DVector<f64> {
    let m = DMatrix::from_fn(points.len(), 6, |r, c| {
        let (x, y) = (points[r][0], points[r][1]);
        [x * x, x * y, y * y, x, y, 1.0][c]
    });
    let svd = m.svd(false, true);
    let vt = svd.v_t.unwrap();
    let k = svd.singular_values.imin();
    vt.row(k).transpose()
}

#[test]
fn circle_net_cone_matches_centre_conic_and_cyclide() {
    let space = MoebiusSpace::new(2).unwrap();
    let cc = ConstraintPair::parse("circular-circular").unwrap();
    let mut rng = sample::rng(32);
    let seed = random_seed(&space, cc, &mut rng).unwrap();
    let (net, _) = grow_net(&seed, cc, 3, &mut rng).unwrap();
    let rows = family_spans(&net, cc, Family::Rows).unwrap();
    let y = projlin::meet_dim(&rows.iter().collect::<Vec<_>>(), 0).unwrap().0.as_point().unwrap();
    let cone = fit_generation_cone(&space, &y, &rows.iter().collect::<Vec<&Subspace>>()).unwrap();
    assert!(cone.residual < 1e-9);
    for contact in &cone.contacts {
        assert!(contact.tangency < 1e-8);
        assert!(contact.real);
    }

    // centre conic from the cone against a direct fit of the circle centres
    let g = centre_quadric(&space, &cone.form, y.coords()).unwrap();
    let coef = DVector::from_column_slice(&[g[(0, 0)], 2.0 * g[(0, 1)], g[(1, 1)], 2.0 * g[(0, 2)], 2.0 * g[(1, 2)], g[(2, 2)]]);
    let centres: Vec<DVector<f64>> =
        family_spheres(&net, cc, Family::Rows).unwrap().into_iter().map(|s| s.center.unwrap()).collect();
    let direct = fit_conic(&centres);
    let (a, b) = (coef.normalize(), direct.normalize());
    assert!(a.dot(&b).abs() > 1.0 - 1e-10, "{a} {b}");

    // the cone is a degenerate member of the pencil it spans with M^2
    let q = Quadric::new(cone.form.clone()).unwrap();
    let c = analyze_cyclide(&q, &space).unwrap();
    assert!(c.generations.iter().any(|gen| gen.apex.distance(&y) < 1e-7));
    assert!(c.conjugacy < CONJUGACY_TOL);
    assert!(c.confocality < CONFOCAL_TOL);

    // the column apex X is the apex of another member
    let cols = family_spans(&net, cc, Family::Cols).unwrap();
    let x = projlin::meet_dim(&cols.iter().collect::<Vec<_>>(), 0).unwrap().0.as_point().unwrap();
    assert!(c.generations.iter().any(|gen| gen.apex.distance(&x) < 1e-6));
}
