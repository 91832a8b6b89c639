use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;

fn unit_segment(n: usize) -> DiscreteCurve {
    make_initial_curve(&InitialFamily::segment_unit(), n).unwrap()
}

fn circle(r: f64, m: usize) -> Vec<Point2> {
    (0..m)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / m as f64;
            Point2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

#[test]
fn straight_segment_has_zero_curvature() {
    let c = unit_segment(64);
    let g = compute_geometry(&c).unwrap();
    assert!((g.total_length - 1.0).abs() < 1e-14);
    assert!(g.kappa.iter().all(|k| k.abs() < 1e-12));
    for j in 1..=4 {
        assert!(g.kappa_derivative(j).iter().all(|k| k.abs() < 1e-6));
    }
}

#[test]
fn circle_curvature_is_inverse_radius() {
    let g = compute_geometry_closed(&circle(2.0, 256)).unwrap();
    let h = g.h;
    for k in &g.kappa {
        assert!((k - 0.5).abs() <= h * h, "{k}");
    }
}

#[test]
fn frame_is_orthonormal_and_counterclockwise() {
    let c = make_initial_curve(&InitialFamily::FlattenedSine { amplitude: 0.3 }, 64).unwrap();
    let g = compute_geometry(&c).unwrap();
    for (t, n) in g.tangent.iter().zip(&g.normal) {
        assert!((t.norm() - 1.0).abs() < 1e-12);
        assert!((n.norm() - 1.0).abs() < 1e-12);
        assert!((t.cross(*n) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn parabola_apex_curvature() {
    let n = 128;
    let nodes: Vec<Point2> = (0..=n)
        .map(|i| {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            Point2::new(x, x * x)
        })
        .collect();
    let g = compute_geometry(&DiscreteCurve::new(nodes).unwrap()).unwrap();
    let dx = 2.0 / n as f64;
    // y'' / (1 + y'^2)^{3/2} = 2 at the apex
    assert!((g.kappa[n / 2] - 2.0).abs() <= 3.0 * dx * dx);
}

#[test]
fn curvature_converges_at_second_order_on_ellipse() {
    // sampled uniformly in the angle parameter, so segment lengths vary smoothly
    let (a, b) = (2.0, 1.0);
    let exact = |th: f64| a * b / (a * a * th.sin().powi(2) + b * b * th.cos().powi(2)).powf(1.5);
    let err = |m: usize| {
        let pts: Vec<Point2> = (0..m)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / m as f64;
                Point2::new(a * th.cos(), b * th.sin())
            })
            .collect();
        let g = compute_geometry_closed(&pts).unwrap();
        let e = g
            .kappa
            .iter()
            .enumerate()
            .map(|(i, k)| (k - exact(2.0 * PI * i as f64 / m as f64)).abs())
            .fold(0.0, f64::max);
        (g.h, e)
    };
    let (h1, e1) = err(64);
    let (h2, e2) = err(128);
    let (h3, e3) = err(256);
    let s1 = (e1 / e2).ln() / (h1 / h2).ln();
    let s2 = (e2 / e3).ln() / (h2 / h3).ln();
    assert!((1.8..=2.2).contains(&s1), "slope {s1}");
    assert!((1.8..=2.2).contains(&s2), "slope {s2}");
}

#[test]
fn serret_frenet_residual_decreases() {
    let resid = |m: usize| {
        let pts: Vec<Point2> = (0..m)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / m as f64;
                Point2::new(2.0 * th.cos(), th.sin())
            })
            .collect();
        let g = compute_geometry_closed(&pts).unwrap();
        let nx: Vec<f64> = g.normal.iter().map(|v| v.x).collect();
        let ny: Vec<f64> = g.normal.iter().map(|v| v.y).collect();
        // the derivative stencil assumes a constant-speed grid; use the
        // node arclength for a nonuniform centered difference instead
        let m = nx.len();
        (0..m)
            .map(|i| {
                let (ip, im) = ((i + 1) % m, (i + m - 1) % m);
                let hp = (pts[ip] - pts[i]).norm();
                let hm = (pts[i] - pts[im]).norm();
                let d = |f: &[f64]| {
                    (f[ip] * hm * hm - f[im] * hp * hp + f[i] * (hp * hp - hm * hm)) / (hp * hm * (hp + hm))
                };
                let r = Point2::new(d(&nx), d(&ny)) + g.tangent[i] * g.kappa[i];
                r.norm()
            })
            .fold(0.0, f64::max)
    };
    let (a, b) = (resid(64), resid(128));
    assert!(a / b > 3.5, "{a} {b}");
}

#[test]
fn derivative_of_constant_and_of_arclength() {
    let c = unit_segment(64);
    let g = compute_geometry(&c).unwrap();
    let ones = vec![3.5; g.len()];
    for j in 1..=4 {
        assert!(arclength_derivative(&g, &ones, j).iter().all(|v| v.abs() < 1e-9));
    }
    let d = arclength_derivative(&g, &g.s, 1);
    assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-10));
}

#[test]
fn second_derivative_of_sine() {
    let n = 128;
    let c = make_initial_curve(
        &InitialFamily::Segment {
            p: Point2::new(0.0, 0.0),
            q: Point2::new(PI, 0.0),
        },
        n,
    )
    .unwrap();
    let g = compute_geometry(&c).unwrap();
    let f: Vec<f64> = g.s.iter().map(|s| s.sin()).collect();
    let d2 = arclength_derivative(&g, &f, 2);
    for (s, v) in g.s.iter().zip(&d2) {
        assert!((v + s.sin()).abs() <= g.h * g.h, "s={s}");
    }
}

#[test]
fn powers_of_arclength_give_factorials() {
    let g = compute_geometry(&unit_segment(64)).unwrap();
    let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
    for j in 1..=4 {
        let f: Vec<f64> = g.s.iter().map(|s| s.powi(j as i32)).collect();
        let d = arclength_derivative(&g, &f, j);
        for i in 2..g.len() - 2 {
            assert!((d[i] - fact[j]).abs() <= 10.0 * g.h * g.h * fact[j], "j={j} i={i} {}", d[i]);
        }
    }
}

#[test]
fn initial_families_are_compatible() {
    let c = make_initial_curve(&InitialFamily::FlattenedSine { amplitude: 0.1 }, 128).unwrap();
    let g = compute_geometry(&c).unwrap();
    assert!(g.kappa[0].abs() <= 1e-8 && g.kappa[128].abs() <= 1e-8);
    assert_eq!(c.p(), Point2::new(0.0, 0.0));
    assert_eq!(c.q(), Point2::new(1.0, 0.0));
    assert!(endpoint_kappa_one_sided(&c, End::Start).abs() < 1e-4);
    assert!(endpoint_kappa_one_sided(&c, End::Finish).abs() < 1e-4);

    let seg = unit_segment(64);
    assert!(seg.nodes().iter().all(|p| p.y == 0.0));
}

#[test]
fn bump_curvature_vanishes_outside_support() {
    let fam = InitialFamily::BumpPerturbedSegment {
        amplitude: 0.05,
        support_start: 0.3,
        support_end: 0.7,
    };
    let c = make_initial_curve(&fam, 128).unwrap();
    let g = compute_geometry(&c).unwrap();
    let h = g.h;
    for (p, k) in c.nodes().iter().zip(&g.kappa) {
        if p.x < 0.3 - 2.0 * h || p.x > 0.7 + 2.0 * h {
            assert!(k.abs() < 1e-12, "x={} kappa={k}", p.x);
        }
    }
    assert!(g.max_abs_kappa() > 0.1);
}

#[test]
fn loop_family_is_regular() {
    let fam = InitialFamily::ArcWithFlatEnds {
        length: 2.0,
        turning: 2.0 * PI,
    };
    let c = make_initial_curve(&fam, 128).unwrap();
    let segs = c.segment_lengths();
    for l in &segs {
        assert!((l / (2.0 / 128.0) - 1.0).abs() < 1e-2);
    }
    let g = compute_geometry(&c).unwrap();
    let total: f64 = g.integrate(&g.kappa);
    assert!((total - 2.0 * PI).abs() < 1e-2, "{total}");
}

#[test]
fn rejects_bad_inputs() {
    assert!(matches!(
        make_initial_curve(&InitialFamily::FlattenedSine { amplitude: 10.0 }, 64),
        Err(FlowError::BadParams(_))
    ));
    assert!(make_initial_curve(&InitialFamily::segment_unit(), 8).is_err());
    let mut nodes: Vec<Point2> = (0..=20).map(|i| Point2::new(i as f64, 0.0)).collect();
    nodes[5] = nodes[4];
    assert!(matches!(DiscreteCurve::new(nodes), Err(FlowError::DegenerateCurve(_))));
}

#[test]
fn reparametrization_fixes_uniform_segment() {
    let c = unit_segment(64);
    let r = reparametrize_constant_speed(&c).unwrap();
    for (a, b) in c.nodes().iter().zip(r.nodes()) {
        assert!((*a - *b).norm() < 1e-12);
    }
}

#[test]
fn reparametrization_spreads_clustered_segment() {
    let n = 64;
    let nodes: Vec<Point2> = (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            Point2::new(t * t * (3.0 - 2.0 * t) * 0.7 + 0.3 * t, 0.0)
        })
        .collect();
    let r = reparametrize_constant_speed(&DiscreteCurve::new(nodes).unwrap()).unwrap();
    for (i, p) in r.nodes().iter().enumerate() {
        assert_eq!(p.y, 0.0);
        assert!((p.x - i as f64 / n as f64).abs() < 1e-12);
    }
}

#[test]
fn reparametrized_quarter_circle_matches_arclength_inversion() {
    let r0 = 1.5;
    let n = 64;
    let nodes: Vec<Point2> = (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let a = 0.5 * PI * t * t;
            Point2::new(r0 * a.cos(), r0 * a.sin())
        })
        .collect();
    let r = reparametrize_constant_speed(&DiscreteCurve::new(nodes).unwrap()).unwrap();
    let h = 0.5 * PI * r0 / n as f64;
    let segs = r.segment_lengths();
    let mean = segs.iter().sum::<f64>() / n as f64;
    for l in &segs {
        assert!((l / mean - 1.0).abs() < 1e-10);
    }
    for (i, p) in r.nodes().iter().enumerate() {
        assert!((p.norm() - r0).abs() <= 10.0 * h * h / r0, "radius at {i}");
        // equal chords on a circle are equal angles
        let a = 0.5 * PI * i as f64 / n as f64;
        assert!((p.y.atan2(p.x) - a).abs() <= 10.0 * h * h, "angle at {i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reparametrization_is_idempotent(amp in -0.4f64..0.4, n in 16usize..96) {
        let c = make_initial_curve(&InitialFamily::FlattenedSine { amplitude: amp }, n).unwrap();
        let once = reparametrize_constant_speed(&c).unwrap();
        let twice = reparametrize_constant_speed(&once).unwrap();
        for (a, b) in once.nodes().iter().zip(twice.nodes()) {
            prop_assert!((*a - *b).norm() < 1e-10);
        }
        prop_assert_eq!(once.p(), c.p());
        prop_assert_eq!(once.q(), c.q());
        let segs = once.segment_lengths();
        let mean = segs.iter().sum::<f64>() / segs.len() as f64;
        for l in segs {
            prop_assert!((l / mean - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn curvature_is_euclidean_invariant(
        amp in -0.5f64..0.5,
        angle in -PI..PI,
        sx in -2.0f64..2.0,
        sy in -2.0f64..2.0,
    ) {
        let c = make_initial_curve(&InitialFamily::FlattenedSine { amplitude: amp }, 48).unwrap();
        let moved = c.rigid_motion(angle, Point2::new(sx, sy));
        let g0 = compute_geometry(&c).unwrap();
        let g1 = compute_geometry(&moved).unwrap();
        for (a, b) in g0.kappa.iter().zip(&g1.kappa) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()) * 1e1, "{} vs {}", a, b);
        }
    }
}
