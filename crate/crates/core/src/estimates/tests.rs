use std::f64::consts::{LN_2, PI};

use proptest::prelude::*;

use super::calibration::{self, kappa_sq_rate};
use super::*;
use crate::error::FlowError;
use crate::flow::{run, FlowConfig, FlowState, Termination};
use crate::geometry::{compute_geometry_closed, make_initial_curve, DiscreteCurve, InitialFamily};

fn sine(amplitude: f64, n: usize) -> DiscreteCurve {
    make_initial_curve(&InitialFamily::FlattenedSine { amplitude }, n).unwrap()
}

fn sine_run(n: usize, dt: f64, t_end: f64) -> Trajectory {
    run(&sine(0.05, n), &FlowConfig::new(0.1, n, t_end).with_dt(dt)).unwrap()
}

#[test]
fn energy_of_segment_and_circle() {
    let seg = make_initial_curve(&InitialFamily::segment_unit(), 64).unwrap();
    for eps in [0.0, 0.5, 1.0] {
        let state = FlowState::new(seg.clone(), eps).unwrap();
        assert!((energy(&state) - 1.0).abs() < 1e-14);
    }
    let pts: Vec<Point2> = (0..256)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / 256.0;
            Point2::new(2.0 * t.cos(), 2.0 * t.sin())
        })
        .collect();
    let cache = compute_geometry_closed(&pts).unwrap();
    let expected = 4.0 * PI + 0.25 * PI;
    assert!((energy_from(&cache, 0.25) - expected).abs() < 1e-3);
}

#[test]
fn curve_shortening_energy_is_length() {
    let state = FlowState::new(sine(0.3, 64), 0.0).unwrap();
    assert!((energy(&state) - state.cache.total_length).abs() < 1e-12);
}

#[test]
fn stationary_segment_has_no_dissipation_residual() {
    let seg = make_initial_curve(&InitialFamily::segment_unit(), 32).unwrap();
    let traj = run(&seg, &FlowConfig::new(0.3, 32, 0.01).with_dt(1e-3)).unwrap();
    for k in 1..traj.diagnostics.len() - 1 {
        assert!(dissipation_residual(&traj, k) < 1e-12);
    }
}

#[test]
fn dissipation_residual_is_first_order_in_time() {
    let at = |dt: f64| dissipation_residual(&sine_run(64, dt, 0.05), (0.05 / dt).round() as usize / 2);
    let (a, b) = (at(2e-4), at(1e-4));
    let slope = (a / b).log2();
    assert!(slope >= 0.9, "slope {slope}");
}

#[test]
fn curve_shortening_length_rate() {
    // E = −κ, so dℓ/dt = −∫κ²
    let at = |n: usize, dt: f64| {
        let traj = run(&sine(0.1, n), &FlowConfig::new(0.0, n, 0.02).with_dt(dt)).unwrap();
        dissipation_residual(&traj, traj.diagnostics.len() / 2)
    };
    let (a, b) = (at(32, 4e-4), at(64, 1e-4));
    assert!(a / b > 3.0, "{a} {b}");
}

#[test]
fn boundary_residuals_of_initial_data() {
    let state = FlowState::new(sine(0.05, 128), 0.1).unwrap();
    let r = boundary_residuals(&state);
    assert!(r.kappa[0] <= 1e-8 && r.kappa[1] <= 1e-8, "{r:?}");
}

#[test]
fn boundary_residuals_shrink_under_refinement() {
    let at = |n: usize| boundary_residuals(sine_run(n, 1e-4, 0.05).last_state());
    let (coarse, fine) = (at(64), at(128));
    for side in 0..2 {
        assert!(coarse.kappa[side] / fine.kappa[side] > 3.0);
        assert!(coarse.kappa_ss[side] / fine.kappa_ss[side] > 3.0);
    }
    // the fourth derivative is bounded by a fixed multiple of h, not convergent
    for (n, r) in [(64usize, coarse), (128, fine)] {
        let state = sine_run(n, 1e-4, 0.05);
        let scale = state.last_state().cache.kappa_s[3].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(r.max()[2] <= scale / n as f64, "{} vs {}", r.max()[2], scale / n as f64);
    }
}

#[test]
fn diagnostics_invariants_hold_along_a_run() {
    let traj = sine_run(64, 1e-4, 0.02);
    let chord = (traj.endpoints.1 - traj.endpoints.0).norm();
    for d in &traj.diagnostics {
        assert!(d.length >= chord);
        assert!(d.energy_feps >= d.length);
        assert!(d.dissipation_rate >= 0.0);
        assert!(d.lambda_endpoint_residual.is_finite());
    }
}

#[test]
fn curvature_rate_epsilon_part_is_a_negative_square() {
    let c = &calibration::corpus(5, 12).unwrap();
    for curve in c {
        let cache = &curve.cache;
        let k = &cache.kappa;
        let kss = cache.kappa_derivative(2);
        let sq: Vec<f64> = (0..k.len()).map(|i| (2.0 * kss[i] + k[i].powi(3)).powi(2)).collect();
        let expected = -0.3 * cache.integrate(&sq);
        let got = kappa_sq_rate(cache, 0.3) - kappa_sq_rate(cache, 0.0);
        assert!((got - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
    }
}

#[test]
fn curvature_norm_rate_matches_trajectory() {
    let gap = |n: usize, dt: f64| {
        let traj = sine_run(n, dt, 0.01);
        let k = traj.states.len() / 2;
        let d = &traj.diagnostics;
        let fd = (d[k + 1].kappa_l2_sq[0] - d[k - 1].kappa_l2_sq[0]) / (2.0 * dt);
        (fd - kappa_sq_rate(&traj.states[k].cache, 0.1)).abs()
    };
    let (a, b) = (gap(32, 4e-4), gap(64, 1e-4));
    assert!(a / b > 2.5, "{a} {b}");
}

#[test]
fn gn_holds_on_evolved_state_with_calibrated_constants() {
    let consts = calibration::standard_constants().unwrap();
    let state = sine_run(128, 1e-4, 0.05);
    let cache = &state.last_state().cache;
    assert!(gn_specialized_u4(cache, &cache.kappa, consts.u4) >= 0.0);
    assert!(gn_specialized_u6(cache, &cache.kappa, consts.u6) >= 0.0);
    for ((n, j, p), c) in calibration::GN_TRIPLES.iter().zip(&consts.general) {
        assert!(gn_check(cache, &cache.kappa, *n, *j, *p, *c, *c).unwrap() >= 0.0);
    }
}

#[test]
fn sine_on_unit_segment_satisfies_sixth_power_form() {
    let consts = calibration::standard_constants().unwrap();
    let seg = make_initial_curve(&InitialFamily::segment_unit(), 256).unwrap();
    let cache = crate::geometry::compute_geometry(&seg).unwrap();
    let u: Vec<f64> = cache.s.iter().map(|s| (2.0 * PI * s).sin()).collect();
    assert!(gn_specialized_u6(&cache, &u, consts.u6) >= 0.0);
}

#[test]
fn calibration_is_seed_deterministic() {
    let a = calibration::calibrate(&calibration::corpus(11, 20).unwrap()).unwrap();
    let b = calibration::calibrate(&calibration::corpus(11, 20).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = calibration::calibrate(&calibration::corpus(12, 20).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn exponential_law_matches_closed_form() {
    let setup = GronwallSetup::new(0.7, GrowthLaw::Linear, 5.0).unwrap();
    let sol = gronwall_solve(&setup);
    for i in 0..=50 {
        let t = 0.1 * i as f64;
        let g = sol.value(t).unwrap();
        let exact = 0.7 * t.exp();
        assert!((g - exact).abs() <= 1e-9 * exact, "t = {t}: {g} vs {exact}");
    }
    assert!(sol.blowup_time.is_none());
    assert!(sol.ode_residual() <= 1e-9);
}

#[test]
fn quadratic_law_blows_up_at_one() {
    let setup = GronwallSetup::new(1.0, GrowthLaw::Quadratic, 2.0).unwrap();
    let sol = gronwall_solve(&setup);
    let a = sol.blowup_time.unwrap();
    assert!((a - 1.0).abs() < 1e-6, "{a}");
    for t in [0.0, 0.25, 0.5, 0.9, 0.99] {
        let exact = 1.0 / (1.0 - t);
        assert!((sol.value(t).unwrap() - exact).abs() <= 1e-8 * exact);
    }
    assert_eq!(sol.value(1.5).unwrap(), f64::INFINITY);
    assert!(sol.ode_residual() <= 1e-9);
}

#[test]
fn doubling_time_closed_forms() {
    let lin = GronwallSetup::new(0.3, GrowthLaw::Linear, 1.0).unwrap();
    for s in [0.1, 0.3, 1.0, 40.0] {
        assert!((doubling_time(&lin, s).unwrap() - LN_2).abs() < 1e-8);
    }
    let quad = GronwallSetup::new(1.0, GrowthLaw::Quadratic, 1.0).unwrap();
    for s in [0.5, 1.0, 3.0, 1e3] {
        let theta = doubling_time(&quad, s).unwrap();
        assert!((theta - 0.5 / s).abs() < 1e-8 * (1.0 + 0.5 / s), "{s}: {theta}");
    }
}

#[test]
fn doubling_time_errors() {
    let flat = GronwallSetup::polynomial(1.0, 0.0, 1.0).unwrap();
    assert!(matches!(doubling_time(&flat, 1.0), Err(FlowError::OutOfDomain { .. })));
    let lin = GronwallSetup::new(1.0, GrowthLaw::Linear, 1.0).unwrap();
    assert!(matches!(doubling_time(&lin, 1e12), Err(FlowError::OutOfDomain { .. })));
    assert!(matches!(doubling_time(&lin, -1.0), Err(FlowError::BadParams(_))));
    assert!(GronwallSetup::new(0.0, GrowthLaw::Linear, 1.0).is_err());
    assert!(GronwallSetup::polynomial(1.0, -1.0, 1.0).is_err());
}

#[test]
fn comparison_holds_for_calibrated_constant() {
    let consts = calibration::standard_constants().unwrap();
    let traj = sine_run(64, 1e-4, 0.05);
    let setup = GronwallSetup::for_trajectory(&traj, GrowthLaw::Polynomial { coeff: consts.growth }).unwrap();
    let out = comparison_check(&traj, &setup).unwrap();
    assert!(out.holds);
    assert!(out.margin > 0.0);
}

#[test]
fn comparison_of_stationary_segment() {
    let seg = make_initial_curve(&InitialFamily::segment_unit(), 32).unwrap();
    let traj = run(&seg, &FlowConfig::new(0.1, 32, 0.01).with_dt(1e-3)).unwrap();
    let setup = GronwallSetup::for_trajectory(&traj, GrowthLaw::Polynomial { coeff: 1.0 }).unwrap();
    assert!(comparison_check(&traj, &setup).unwrap().holds);
}

#[test]
fn comparison_rejects_a_flat_majorant_when_curvature_grows() {
    let loop_curve = make_initial_curve(&InitialFamily::ArcWithFlatEnds { length: 1.0, turning: 2.0 * PI }, 64).unwrap();
    let traj = run(&loop_curve, &FlowConfig::new(0.0, 64, 5e-4).with_dt(1e-5)).unwrap();
    assert_eq!(traj.terminated_by, Termination::ReachedTEnd);
    let setup = GronwallSetup::for_trajectory(&traj, GrowthLaw::Polynomial { coeff: 0.0 }).unwrap();
    let out = comparison_check(&traj, &setup).unwrap();
    assert!(!out.holds);
    assert!(out.margin < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn doubling_window_respects_twice_the_start(g0 in 0.05f64..5.0, factor in 1.0f64..4.0, quadratic in any::<bool>()) {
        let law = if quadratic { GrowthLaw::Quadratic } else { GrowthLaw::Linear };
        let setup = GronwallSetup::new(g0, law, 1.0).unwrap();
        let s = g0 * factor;
        let theta = doubling_time(&setup, s).unwrap();
        prop_assert!(theta > 0.0);
        let sol = gronwall_solve(&GronwallSetup { t_max_query: 1e6, ..setup });
        let t_s = sol.inverse(s).unwrap();
        for i in 0..=20 {
            let t = t_s + theta * i as f64 / 20.0;
            prop_assert!(sol.value(t).unwrap() <= 2.0 * s * (1.0 + 1e-9));
        }
    }

    #[test]
    fn majorant_is_increasing(g0 in 0.01f64..2.0, c in 1e-3f64..1.0) {
        let sol = gronwall_solve(&GronwallSetup::polynomial(g0, c, 0.5).unwrap());
        for w in sol.values.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }
}
