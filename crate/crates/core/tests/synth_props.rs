mod common;

use common::{closure, harmonics};
use imsynth::exo::DegreePolicy;
use imsynth::numkit::StateSpace;
use imsynth::plant::{build_h, verify_internal_model_structure};
use imsynth::simkit::{baseline_method, triple_momentum_rate, Baseline};
use imsynth::synth::{bisect_optimal_rate, build_algorithm, certify_rate, RateQuery, EXPORT_REDUCTION_TOL};
use imsynth::Error;
use nalgebra::Complex;

const BRACKET: (f64, f64) = (0.05, 0.9999);
const TOL: f64 = 1e-3;

fn rate(freqs: &[&str], l: f64, ell: usize) -> f64 {
    bisect_optimal_rate(&RateQuery::new(1.0, l, closure(freqs), ell)).unwrap().rho_star
}

#[test]
fn longer_multiplier_never_hurts() {
    let r1 = rate(&["0", "pi/3"], 10.0, 1);
    let r2 = rate(&["0", "pi/3"], 10.0, 2);
    assert!(r2 <= r1 + TOL, "ell=2 gives {r2}, ell=1 gives {r1}");
}

#[test]
fn constant_exosystem_matches_triple_momentum() {
    for l in [2.0, 10.0, 50.0] {
        let r = rate(&["0"], l, 1);
        let tm = triple_momentum_rate(1.0, l);
        assert!((r - tm).abs() <= 0.02, "L = {l}: {r} vs {tm}");
    }
}

#[test]
fn alternating_exosystem_regression() {
    let r = rate(&["pi"], 10.0, 1);
    assert!((r - 0.905281).abs() <= 2.0 * TOL, "{r}");
}

#[test]
fn static_gain_gives_gradient_descent() {
    let alpha = 2.0 / 11.0;
    let plant = build_h(&closure(&["0"])).unwrap();
    let g = build_algorithm(&StateSpace::siso_gain(-alpha), &plant, 1.0, 10.0, EXPORT_REDUCTION_TOL).unwrap();
    assert_eq!(g.order(), 1);
    for z in [Complex::new(2.0, 0.0), Complex::new(0.3, 1.7)] {
        let v = g.state_space().eval_siso(z).unwrap();
        assert!((v - (-alpha) / (z - 1.0)).norm() < 1e-12);
    }
}

#[test]
fn sixth_roots_controller_shape() {
    let h = closure(&["0", "pi/3"]);
    let r = bisect_optimal_rate(&RateQuery::new(1.0, 10.0, h.clone(), 1)).unwrap();
    let plant = build_h(&h).unwrap();
    // the reduced algorithm behaves like -c/(z^6 - 1) with c near 0.18
    let g = r.g.state_space();
    let z = Complex::new(1.3, 0.4);
    let gz = g.eval_siso(z).unwrap();
    let c = -(gz * (z.powu(6) - 1.0));
    assert!(c.im.abs() < 0.1 * c.re.abs(), "{c}");
    assert!((c.re - 0.18).abs() <= 0.15 * 0.18, "{c}");
    assert!(verify_internal_model_structure(&r.g.a, &r.g.b, &r.g.c, &plant.harmonics.values(), 1e-8).unwrap().passed());
    assert!(r.rho_star <= 0.977);
}

#[test]
fn known_methods_certified() {
    let gd = baseline_method(Baseline::GradientDescent, 1.0, 10.0).unwrap();
    let c = certify_rate(&gd, 1.0, 10.0, 1, BRACKET, TOL, None).unwrap();
    assert!((0.818..=0.83).contains(&c.rho), "{}", c.rho);
    let tm = baseline_method(Baseline::TripleMomentum, 1.0, 10.0).unwrap();
    let c = certify_rate(&tm, 1.0, 10.0, 1, BRACKET, TOL, None).unwrap();
    assert!((0.6838..=0.70).contains(&c.rho), "{}", c.rho);
}

#[test]
fn missing_internal_model_is_refused() {
    let gd = baseline_method(Baseline::GradientDescent, 1.0, 10.0).unwrap();
    let h = harmonics(&["pi/3"], DegreePolicy::closure());
    let err = certify_rate(&gd, 1.0, 10.0, 1, BRACKET, TOL, Some(&h.values())).unwrap_err();
    assert!(matches!(err, Error::Structure(_)), "{err}");
}

#[test]
fn invalid_queries_rejected() {
    let q = RateQuery::new(1.0, 1.0, closure(&["0"]), 0).with_bracket(0.9, 0.5).with_tol(0.0);
    assert!(q.violations().len() >= 3, "{:?}", q.violations());
    assert!(bisect_optimal_rate(&q).is_err());
}

#[test]
fn marginal_certificate_still_exports() {
    // reconstruction fails at the bisection rate here and succeeds one step up
    let h = harmonics(&["pi/6"], DegreePolicy::MaxDegree(1));
    let q = RateQuery::new(1.0, 10.0, h.clone(), 1);
    let br = imsynth::synth::bisect_rate(&q).unwrap();
    let rho = br.rho_star;
    let r = imsynth::synth::complete_synthesis(&q, br).unwrap();
    assert!(r.rho_star >= rho && r.rho_star <= rho + 3.0 * TOL + 1e-12);
    let c = certify_rate(&r.g, 1.0, 10.0, 1, BRACKET, TOL, Some(&h.values())).unwrap();
    assert!((c.rho - rho).abs() <= 2.0 * TOL, "{} vs {rho}", c.rho);
}
