mod common;

use common::{closure, mat};
use imsynth::exo::validate_exosystem;
use imsynth::plant::{verify_internal_model_structure, STRUCTURE_TOL};
use imsynth::simkit::{
    asymptotic_relative_error, baseline_method, fit_envelope, gradient, logistic_instance, run_figure1, run_method, track_optimizer,
    Baseline, Figure1Config, TimeVaryingObjective, Trace, TraceRecord,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn static_exo(d: usize) -> imsynth::Exosystem {
    validate_exosystem(DMatrix::identity(d, d)).unwrap()
}

fn logistic(a: f64, b: f64) -> TimeVaryingObjective<f64> {
    TimeVaryingObjective::logistic(a, b, static_exo(1), DVector::from_element(1, 0.0)).unwrap()
}

/// Regression constant: root of `z + 6 sigma(6 z) = 0` (cross-checked by bisection).
const LOGISTIC_ZSTAR: f64 = -0.4278105003671672;

#[test]
fn gradient_examples() {
    let g = gradient(&logistic(1.0, 6.0), &DVector::from_element(1, 0.0), &DVector::from_element(1, 0.0)).unwrap();
    assert!((g[0] - 3.0).abs() < 1e-15);
    let q = TimeVaryingObjective::quadratic(DMatrix::identity(2, 2), static_exo(2), DVector::zeros(2)).unwrap();
    let g = gradient(&q, &DVector::from_vec(vec![1.0, 0.0]), &DVector::zeros(2)).unwrap();
    assert_eq!(g, DVector::from_vec(vec![2.0, 0.0]));
}

#[test]
fn optimizer_examples() {
    let q = TimeVaryingObjective::quadratic(DMatrix::identity(2, 2), static_exo(2), DVector::zeros(2)).unwrap();
    let z = track_optimizer(&q, &DVector::from_vec(vec![2.0, 0.0]), None).unwrap();
    assert!((z - DVector::from_vec(vec![-1.0, 0.0])).norm() < 1e-15);

    let obj = logistic(1.0, 6.0);
    let theta = DVector::from_element(1, 0.0);
    let z = track_optimizer(&obj, &theta, None).unwrap();
    assert!(gradient(&obj, &z, &theta).unwrap().norm() <= 1e-10);
    assert!((z[0] - LOGISTIC_ZSTAR).abs() < 1e-12, "z* = {}", z[0]);
}

#[test]
fn logistic_constants() {
    let obj = logistic_instance(1.0, 6.0).unwrap();
    assert_eq!((obj.mu, obj.l), (1.0, 10.0));
}

#[test]
fn gd_contracts_at_nine_elevenths() {
    let gd = baseline_method(Baseline::GradientDescent, 1.0, 10.0).unwrap();
    assert_eq!((gd.a[(0, 0)], gd.b[(0, 0)], gd.c[(0, 0)]), (1.0, -2.0 / 11.0, 1.0));
    // worst-case curvature L, static parameter
    let obj = TimeVaryingObjective::quadratic(mat(1, 1, &[5.0]), static_exo(1), DVector::zeros(1)).unwrap();
    let tr = run_method(&gd, &obj, 200, Some(&DVector::from_element(1, 1.0))).unwrap();
    let g = tr.grad_norms();
    let ratio = g[20] / g[19];
    assert!((ratio - 9.0 / 11.0).abs() < 0.01, "ratio {ratio}");
}

#[test]
fn equilibrium_stays_put() {
    let tm = baseline_method(Baseline::TripleMomentum, 1.0, 10.0).unwrap();
    let obj = TimeVaryingObjective::quadratic(mat(2, 2, &[2.0, 0.5, 0.5, 1.0]), static_exo(2), DVector::zeros(2)).unwrap();
    let tr = run_method(&tm, &obj, 50, None).unwrap();
    assert!(tr.records.iter().all(|r| r.grad_norm == 0.0 && r.z.iter().all(|&v| v == 0.0)));
}

#[test]
fn stored_grad_norm_matches_recomputation() {
    let tm = baseline_method(Baseline::TripleMomentum, 1.0, 10.0).unwrap();
    let obj = logistic_instance(1.0, 6.0).unwrap();
    let tr = run_method(&tm, &obj, 60, None).unwrap();
    for r in &tr.records {
        let norm = r.w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - r.grad_norm).abs() <= 1e-12);
    }
}

fn record(k: usize, err: f64, zs: f64) -> TraceRecord<f64> {
    TraceRecord {
        k,
        z: vec![zs + err],
        w: vec![0.0],
        grad_norm: 0.0,
        z_star: vec![zs],
        tracking_error: err,
        relative_error: err / zs.abs(),
    }
}

#[test]
fn asymptotic_error_examples() {
    let exact = Trace { records: (0..20).map(|k| record(k, 0.0, 1.0)).collect() };
    assert_eq!(asymptotic_relative_error(&exact, 10).unwrap(), 0.0);
    let offset = Trace { records: (0..20).map(|k| record(k, 0.25, 1.0)).collect() };
    assert!((asymptotic_relative_error(&offset, 10).unwrap() - 0.25).abs() < 1e-15);
    assert!(asymptotic_relative_error(&offset, 30).is_err());

    let gd = baseline_method(Baseline::GradientDescent, 2.0, 100.0).unwrap();
    let obj = imsynth::simkit::figure1_instance(4, 3, 1.0, 50.0).unwrap();
    let tr = run_method(&gd, &obj, 1000, None).unwrap();
    assert!(asymptotic_relative_error(&tr, 100).unwrap() > 1e-3);
}

#[test]
fn baselines_have_the_constant_internal_model_only() {
    let ones = closure(&["0"]).values();
    let sixth = closure(&["pi/3"]).values();
    for b in [Baseline::GradientDescent, Baseline::TripleMomentum] {
        let alg = baseline_method(b, 1.0, 10.0).unwrap();
        assert!(verify_internal_model_structure(&alg.a, &alg.b, &alg.c, &ones, STRUCTURE_TOL).unwrap().passed(), "{b}");
        assert!(!verify_internal_model_structure(&alg.a, &alg.b, &alg.c, &sixth, STRUCTURE_TOL).unwrap().passed(), "{b}");
    }
}

#[test]
fn constant_parameters_are_tracked_exactly() {
    let cfg = Figure1Config { orders: vec![1], seeds: 3, ..Default::default() };
    for row in run_figure1(&cfg).unwrap() {
        assert!(row.mean_rel_error <= 1e-9, "{row:?}");
    }
}

#[test]
fn envelope_fit() {
    let records = (0..50)
        .map(|k| TraceRecord {
            k,
            z: vec![0.0],
            w: vec![0.0],
            grad_norm: 3.0 * 0.9f64.powi(k as i32),
            z_star: vec![0.0],
            tracking_error: 0.0,
            relative_error: 0.0,
        })
        .collect();
    let tr = Trace { records };
    let env = fit_envelope(&tr, 0.9, 20, 1e-12);
    assert!(env.holds());
    assert!((env.c - 3.0).abs() < 1e-12);
    assert!(!fit_envelope(&tr, 0.85, 20, 1e-12).holds());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradients_match_finite_differences(a in 0.0..3.0f64, b in -8.0..8.0f64, z in -3.0..3.0f64, t in -3.0..3.0f64,
                                          q in prop::collection::vec(-1.0..1.0f64, 9), p in prop::collection::vec(-2.0..2.0f64, 6)) {
        let h = 1e-6;
        let obj = logistic(a, b);
        let th = DVector::from_element(1, t);
        let g = gradient(&obj, &DVector::from_element(1, z), &th).unwrap()[0];
        let fd = (obj.value(&DVector::from_element(1, z + h), &th) - obj.value(&DVector::from_element(1, z - h), &th)) / (2.0 * h);
        prop_assert!((g - fd).abs() < 1e-6 * (1.0 + g.abs()));

        let m = DMatrix::from_row_slice(3, 3, &q);
        let qm = &m * m.transpose() + DMatrix::identity(3, 3);
        let obj = TimeVaryingObjective::quadratic(qm, static_exo(3), DVector::zeros(3)).unwrap();
        let zv = DVector::from_column_slice(&p[..3]);
        let th = DVector::from_column_slice(&p[3..]);
        let g = gradient(&obj, &zv, &th).unwrap();
        for i in 0..3 {
            let mut e = DVector::zeros(3);
            e[i] = h;
            let fd = (obj.value(&(&zv + &e), &th) - obj.value(&(&zv - &e), &th)) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() < 1e-6 * (1.0 + g[i].abs()));
        }
    }

    #[test]
    fn coordinates_run_independently(q in prop::collection::vec(0.6..5.0f64, 3), signs in prop::collection::vec(any::<bool>(), 3),
                                     t0 in prop::collection::vec(-2.0..2.0f64, 3), x0 in prop::collection::vec(-1.0..1.0f64, 6), tm in any::<bool>()) {
        let s: Vec<f64> = signs.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let alg = baseline_method(if tm { Baseline::TripleMomentum } else { Baseline::GradientDescent }, 1.0, 10.0).unwrap();
        let n = alg.order();
        let joint = TimeVaryingObjective::quadratic(
            DMatrix::from_diagonal(&DVector::from_column_slice(&q)),
            validate_exosystem(DMatrix::from_diagonal(&DVector::from_column_slice(&s))).unwrap(),
            DVector::from_column_slice(&t0),
        ).unwrap();
        let x0j = DVector::from_column_slice(&x0[..n * 3]);
        let tj = run_method(&alg, &joint, 40, Some(&x0j)).unwrap();
        for j in 0..3 {
            let single = TimeVaryingObjective::quadratic(mat(1, 1, &[q[j]]), validate_exosystem(mat(1, 1, &[s[j]])).unwrap(), DVector::from_element(1, t0[j])).unwrap();
            let xs = DVector::from_fn(n, |i, _| x0j[i * 3 + j]);
            let ts = run_method(&alg, &single, 40, Some(&xs)).unwrap();
            for (rj, rs) in tj.records.iter().zip(&ts.records) {
                prop_assert!((rj.z[j] - rs.z[0]).abs() <= 1e-12 * (1.0 + rs.z[0].abs()));
                prop_assert!((rj.w[j] - rs.w[0]).abs() <= 1e-12 * (1.0 + rs.w[0].abs()));
            }
        }
    }
}
