mod common;

use common::closure;
use imsynth::lmi::{
    assemble_analysis, assemble_convex_synthesis, assemble_fixed_multiplier_synthesis, solve_feasibility, verify_point, LambdaMode,
    LmiProblem, Status,
};
use imsynth::plant::build_h;
use imsynth::transform::{assemble_transformed_plant, direct_loop, filter_output_row, MultiplierParams};
use imsynth::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sixth_roots() -> imsynth::plant::PlantRealization<f64> {
    build_h(&closure(&["0", "pi/3", "2pi/3", "pi"])).unwrap()
}

fn integrator() -> imsynth::plant::PlantRealization<f64> {
    build_h(&closure(&["0"])).unwrap()
}

fn gd_analysis(rho: f64) -> LmiProblem<f64> {
    let a = DMatrix::from_element(1, 1, 1.0);
    let b = DMatrix::from_element(1, 1, -2.0 / 11.0);
    let cl = direct_loop(&a, &b, &a, 1.0, 10.0, rho, 1).unwrap();
    assemble_analysis(&cl, rho, LambdaMode::Free).unwrap().problem
}

fn check_affine(p: &LmiProblem<f64>, x: &[f64], y: &[f64]) {
    let n = p.nvars();
    let x = DVector::from_iterator(n, x.iter().cycle().take(n).copied());
    let y = DVector::from_iterator(n, y.iter().cycle().take(n).copied());
    let mid = (&x + &y) * 0.5;
    for c in &p.constraints {
        let lhs = c.f.eval(&mid);
        let rhs = (c.f.eval(&x) + c.f.eval(&y)) * 0.5;
        let scale = 1.0 + rhs.amax();
        assert!((lhs - rhs).amax() <= 1e-12 * scale, "constraint {} is not affine", c.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constraints_are_affine(
        x in prop::collection::vec(-5.0f64..5.0, 1..40),
        y in prop::collection::vec(-5.0f64..5.0, 1..40),
        rho in 0.5f64..0.99,
    ) {
        check_affine(&gd_analysis(rho), &x, &y);
        let conv = assemble_convex_synthesis(&sixth_roots(), 1.0, 10.0, rho, 2).unwrap();
        check_affine(&conv.problem, &x, &y);
    }
}

#[test]
fn fixed_synthesis_dimensions() {
    let p = sixth_roots();
    let lam = MultiplierParams::new(vec![1.0, -0.0274], 0.97).unwrap();
    let ph = assemble_transformed_plant(&p, 1.0, 10.0, 0.97, &lam).unwrap();
    let lmi = assemble_fixed_multiplier_synthesis(&ph).unwrap();
    assert_eq!(lmi.u_hat.shape(), (8, 7));
    assert!((ph.c_y.clone() * lmi.u_hat.rows(0, 7)).amax() < 1e-12);
    let coupling = lmi.problem.constraints.iter().find(|c| c.name == "coupling").unwrap();
    assert_eq!(coupling.f.shape(), (14, 14));
}

#[test]
fn integrator_synthesis_feasible_with_exact_sylvester() {
    let p = integrator();
    let rho = 0.70;
    let lmi = assemble_convex_synthesis(&p, 1.0, 10.0, rho, 1).unwrap();
    let sol = solve_feasibility(&lmi.problem);
    assert_eq!(sol.status, Status::Feasible, "{:?}", sol.diagnostics);
    let x = sol.x.unwrap();
    let (_, worst, _, ok) = verify_point(&lmi.problem, &x);
    assert!(ok, "witness fails at {worst}");

    let cert = lmi.certificate(&p, 1.0, rho, &x).unwrap();
    assert!(cert.sylvester_residual < 1e-10);
    // single-tap filter: the filter state matrix vanishes and N is explicit
    let lam = cert.lambda.lambda().to_vec();
    let ap_inv = p.a_p.clone().try_inverse().unwrap();
    let expect = &ap_inv * &p.b_p * filter_output_row(&lam) * -1.0; // mu = 1
    assert!((&cert.n - &expect).amax() < 1e-9, "N = {}, expected {}", cert.n, expect);
}

#[test]
fn degenerate_sector_is_a_domain_error() {
    let p = integrator();
    assert!(matches!(assemble_convex_synthesis(&p, 1.0, 1.0, 0.9, 1), Err(Error::Domain(_))));
    assert!(matches!(assemble_convex_synthesis(&p, 1.0, 10.0, 1.0, 1), Err(Error::Domain(_))));
    assert!(matches!(assemble_convex_synthesis(&p, 1.0, 10.0, 0.9, 0), Err(Error::Domain(_))));
}

#[test]
fn feasibility_is_monotone_in_rate() {
    let p = integrator();
    let grid = [0.55, 0.62, 0.66, 0.69, 0.72, 0.8, 0.9];
    let feasible: Vec<bool> = grid
        .iter()
        .map(|&r| solve_feasibility(&assemble_convex_synthesis(&p, 1.0, 10.0, r, 1).unwrap().problem).status == Status::Feasible)
        .collect();
    let first = feasible.iter().position(|&f| f).expect("no feasible rate on the grid");
    assert!(feasible[first..].iter().all(|&f| f), "{feasible:?}");
    assert!(!feasible[0]);
}

#[test]
fn witnesses_reverify() {
    for rho in [0.83, 0.9] {
        let p = gd_analysis(rho);
        let sol = solve_feasibility(&p);
        assert_eq!(sol.status, Status::Feasible);
        let (slack, _, eq, ok) = verify_point(&p, sol.x.as_ref().unwrap());
        assert!(ok && slack >= 0.0 && eq < 1e-8);
        assert!((slack - sol.min_slack).abs() < 1e-12);
    }
}
