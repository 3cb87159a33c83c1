use imsynth::lmi::{assemble_analysis, assemble_convex_synthesis, solve_feasibility, LambdaMode, Status};
use imsynth::transform::direct_loop;
use nalgebra::DMatrix;

fn gd(mu: f64, l: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let alpha = 2.0 / (l + mu);
    (DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, -alpha), DMatrix::from_element(1, 1, 1.0))
}

fn tm(mu: f64, l: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let rho = 1.0 - (mu / l).sqrt();
    let alpha = (1.0 + rho) / l;
    let beta = rho * rho / (2.0 - rho);
    let gamma = rho * rho / ((1.0 + rho) * (2.0 - rho));
    (
        DMatrix::from_row_slice(2, 2, &[1.0 + beta, -beta, 1.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[-alpha, 0.0]),
        DMatrix::from_row_slice(1, 2, &[1.0 + gamma, -gamma]),
    )
}

fn status(abc: &(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>), rho: f64, ell: usize) -> Status {
    let cl = direct_loop(&abc.0, &abc.1, &abc.2, 1.0, 10.0, rho, ell).unwrap();
    let lmi = assemble_analysis(&cl, rho, LambdaMode::Free).unwrap();
    solve_feasibility(&lmi.problem).status
}

#[test]
fn gradient_descent_rate() {
    let g = gd(1.0, 10.0);
    assert_eq!(status(&g, 0.83, 1), Status::Feasible);
    assert_eq!(status(&g, 0.80, 1), Status::Infeasible);
}

#[test]
fn triple_momentum_rate() {
    let t = tm(1.0, 10.0);
    assert_eq!(status(&t, 0.70, 1), Status::Feasible);
    assert_ne!(status(&t, 0.60, 1), Status::Feasible);
}

#[test]
fn convex_synthesis_sixth_roots() {
    use imsynth::exo::{harmonics_from_frequencies, DegreePolicy, Frequency};
    use imsynth::plant::build_h;
    let freqs: Vec<Frequency> = (0..=3).map(|k| Frequency::from_pi_multiple(num_rational::Ratio::new(k, 3))).collect();
    let h = harmonics_from_frequencies(&freqs, DegreePolicy::closure()).unwrap();
    assert_eq!(h.len(), 6);
    let plant = build_h(&h).unwrap();
    let ok = assemble_convex_synthesis(&plant, 1.0, 10.0, 0.97, 1).unwrap();
    assert_eq!(solve_feasibility(&ok.problem).status, Status::Feasible);
    let bad = assemble_convex_synthesis(&plant, 1.0, 10.0, 0.90, 1).unwrap();
    assert_eq!(solve_feasibility(&bad.problem).status, Status::Infeasible);
}
