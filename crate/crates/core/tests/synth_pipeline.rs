use imsynth::exo::{harmonics_from_frequencies, DegreePolicy, Frequency, HarmonicSet};
use imsynth::synth::{bisect_optimal_rate, certify_rate, RateQuery};
use num_rational::Ratio;

fn sixth() -> HarmonicSet<f64> {
    let f = [Frequency::from_pi_multiple(Ratio::from_integer(0)), Frequency::from_pi_multiple(Ratio::new(1, 3))];
    harmonics_from_frequencies(&f, DegreePolicy::closure()).unwrap()
}

fn constant() -> HarmonicSet<f64> {
    harmonics_from_frequencies(&[Frequency::from_pi_multiple(Ratio::from_integer(0))], DegreePolicy::closure()).unwrap()
}

#[test]
fn sixth_roots_pipeline() {
    let q = RateQuery::new(1.0, 10.0, sixth(), 1);
    let r = bisect_optimal_rate(&q).unwrap();
    println!("{r}");
    println!("{}", r.g.state_space().to_transfer_function().unwrap());
    println!("{}", r.k.to_transfer_function().unwrap());
    assert!((0.957..=0.977).contains(&r.rho_star));
    assert!(r.certificate.sylvester_residual <= 1e-10);
    let c = certify_rate(&r.g, 1.0, 10.0, 1, (0.05, 0.9999), 1e-3, Some(&sixth().values())).unwrap();
    println!("recertified {}", c.rho);
    assert!((c.rho - r.rho_star).abs() <= 2e-3 + 1e-9 || c.rho <= r.rho_star);
}

#[test]
fn constant_pipeline() {
    let r = bisect_optimal_rate(&RateQuery::new(1.0, 10.0, constant(), 1)).unwrap();
    println!("{r}");
    assert!((r.rho_star - 0.6838).abs() <= 0.02);
    let c = certify_rate(&r.g, 1.0, 10.0, 1, (0.05, 0.9999), 1e-3, Some(&constant().values())).unwrap();
    println!("recertified {}", c.rho);
}
