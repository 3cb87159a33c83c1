use imsynth::exo::{
    harmonic_closure, harmonics_from_frequencies, parse_frequency, step_exosystem, validate_exosystem, DegreePolicy, Frequency,
};
use imsynth::scalar::{unit_phasor, Cplx};
use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use proptest::prelude::*;
use std::f64::consts::PI;

fn rot(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
}

fn near(set: &[Cplx<f64>], w: Cplx<f64>) -> bool {
    set.iter().any(|h| (h - w).norm() < 1e-8)
}

#[test]
fn block_rotations_have_four_eigenvalues() {
    let s = imsynth::numkit::linalg::block_diag(&[&rot(PI / 3.0), &rot(PI / 2.0)]);
    let e = validate_exosystem(s).unwrap();
    assert_eq!(e.spectrum().len(), 4);
    for w in [PI / 3.0, -PI / 3.0, PI / 2.0, -PI / 2.0] {
        assert!(near(e.spectrum(), unit_phasor(w)));
    }
}

#[test]
fn closure_examples() {
    let l6 = [unit_phasor(PI / 3.0), unit_phasor(-PI / 3.0)];
    let h = harmonic_closure(&l6, DegreePolicy::closure()).unwrap();
    assert_eq!(h.len(), 6);
    for k in 0..6 {
        assert!(h.contains(unit_phasor(k as f64 * PI / 3.0)));
    }
    let h = harmonic_closure(&[Cplx::new(1.0, 0.0)], DegreePolicy::closure()).unwrap();
    assert_eq!(h.values(), vec![Cplx::new(1.0, 0.0)]);
    let h = harmonic_closure(&[Cplx::new(0.0, 1.0), Cplx::new(0.0, -1.0)], DegreePolicy::closure()).unwrap();
    assert_eq!(h.len(), 4);
    for w in [Cplx::new(1.0, 0.0), Cplx::new(0.0, 1.0), Cplx::new(-1.0, 0.0), Cplx::new(0.0, -1.0)] {
        assert!(h.contains(w));
    }
}

#[test]
fn steps() {
    let id = validate_exosystem(DMatrix::<f64>::identity(2, 2)).unwrap();
    let th = DVector::from_vec(vec![0.3, -2.0]);
    assert_eq!(step_exosystem(&id, &th).unwrap(), th);
    let quarter = validate_exosystem(rot(PI / 2.0)).unwrap();
    let next = step_exosystem(&quarter, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
    assert!((next - DVector::from_vec(vec![0.0, 1.0])).norm() < 1e-15);
    let sixth = validate_exosystem(rot(PI / 3.0)).unwrap();
    let mut x = DVector::from_vec(vec![1.0, 0.0]);
    for _ in 0..6 {
        x = step_exosystem(&sixth, &x).unwrap();
    }
    assert!((x - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-12);
}

#[test]
fn frequency_strings() {
    assert_eq!(parse_frequency("pi/3").unwrap().pi_multiple(), Some(Ratio::new(1, 3)));
    assert_eq!(parse_frequency("0").unwrap().pi_multiple(), Some(Ratio::from_integer(0)));
    assert!((parse_frequency("0.7853981634").unwrap().radians() - PI / 4.0).abs() < 1e-9);
    assert!(parse_frequency("pie").is_err());
}

fn rational_freqs() -> impl Strategy<Value = Vec<Frequency>> {
    prop::collection::vec((0i64..12, 1i64..13), 1..3)
        .prop_map(|v| v.into_iter().map(|(n, d)| Frequency::from_pi_multiple(Ratio::new(n % (d + 1), d))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closure_is_a_fixpoint(freqs in rational_freqs()) {
        let h = harmonics_from_frequencies::<f64>(&freqs, DegreePolicy::closure());
        // large common denominators exceed the closure cap by design
        prop_assume!(h.is_ok());
        let h = h.unwrap();
        let vals = h.values();
        prop_assert!(h.is_conjugation_closed());
        for a in &vals {
            for b in &vals {
                prop_assert!(h.contains(a * b), "{} * {} not in the set", a, b);
            }
            for s in h.source_eigenvalues() {
                prop_assert!(h.contains(a * s));
            }
        }
    }

    #[test]
    fn degree_truncation_is_monotone(freqs in rational_freqs(), d1 in 0usize..4, extra in 0usize..3) {
        let small = harmonics_from_frequencies::<f64>(&freqs, DegreePolicy::MaxDegree(d1)).unwrap();
        let big = harmonics_from_frequencies::<f64>(&freqs, DegreePolicy::MaxDegree(d1 + extra)).unwrap();
        for w in small.values() {
            prop_assert!(big.contains(w));
        }
    }

    #[test]
    fn orthogonal_orbits_keep_their_norm(angles in prop::collection::vec(0.0..PI, 1..3), t0 in prop::collection::vec(-3.0..3.0f64, 6), steps in 1usize..60) {
        let blocks: Vec<DMatrix<f64>> = angles.iter().map(|&t| rot(t)).collect();
        let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
        let s = imsynth::numkit::linalg::block_diag(&refs);
        let e = validate_exosystem(s).unwrap();
        let mut th = DVector::from_column_slice(&t0[..e.dim()]);
        let n0 = th.norm();
        for _ in 0..steps {
            th = step_exosystem(&e, &th).unwrap();
        }
        prop_assert!((th.norm() - n0).abs() < 1e-10 * (1.0 + n0));
    }
}
