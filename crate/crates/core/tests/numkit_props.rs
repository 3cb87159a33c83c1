use imsynth::numkit::{
    eig, minimal_realization, poly_from_roots, series_connect, test_points, tf_discrepancy, Polynomial, StateSpace, TransferFunction,
};
use imsynth::scalar::Cplx;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn siso(n: usize) -> impl Strategy<Value = StateSpace<f64>> {
    (
        prop::collection::vec(-1.0..1.0f64, n * n),
        prop::collection::vec(-1.0..1.0f64, n),
        prop::collection::vec(-1.0..1.0f64, n),
        -1.0..1.0f64,
    )
        .prop_map(move |(a, b, c, d)| {
            StateSpace::new(
                DMatrix::from_row_slice(n, n, &a) * 0.5,
                DMatrix::from_column_slice(n, 1, &b),
                DMatrix::from_row_slice(1, n, &c),
                DMatrix::from_element(1, 1, d),
            )
            .unwrap()
        })
}

fn tf(num: &[f64], den: &[f64]) -> StateSpace<f64> {
    TransferFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec())).unwrap().to_state_space().unwrap()
}

fn sorted(mut v: Vec<Cplx<f64>>) -> Vec<Cplx<f64>> {
    v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_is_associative(g1 in (1usize..4).prop_flat_map(siso), g2 in (1usize..4).prop_flat_map(siso), g3 in (1usize..4).prop_flat_map(siso)) {
        let left = series_connect(&series_connect(&g1, &g2).unwrap(), &g3).unwrap();
        let right = series_connect(&g1, &series_connect(&g2, &g3).unwrap()).unwrap();
        prop_assert!(tf_discrepancy(&left, &right, &test_points(16, 7)) < 1e-8);
    }

    #[test]
    fn reduction_is_idempotent(g in (1usize..5).prop_flat_map(siso), pad in 0usize..3) {
        // pad with unreachable modes so there is something to remove
        let n = g.order();
        let a = imsynth::numkit::linalg::block_diag(&[&g.a, &(DMatrix::identity(pad, pad) * 0.3)]);
        let b = imsynth::numkit::linalg::vcat(&[&g.b, &DMatrix::zeros(pad, 1)]);
        let c = imsynth::numkit::linalg::hcat(&[&g.c, &DMatrix::from_element(1, pad, 1.0)]);
        let padded = StateSpace::new(a, b, c, g.d.clone()).unwrap();
        let once = minimal_realization(&padded, 1e-7).unwrap();
        let twice = minimal_realization(&once, 1e-7).unwrap();
        prop_assert!(once.order() <= n);
        prop_assert_eq!(once.order(), twice.order());
        prop_assert!(tf_discrepancy(&padded, &once, &test_points(16, 3)) < 1e-6);
    }

    #[test]
    fn real_spectrum_is_conjugate_closed(n in 1usize..7, entries in prop::collection::vec(-2.0..2.0f64, 36)) {
        let m = DMatrix::from_row_slice(n, n, &entries[..n * n]);
        let ev = eig(&m).unwrap();
        prop_assert_eq!(ev.len(), n);
        for l in &ev {
            let best = ev.iter().map(|k| (k - l.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-8 * (1.0 + l.norm()), "no conjugate partner for {}", l);
        }
    }

    #[test]
    fn roots_round_trip(reals in prop::collection::vec(-1.5..1.5f64, 0..3), pairs in prop::collection::vec((-1.0..1.0f64, 0.1..1.0f64), 0..3)) {
        prop_assume!(!reals.is_empty() || !pairs.is_empty());
        let mut roots: Vec<Cplx<f64>> = reals.iter().map(|&r| Cplx::new(r, 0.0)).collect();
        for &(re, im) in &pairs {
            roots.push(Cplx::new(re, im));
            roots.push(Cplx::new(re, -im));
        }
        // well-separated roots only; clustered ones are ill-conditioned by nature
        for i in 0..roots.len() {
            for j in 0..i {
                prop_assume!((roots[i] - roots[j]).norm() > 0.05);
            }
        }
        let p = poly_from_roots(&roots).unwrap();
        let back = sorted(p.roots().unwrap());
        let want = sorted(roots);
        prop_assert_eq!(back.len(), want.len());
        for w in &want {
            let best = back.iter().map(|b| (b - w).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-7, "root {} missing", w);
        }
    }
}

#[test]
fn minimal_integrator_keeps_its_order() {
    let integ = tf(&[1.0], &[-1.0, 1.0]);
    assert_eq!(minimal_realization(&integ, 1e-7).unwrap().order(), 1);
}

#[test]
fn unreachable_padding_is_removed() {
    let g = tf(&[0.2, 1.0], &[0.06, -0.5, 1.0]);
    let a = imsynth::numkit::linalg::block_diag(&[&g.a, &DMatrix::from_element(1, 1, 0.7)]);
    let b = imsynth::numkit::linalg::vcat(&[&g.b, &DMatrix::zeros(1, 1)]);
    let c = imsynth::numkit::linalg::hcat(&[&g.c, &DMatrix::from_element(1, 1, 3.0)]);
    let padded = StateSpace::new(a, b, c, g.d.clone()).unwrap();
    let r = minimal_realization(&padded, 1e-7).unwrap();
    assert_eq!(r.order(), 2);
    assert!(tf_discrepancy(&g, &r, &test_points(30, 11)) < 1e-10);
}

#[test]
fn companion_of_z6_minus_1_has_sixth_roots() {
    let mut c = DMatrix::<f64>::zeros(6, 6);
    for i in 0..5 {
        c[(i + 1, i)] = 1.0;
    }
    c[(0, 5)] = 1.0;
    let ev = eig(&c).unwrap();
    let oracle = Polynomial::new(vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).roots().unwrap();
    for w in &oracle {
        assert!(ev.iter().any(|l| (l - w).norm() < 1e-9), "missing root {w}");
    }
    for l in &ev {
        assert!((l.powi(6) - Cplx::new(1.0, 0.0)).norm() < 1e-9);
    }
}
