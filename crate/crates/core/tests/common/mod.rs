//! Shared helpers for the integration tests.
#![allow(dead_code)]

use imsynth::exo::{harmonics_from_frequencies, parse_frequency, DegreePolicy, HarmonicSet};
use imsynth::plant::build_h;
use imsynth::transform::{assemble_transformed_plant, MultiplierParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn harmonics(freqs: &[&str], policy: DegreePolicy) -> HarmonicSet<f64> {
    let f: Vec<_> = freqs.iter().map(|s| parse_frequency(s).unwrap()).collect();
    harmonics_from_frequencies(&f, policy).unwrap()
}

pub fn closure(freqs: &[&str]) -> HarmonicSet<f64> {
    harmonics(freqs, DegreePolicy::closure())
}

/// Outcome of one randomized run of the filtered, weighted loop.
#[derive(Debug)]
pub struct PassivityRun {
    pub seed: u64,
    pub horizon: usize,
    /// `min_T sum_{k <= T} q_k r_k / scale_T`.
    pub worst: f64,
    pub quadratic: bool,
}

const PLANTS: &[&[&str]] = &[&["0"], &["0", "pi/3"], &["pi/2"], &["0", "pi"], &["2pi/5"]];

/// Samples a sector `[mu, L]`, a rate, an admissible multiplier, a gradient in
/// the sector (quadratic, or a clipped one for odd seeds when `allow_nonlinear`)
/// and a random controller, then simulates the transformed plant.
pub fn passivity_run(seed: u64, allow_nonlinear: bool) -> PassivityRun {
    passivity_run_shifted(seed, allow_nonlinear, 0.0)
}

/// As [`passivity_run`] with `lambda_0` moved by `shift`; a negative shift
/// leaves the admissible set.
pub fn passivity_run_shifted(seed: u64, allow_nonlinear: bool, shift: f64) -> PassivityRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant = build_h(&closure(PLANTS[rng.random_range(0..PLANTS.len())])).unwrap();
    let mu = rng.random_range(0.1..2.0);
    let l = mu + rng.random_range(0.1..50.0);
    let rho: f64 = rng.random_range(0.5..0.999);
    let ell = rng.random_range(1..=3usize);
    let mut lambda = vec![0.0; ell + 1];
    let mut need = 0.0;
    for (j, lj) in lambda.iter_mut().enumerate().skip(1) {
        *lj = -rng.random_range(0.0..1.0);
        need -= *lj / rho.powi(j as i32);
    }
    // sometimes exactly on the boundary of the admissible set
    lambda[0] = need + if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) };
    lambda[0] += shift;
    let params = MultiplierParams::new_with_slack(lambda, rho, 1e-12 + shift.abs() * 2.0).unwrap();
    let ph = assemble_transformed_plant(&plant, mu, l, rho, &params).unwrap();

    let quadratic = !(allow_nonlinear && seed % 2 == 1);
    let h = if rng.random_bool(0.2) {
        if rng.random_bool(0.5) {
            mu
        } else {
            l
        }
    } else {
        rng.random_range(mu..l)
    };
    let grad = |z: f64| if quadratic { h * z } else { mu * z + (l - mu) * z.clamp(-1.0, 1.0) };

    let horizon = rng.random_range(1..=200usize);
    let gain = rng.random_range(-1.0..1.0);
    let n = ph.a.nrows();
    let mut x = DVector::<f64>::zeros(n);
    for i in ell..n {
        x[i] = StandardNormal.sample(&mut rng);
    }
    let (mut sum, mut scale, mut worst) = (0.0f64, 0.0f64, f64::INFINITY);
    for k in 0..horizon {
        let y = (&ph.c_y * &x)[(0, 0)];
        let e: f64 = StandardNormal.sample(&mut rng);
        let u = gain * y + e;
        let wk = rho.powi(k as i32);
        // weighted gradient of the unweighted point
        let q = grad(wk * u) / wk - mu * u;
        let r = (&ph.c_z * &x)[(0, 0)] + ph.d_zw * q + ph.d_zu * u;
        x = &ph.a * &x + &ph.b_w * q + &ph.b_u * u;
        sum += q * r;
        scale += q * q + r * r;
        if scale > 0.0 {
            worst = worst.min(sum / scale);
        }
    }
    PassivityRun { seed, horizon, worst, quadratic }
}

pub fn mat(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, v)
}
