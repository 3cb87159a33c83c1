//! Baseline methods and the experiment drivers.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::TimeVaryingObjective;
use super::run::{asymptotic_relative_error, run_method, Trace};
use crate::error::{Error, Result};
use crate::exo::{harmonics_from_frequencies, validate_exosystem, DegreePolicy, Frequency};
use crate::plant::Algorithm;
use crate::scalar::Scalar;
use crate::synth::{bisect_rate, certify_rate, complete_synthesis, RateQuery, SynthesisResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    GradientDescent,
    TripleMomentum,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::GradientDescent => "gradient_descent",
            Baseline::TripleMomentum => "triple_momentum",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optimal time-invariant rate `1 - sqrt(mu / L)`.
pub fn triple_momentum_rate<T: Scalar>(mu: T, l: T) -> T {
    T::one() - (mu / l).sqrt()
}

/// Gradient descent with `alpha = 2 / (L + mu)` or the triple momentum method.
pub fn baseline_method<T: Scalar>(name: Baseline, mu: T, l: T) -> Result<Algorithm<T>> {
    if !(mu > T::zero() && mu < l) {
        return Err(Error::Domain(format!("need 0 < mu < L, got mu = {mu}, L = {l}")));
    }
    let m = |r: usize, c: usize, v: &[T]| DMatrix::from_row_slice(r, c, v);
    match name {
        Baseline::GradientDescent => {
            let alpha = T::lit(2.0) / (l + mu);
            Algorithm::new(m(1, 1, &[T::one()]), m(1, 1, &[-alpha]), m(1, 1, &[T::one()]), mu, l)
        }
        Baseline::TripleMomentum => {
            let rho = triple_momentum_rate(mu, l);
            let two = T::lit(2.0);
            let alpha = (T::one() + rho) / l;
            let beta = rho * rho / (two - rho);
            let gamma = rho * rho / ((T::one() + rho) * (two - rho));
            Algorithm::new(
                m(2, 2, &[T::one() + beta, -beta, T::one(), T::zero()]),
                m(2, 1, &[-alpha, T::zero()]),
                m(1, 2, &[T::one() + gamma, -gamma]),
                mu,
                l,
            )
        }
    }
}

/// Block-diagonal rotations at `pi/7, 2pi/7, ...`, padded with `+1` to order `p`.
pub fn figure1_exosystem(p: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(p, p);
    let mut i = 0;
    let mut k = 1;
    while i + 2 <= p {
        let w = k as f64 * std::f64::consts::PI / 7.0;
        s[(i, i)] = w.cos();
        s[(i, i + 1)] = -w.sin();
        s[(i + 1, i)] = w.sin();
        s[(i + 1, i + 1)] = w.cos();
        i += 2;
        k += 1;
    }
    if i < p {
        s[(i, i)] = 1.0;
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Figure1Config {
    pub orders: Vec<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    pub steps: usize,
    pub window: usize,
    /// Spectrum range of `Q`; the Hessian `2Q` then lies in `[2 q_min, 2 q_max]`.
    pub q_min: f64,
    pub q_max: f64,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Self { orders: vec![1, 2, 4, 6], seeds: 10, base_seed: 0, steps: 2000, window: 100, q_min: 1.0, q_max: 50.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Figure1Row {
    pub p: usize,
    pub method: Baseline,
    pub mean_rel_error: f64,
    pub std: f64,
    pub seeds: usize,
}

/// Random quadratic instance of order `p`: `Q = Q_o diag(U[q_min, q_max]) Q_o^T`,
/// `theta_0 ~ N(0, I)`.
pub fn figure1_instance(p: usize, seed: u64, q_min: f64, q_max: f64) -> Result<TimeVaryingObjective<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qo = g.qr().q();
    let ev = DVector::from_fn(p, |_, _| rng.random_range(q_min..=q_max));
    let q = &qo * DMatrix::from_diagonal(&ev) * qo.transpose();
    let q = (&q + q.transpose()) * 0.5;
    let theta0 = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    TimeVaryingObjective::quadratic(q, validate_exosystem(figure1_exosystem(p))?, theta0)
}

/// Seed-averaged asymptotic relative error of both baselines for each order.
pub fn run_figure1(cfg: &Figure1Config) -> Result<Vec<Figure1Row>> {
    if cfg.orders.contains(&0) || cfg.seeds == 0 || cfg.steps < cfg.window || cfg.window == 0 {
        return Err(Error::Domain("orders must be >= 1, seeds >= 1 and steps >= window >= 1".into()));
    }
    let (mu, l) = (2.0 * cfg.q_min, 2.0 * cfg.q_max);
    let methods = [Baseline::GradientDescent, Baseline::TripleMomentum];
    let algs: Vec<Algorithm<f64>> = methods.iter().map(|&m| baseline_method(m, mu, l)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = cfg.orders.iter().flat_map(|&p| (0..cfg.seeds).map(move |s| (p, s))).collect();
    let errs: Vec<[f64; 2]> = jobs
        .par_iter()
        .map(|&(p, s)| {
            let obj = figure1_instance(p, cfg.base_seed + s as u64, cfg.q_min, cfg.q_max)?;
            let mut out = [0.0; 2];
            for (o, alg) in out.iter_mut().zip(&algs) {
                let tr = run_method(alg, &obj, cfg.steps, None)?;
                *o = asymptotic_relative_error(&tr, cfg.window)?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, &p) in cfg.orders.iter().enumerate() {
        let chunk = &errs[i * cfg.seeds..(i + 1) * cfg.seeds];
        for (m, &method) in methods.iter().enumerate() {
            let v: Vec<f64> = chunk.iter().map(|e| e[m]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            rows.push(Figure1Row { p, method, mean_rel_error: mean, std: var.sqrt(), seeds: cfg.seeds });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub mu: f64,
    pub l: f64,
    pub ell: usize,
    pub policy: DegreePolicy,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub tol: f64,
    /// Also reconstruct, export and re-certify each point.
    pub full: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { mu: 1.0, l: 10.0, ell: 1, policy: DegreePolicy::MaxDegree(1), rho_lo: 0.05, rho_hi: 0.9999, tol: 1e-3, full: false }
    }
}

/// `count` equispaced frequencies on `[0, pi]`, as exact multiples of pi.
pub fn theta_grid(count: usize) -> Vec<Frequency> {
    match count {
        0 => Vec::new(),
        1 => vec![Frequency::from_pi_multiple(num_rational::Ratio::from_integer(0))],
        _ => (0..count).map(|k| Frequency::from_pi_multiple(num_rational::Ratio::new(k as i64, (count - 1) as i64))).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub theta: Frequency,
    pub rho_star: Option<f64>,
    pub rho_tm: f64,
    pub n_harmonics: usize,
    pub status: String,
    /// Re-certified rate of the exported algorithm (full sweeps only).
    pub recertified: Option<f64>,
    pub result: Option<SynthesisResult<f64>>,
}

fn sweep_point(cfg: &SweepConfig, theta: &Frequency) -> SweepPoint {
    let rho_tm = triple_momentum_rate(cfg.mu, cfg.l);
    let mut pt =
        SweepPoint { theta: *theta, rho_star: None, rho_tm, n_harmonics: 0, status: String::new(), recertified: None, result: None };
    let h = match harmonics_from_frequencies::<f64>(&[*theta], cfg.policy) {
        Ok(h) => h,
        Err(e) => {
            pt.status = format!("harmonics_error: {e}");
            return pt;
        }
    };
    pt.n_harmonics = h.len();
    let q = RateQuery::new(cfg.mu, cfg.l, h.clone(), cfg.ell).with_bracket(cfg.rho_lo, cfg.rho_hi).with_tol(cfg.tol);
    let br = match bisect_rate(&q) {
        Ok(b) => b,
        Err(e) => {
            pt.status = format!("failed: {e}");
            return pt;
        }
    };
    pt.rho_star = Some(br.rho_star);
    pt.status = "ok".into();
    if cfg.full {
        match complete_synthesis(&q, br) {
            Ok(r) => {
                match certify_rate(&r.g, cfg.mu, cfg.l, cfg.ell, (cfg.rho_lo, cfg.rho_hi), cfg.tol, Some(&h.values())) {
                    Ok(c) => pt.recertified = Some(c.rho),
                    Err(e) => pt.status = format!("recertification_failed: {e}"),
                }
                pt.result = Some(r);
            }
            Err(e) => pt.status = format!("export_failed: {e}"),
        }
    }
    pt
}

/// Optimal rate per frequency (`{1, e^{±j theta}}` through the harmonic
/// policy). Points run concurrently; rows come back in input order.
pub fn run_rate_sweep(cfg: &SweepConfig, thetas: &[Frequency]) -> Result<Vec<SweepPoint>> {
    if !(cfg.mu > 0.0 && cfg.mu < cfg.l) {
        return Err(Error::Domain(format!("need 0 < mu < L, got mu = {}, L = {}", cfg.mu, cfg.l)));
    }
    if let Some(t) = thetas.iter().find(|t| !(t.radians() >= -1e-12 && t.radians() <= std::f64::consts::PI + 1e-12)) {
        return Err(Error::Domain(format!("frequency {t} outside [0, pi]")));
    }
    Ok(thetas.par_iter().map(|t| sweep_point(cfg, t)).collect())
}

fn csv_err(e: impl fmt::Display) -> Error {
    Error::Io(format!("csv: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

/// Trace CSV: `k, grad_norm, tracking_error, relative_error, envelope`.
pub fn trace_csv(trace: &Trace<f64>, envelope: Option<(f64, f64)>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "grad_norm", "tracking_error", "relative_error", "envelope"]).map_err(csv_err)?;
    for r in &trace.records {
        let env = envelope.map(|(c, rho)| format!("{:e}", c * rho.powi(r.k as i32))).unwrap_or_default();
        w.write_record([
            r.k.to_string(),
            format!("{:e}", r.grad_norm),
            format!("{:e}", r.tracking_error),
            format!("{:e}", r.relative_error),
            env,
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Sweep CSV: `theta, rho_star, rho_tm, n_harmonics, status`.
pub fn sweep_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta", "rho_star", "rho_tm", "n_harmonics", "status"]).map_err(csv_err)?;
    for p in points {
        w.write_record([
            format!("{:.10}", p.theta.radians()),
            p.rho_star.map(|r| format!("{r:.6}")).unwrap_or_default(),
            format!("{:.6}", p.rho_tm),
            p.n_harmonics.to_string(),
            p.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Figure-1 CSV: `p, method, mean_rel_error, std, seeds`.
pub fn figure1_csv(rows: &[Figure1Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p", "method", "mean_rel_error", "std", "seeds"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.method.name().to_string(),
            format!("{:e}", r.mean_rel_error),
            format!("{:e}", r.std),
            r.seeds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Order-3 exosystem `P diag(1, R(pi/3)) P^{-1}` with a non-orthogonal `P`,
/// so the constant and the `pi/3` rotation mix in the first coordinate.
pub fn logistic_exosystem() -> DMatrix<f64> {
    let (s, c) = (std::f64::consts::FRAC_PI_3).sin_cos();
    let d = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]);
    let p = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let p_inv = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    p * d * p_inv
}

/// Logistic instance driven by [`logistic_exosystem`] from `theta_0 = (1, 1, 0)`.
pub fn logistic_instance(a: f64, b: f64) -> Result<TimeVaryingObjective<f64>> {
    TimeVaryingObjective::logistic(a, b, validate_exosystem(logistic_exosystem())?, DVector::from_vec(vec![1.0, 1.0, 0.0]))
}
