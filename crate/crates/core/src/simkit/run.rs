//! Running an algorithm against a time-varying objective.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::objective::{gradient, track_optimizer, TimeVaryingObjective};
use crate::error::{Error, Result};
use crate::plant::Algorithm;
use crate::scalar::Scalar;

/// Abort threshold on the state norm.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Floor of the relative-error denominator.
pub const RELATIVE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord<T: Scalar> {
    pub k: usize,
    pub z: Vec<T>,
    pub w: Vec<T>,
    pub grad_norm: T,
    pub z_star: Vec<T>,
    pub tracking_error: T,
    pub relative_error: T,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Trace<T: Scalar> {
    pub records: Vec<TraceRecord<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn grad_norms(&self) -> Vec<T> {
        self.records.iter().map(|r| r.grad_norm).collect()
    }

    pub fn relative_errors(&self) -> Vec<T> {
        self.records.iter().map(|r| r.relative_error).collect()
    }
}

/// Runs `x_{k+1} = (A ⊗ I) x_k + (B ⊗ I) w_k`, `z_k = (C ⊗ I) x_k`,
/// `w_k = grad f(z_k, theta_k)`, `theta_{k+1} = S theta_k`.
///
/// `x0` is ordered state-major: entry `i d + j` is coordinate `j` of state `i`.
pub fn run_method<T: Scalar>(alg: &Algorithm<T>, obj: &TimeVaryingObjective<T>, steps: usize, x0: Option<&DVector<T>>) -> Result<Trace<T>> {
    let n = alg.order();
    let d = obj.dim();
    // state stored as n x d
    let mut x = match x0 {
        Some(v) if v.len() != n * d => {
            return Err(Error::Dimension(format!("initial state has length {}, expected n d = {}", v.len(), n * d)))
        }
        Some(v) => DMatrix::from_row_slice(n, d, v.as_slice()),
        None => DMatrix::zeros(n, d),
    };
    let mut theta = obj.theta0.clone();
    let mut z_star: Option<DVector<T>> = None;
    let mut records = Vec::with_capacity(steps);
    for k in 0..steps {
        let z = (&alg.c * &x).transpose().column(0).into_owned();
        let w = gradient(obj, &z, &theta)?;
        let zs = track_optimizer(obj, &theta, z_star.as_ref())?;
        let err = (&z - &zs).norm();
        records.push(TraceRecord {
            k,
            grad_norm: w.norm(),
            tracking_error: err,
            relative_error: err / zs.norm().max(T::lit(RELATIVE_FLOOR)),
            z: z.iter().copied().collect(),
            w: w.iter().copied().collect(),
            z_star: zs.iter().copied().collect(),
        });
        x = &alg.a * &x + &alg.b * w.transpose();
        let size = x.amax();
        if !(size <= T::lit(DIVERGENCE_LIMIT)) {
            return Err(Error::Divergence(format!("state norm {size:e} exceeds {DIVERGENCE_LIMIT:e} at step {}", k + 1)));
        }
        theta = obj.exo.step(&theta)?;
        z_star = Some(zs);
    }
    Ok(Trace { records })
}

/// Mean relative error over the last `window` records.
pub fn asymptotic_relative_error<T: Scalar>(trace: &Trace<T>, window: usize) -> Result<T> {
    if window == 0 || trace.len() < window {
        return Err(Error::Domain(format!("trace of length {} is shorter than the window {window}", trace.len())));
    }
    let tail = &trace.records[trace.len() - window..];
    Ok(tail.iter().fold(T::zero(), |a, r| a + r.relative_error) / T::lit(window as f64))
}

/// Exponential envelope `c rho^k` fitted on the first records of a trace.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope<T: Scalar> {
    pub c: T,
    pub rho: T,
    pub fit_window: usize,
    /// Steps after the fit window where the gradient norm exceeds the envelope
    /// (values under the numerical floor are ignored).
    pub violations: Vec<usize>,
}

impl<T: Scalar> Envelope<T> {
    pub fn value(&self, k: usize) -> T {
        self.c * self.rho.powi(k as i32)
    }

    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `c = max_{k < window} |w_k| / rho^k`, then checks `|w_k| <= c rho^k` for
/// all later `k` down to `floor`.
pub fn fit_envelope<T: Scalar>(trace: &Trace<T>, rho: T, window: usize, floor: T) -> Envelope<T> {
    let g = trace.grad_norms();
    let c = g.iter().take(window).enumerate().fold(T::zero(), |a, (k, &v)| a.max(v / rho.powi(k as i32)));
    let env = Envelope { c, rho, fit_window: window, violations: Vec::new() };
    let violations = g
        .iter()
        .enumerate()
        .skip(window)
        .filter(|&(k, &v)| v > floor && v > env.value(k) * (T::one() + T::lit(1e-9)))
        .map(|(k, _)| k)
        .collect();
    Envelope { violations, ..env }
}
