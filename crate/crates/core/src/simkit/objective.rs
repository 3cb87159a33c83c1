//! Time-varying objectives, gradient oracles and optimizer tracking.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exo::Exosystem;
use crate::numkit::linalg::is_symmetric;
use crate::scalar::Scalar;

/// Newton iterations allowed when tracking the logistic optimizer.
pub const NEWTON_MAX_ITER: usize = 100;
/// Gradient tolerance of the optimizer oracle.
pub const NEWTON_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum ObjectiveKind<T: Scalar> {
    /// `f(z, theta) = z^T Q z + theta^T z`.
    Quadratic { q: DMatrix<T> },
    /// `f(z, theta) = (z - theta_1)^2 / 2 + a log(1 + e^{b z})`, scalar `z`.
    Logistic { a: T, b: T },
}

#[derive(Clone, Debug)]
pub struct TimeVaryingObjective<T: Scalar> {
    pub kind: ObjectiveKind<T>,
    pub exo: Exosystem<T>,
    pub theta0: DVector<T>,
    /// Strong convexity and smoothness constants.
    pub mu: T,
    pub l: T,
}

impl<T: Scalar> TimeVaryingObjective<T> {
    pub fn quadratic(q: DMatrix<T>, exo: Exosystem<T>, theta0: DVector<T>) -> Result<Self> {
        let d = q.nrows();
        if q.ncols() != d || !is_symmetric(&q) {
            return Err(Error::Domain("Q must be square and symmetric".into()));
        }
        if exo.dim() != d || theta0.len() != d {
            return Err(Error::Dimension(format!(
                "quadratic objective of dimension {d} needs a parameter of the same dimension (exosystem {}, theta0 {})",
                exo.dim(),
                theta0.len()
            )));
        }
        let ev = q.clone().symmetric_eigenvalues();
        let (lo, hi) = (ev.min() * T::lit(2.0), ev.max() * T::lit(2.0));
        if !(lo > T::zero()) {
            return Err(Error::Domain("Q must be positive definite".into()));
        }
        Ok(Self { kind: ObjectiveKind::Quadratic { q }, exo, theta0, mu: lo, l: hi })
    }

    /// Logistic-regularized scalar objective; `mu = 1`, `L = 1 + a b^2 / 4`.
    pub fn logistic(a: T, b: T, exo: Exosystem<T>, theta0: DVector<T>) -> Result<Self> {
        if !(a >= T::zero()) {
            return Err(Error::Domain(format!("a must be nonnegative, got {a}")));
        }
        if exo.dim() != theta0.len() || theta0.is_empty() {
            return Err(Error::Dimension("theta0 must match the exosystem dimension".into()));
        }
        let l = T::one() + a * b * b / T::lit(4.0);
        Ok(Self { kind: ObjectiveKind::Logistic { a, b }, exo, theta0, mu: T::one(), l })
    }

    /// Dimension of the decision variable.
    pub fn dim(&self) -> usize {
        match &self.kind {
            ObjectiveKind::Quadratic { q } => q.nrows(),
            ObjectiveKind::Logistic { .. } => 1,
        }
    }

    pub fn value(&self, z: &DVector<T>, theta: &DVector<T>) -> T {
        match &self.kind {
            ObjectiveKind::Quadratic { q } => (z.transpose() * q * z)[(0, 0)] + theta.dot(z),
            ObjectiveKind::Logistic { a, b } => {
                let r = z[0] - theta[0];
                r * r / T::lit(2.0) + *a * softplus(*b * z[0])
            }
        }
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-x})` without overflow.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn gradient<T: Scalar>(obj: &TimeVaryingObjective<T>, z: &DVector<T>, theta: &DVector<T>) -> Result<DVector<T>> {
    if z.len() != obj.dim() {
        return Err(Error::Dimension(format!("point has length {}, objective dimension is {}", z.len(), obj.dim())));
    }
    if theta.len() != obj.exo.dim() {
        return Err(Error::Dimension(format!("parameter has length {}, expected {}", theta.len(), obj.exo.dim())));
    }
    Ok(match &obj.kind {
        ObjectiveKind::Quadratic { q } => q * z * T::lit(2.0) + theta,
        ObjectiveKind::Logistic { a, b } => DVector::from_element(1, z[0] - theta[0] + *a * *b * sigmoid(*b * z[0])),
    })
}

/// Minimizer of `f(., theta)`. `warm` seeds the Newton iteration.
pub fn track_optimizer<T: Scalar>(obj: &TimeVaryingObjective<T>, theta: &DVector<T>, warm: Option<&DVector<T>>) -> Result<DVector<T>> {
    match &obj.kind {
        ObjectiveKind::Quadratic { q } => {
            q.clone().cholesky().map(|c| c.solve(theta) * T::lit(-0.5)).ok_or_else(|| Error::Oracle("Q is not positive definite".into()))
        }
        ObjectiveKind::Logistic { a, b } => {
            let (a, b) = (*a, *b);
            let g = |z: T| z - theta[0] + a * b * sigmoid(b * z);
            let h = |z: T| {
                let s = sigmoid(b * z);
                T::one() + a * b * b * s * (T::one() - s)
            };
            // the logistic term lies between 0 and a b, which brackets the root
            let ab = a * b;
            let (mut lo, mut hi) = (theta[0] - ab.max(T::zero()), theta[0] - ab.min(T::zero()));
            let mut z = warm.map(|w| w[0]).unwrap_or(theta[0]);
            if !(z >= lo && z <= hi) {
                z = (lo + hi) / T::lit(2.0);
            }
            for _ in 0..NEWTON_MAX_ITER {
                let gz = g(z);
                if gz.abs() <= T::lit(NEWTON_TOL) {
                    return Ok(DVector::from_element(1, z));
                }
                if gz > T::zero() {
                    hi = z;
                } else {
                    lo = z;
                }
                let mut next = z - gz / h(z);
                // safeguard: bisect when Newton leaves the bracket
                if !(next > lo && next < hi) {
                    next = (lo + hi) / T::lit(2.0);
                }
                z = next;
            }
            if g(z).abs() <= T::lit(NEWTON_TOL) * T::lit(10.0) {
                return Ok(DVector::from_element(1, z));
            }
            Err(Error::Oracle(format!("Newton did not converge in {NEWTON_MAX_ITER} iterations (|grad| = {:e})", g(z).abs())))
        }
    }
}
