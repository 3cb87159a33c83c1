use std::fmt;

use nalgebra::{Complex, DMatrix};

use super::linalg::eig;
use crate::error::{Error, Result};
use crate::scalar::{cabs, Cplx, Scalar};

/// Real polynomial, coefficients in ascending degree order.
///
/// Trailing zero coefficients are trimmed on construction, so the leading
/// coefficient is nonzero unless the polynomial is identically zero (stored
/// as an empty coefficient list).
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<T: Scalar> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| *c == T::zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// `z^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![T::zero(); k + 1];
        c[k] = T::one();
        Self { coeffs: c }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> T {
        self.coeffs.last().copied().unwrap_or_else(T::zero)
    }

    pub fn eval(&self, z: Cplx<T>) -> Cplx<T> {
        self.coeffs.iter().rev().fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * z + Complex::new(c, T::zero()))
    }

    pub fn eval_real(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Self, i: usize| p.coeffs.get(i).copied().unwrap_or_else(T::zero);
        Self::new((0..n).map(|i| get(self, i) + get(other, i)).collect())
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Roots via the eigenvalues of the companion matrix.
    pub fn roots(&self) -> Result<Vec<Cplx<T>>> {
        let deg = self.degree().ok_or_else(|| Error::Domain("roots of the zero polynomial are undefined".into()))?;
        if deg == 0 {
            return Ok(Vec::new());
        }
        let lead = self.leading();
        let mut comp = DMatrix::<T>::zeros(deg, deg);
        for i in 1..deg {
            comp[(i, i - 1)] = T::one();
        }
        for i in 0..deg {
            comp[(i, deg - 1)] = -self.coeffs[i] / lead;
        }
        eig(&comp)
    }

    /// Monic real polynomial `prod (z - r)` over a conjugation-closed root
    /// multiset.
    ///
    /// Conjugate pairs are combined into real quadratics
    /// `z^2 - 2 Re(r) z + |r|^2` before multiplying, so the result is real by
    /// construction.
    pub fn from_roots(roots: &[Cplx<T>]) -> Result<Self> {
        let tol = T::lit(1e-9);
        let mut pending: Vec<Cplx<T>> = roots.to_vec();
        let mut out = Self::constant(T::one());
        while let Some(r) = pending.pop() {
            let scale = T::one().max(cabs(r));
            if r.im.abs() <= tol * scale {
                out = out.mul(&Self::new(vec![-r.re, T::one()]));
                continue;
            }
            let partner = pending
                .iter()
                .enumerate()
                .filter(|(_, s)| cabs(**s - r.conj()) <= tol * scale)
                .min_by(|a, b| cabs(*a.1 - r.conj()).partial_cmp(&cabs(*b.1 - r.conj())).unwrap())
                .map(|(i, _)| i)
                .ok_or_else(|| {
                    Error::Domain(format!("root multiset is not closed under conjugation: {} + {}j has no partner", r.re, r.im))
                })?;
            let s = pending.swap_remove(partner);
            let re = (r.re + s.re) * T::lit(0.5);
            let im = (r.im.abs() + s.im.abs()) * T::lit(0.5);
            out = out.mul(&Self::new(vec![re * re + im * im, -(re + re), T::one()]));
        }
        Ok(out)
    }
}

impl<T: Scalar> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == T::zero() {
                continue;
            }
            let sign = if c < T::zero() { "-" } else { "+" };
            let mag = c.abs();
            if first {
                if c < T::zero() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let show_coeff = k == 0 || mag != T::one();
            match (show_coeff, k) {
                (true, 0) => write!(f, "{mag}")?,
                (true, 1) => write!(f, "{mag}·z")?,
                (true, _) => write!(f, "{mag}·z^{k}")?,
                (false, 1) => write!(f, "z")?,
                (false, _) => write!(f, "z^{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::unit_phasor;
    use std::f64::consts::PI;

    fn sixth_roots() -> Vec<Cplx<f64>> {
        (0..6).map(|k| unit_phasor(PI * k as f64 / 3.0)).collect()
    }

    #[test]
    fn single_root() {
        let p = Polynomial::from_roots(&[Complex::new(1.0, 0.0)]).unwrap();
        assert_eq!(p.coeffs(), &[-1.0, 1.0]);
    }

    #[test]
    fn conjugate_pair() {
        let p = Polynomial::from_roots(&[Complex::new(0.0, 1.0), Complex::new(0.0, -1.0)]).unwrap();
        assert_eq!(p.coeffs(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn sixth_roots_expand_to_z6_minus_1() {
        // independent expansion: multiply the six linear factors in complex arithmetic
        let mut brute = vec![Complex::new(1.0, 0.0)];
        for r in sixth_roots() {
            let mut next = vec![Complex::new(0.0, 0.0); brute.len() + 1];
            for (i, c) in brute.iter().enumerate() {
                next[i + 1] += *c;
                next[i] -= *c * r;
            }
            brute = next;
        }
        let p = Polynomial::from_roots(&sixth_roots()).unwrap();
        assert_eq!(p.coeffs().len(), 7);
        for (a, b) in p.coeffs().iter().zip(&brute) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
        let expected = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        for (a, b) in p.coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_conjugate_closed_is_domain_error() {
        let err = Polynomial::from_roots(&[Complex::new(0.0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn roots_of_z6_minus_1() {
        let p = Polynomial::new(vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), 6);
        for expected in sixth_roots() {
            let best = roots.iter().map(|r| (r - expected).norm()).fold(f64::MAX, f64::min);
            assert!(best < 1e-9, "missing root {expected}");
        }
    }

    #[test]
    fn display() {
        let p = Polynomial::new(vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.to_string(), "z^6 - 1");
    }

    #[test]
    fn generic_over_f32() {
        let p = Polynomial::<f32>::from_roots(&[Complex::new(2.0f32, 0.0), Complex::new(-1.0, 0.0)]).unwrap();
        assert_eq!(p.coeffs(), &[-2.0f32, -1.0, 1.0]);
    }
}
