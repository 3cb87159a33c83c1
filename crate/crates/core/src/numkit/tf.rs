use std::fmt;

use nalgebra::DMatrix;

use super::poly::Polynomial;
use super::ss::StateSpace;
use crate::error::{Error, Result};
use crate::scalar::{Cplx, Scalar};

/// SISO rational transfer function `num(z) / den(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferFunction<T: Scalar> {
    num: Polynomial<T>,
    den: Polynomial<T>,
}

impl<T: Scalar> TransferFunction<T> {
    pub fn new(num: Polynomial<T>, den: Polynomial<T>) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Domain("transfer function denominator is identically zero".into()));
        }
        Ok(Self { num, den })
    }

    pub fn gain(k: T) -> Self {
        Self { num: Polynomial::constant(k), den: Polynomial::constant(T::one()) }
    }

    pub fn num(&self) -> &Polynomial<T> {
        &self.num
    }

    pub fn den(&self) -> &Polynomial<T> {
        &self.den
    }

    pub fn eval(&self, z: Cplx<T>) -> Cplx<T> {
        self.num.eval(z) / self.den.eval(z)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { num: self.num.mul(&other.num), den: self.den.mul(&other.den) }
    }

    pub fn is_proper(&self) -> bool {
        self.num.degree().unwrap_or(0) <= self.den.degree().unwrap_or(0)
    }

    pub fn is_strictly_proper(&self) -> bool {
        match self.num.degree() {
            None => true,
            Some(d) => d < self.den.degree().unwrap_or(0),
        }
    }

    /// Controllable canonical realization: companion `A` of the monic
    /// denominator, `B = e_n`, `C` the remainder coefficients.
    pub fn to_state_space(&self) -> Result<StateSpace<T>> {
        if !self.is_proper() {
            return Err(Error::Domain("improper transfer function has no state-space realization".into()));
        }
        let n = self.den.degree().unwrap_or(0);
        let lead = self.den.leading();
        let den: Vec<T> = self.den.coeffs().iter().map(|&c| c / lead).collect();
        let mut num: Vec<T> = self.num.coeffs().iter().map(|&c| c / lead).collect();
        num.resize(n + 1, T::zero());
        let d = num[n];
        let rem: Vec<T> = (0..n).map(|i| num[i] - d * den[i]).collect();

        let mut a = DMatrix::<T>::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = T::one();
        }
        for j in 0..n {
            a[(n - 1, j)] = -den[j];
        }
        let mut b = DMatrix::<T>::zeros(n, 1);
        if n > 0 {
            b[(n - 1, 0)] = T::one();
        }
        let c = DMatrix::from_row_slice(1, n, &rem);
        StateSpace::new(a, b, c, DMatrix::from_element(1, 1, d))
    }
}

impl<T: Scalar> fmt::Display for TransferFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}
