//! Scalar abstraction shared by every numerical module.
//!
//! The linear algebra, plant construction, LMI assembly and the interior-point
//! engine are written once over [`Scalar`]; `f64` is the working precision of
//! the pipeline and `f32` is supported for the structural pieces.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{Complex, RealField};
use num_traits::ToPrimitive;

/// Real field usable throughout the crate.
pub trait Scalar: RealField + Copy + ToPrimitive + Display + LowerExp + Debug + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Lossy conversion to `f64` (for reporting and serialization).
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Unit-roundoff of the type.
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl<T> Scalar for T where T: RealField + Copy + ToPrimitive + Display + LowerExp + Debug + Send + Sync + 'static {}

/// Complex number over a [`Scalar`], carried as an explicit real/imaginary pair.
pub type Cplx<T> = Complex<T>;

/// `e^{j angle}`.
pub fn unit_phasor<T: Scalar>(angle: T) -> Cplx<T> {
    Complex::new(angle.cos(), angle.sin())
}

/// Shorthand for `T::lit`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::lit(x)
}

/// Modulus of a complex number.
#[inline]
pub fn cabs<T: Scalar>(z: Cplx<T>) -> T {
    z.re.hypot(z.im)
}
