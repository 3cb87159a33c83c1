//! Linear algebra, polynomials and LTI realizations.

pub mod linalg;
pub mod poly;
pub mod reduce;
pub mod ss;
pub mod tf;

pub use linalg::eig;
pub use poly::Polynomial;
pub use reduce::{minimal_realization, DEFAULT_REDUCTION_TOL};
pub use ss::{parallel, series_connect, test_points, tf_discrepancy, StateSpace};
pub use tf::TransferFunction;

/// `poly_from_roots`: monic real polynomial with the given conjugate-closed roots.
pub fn poly_from_roots<T: crate::scalar::Scalar>(roots: &[crate::scalar::Cplx<T>]) -> crate::error::Result<Polynomial<T>> {
    Polynomial::from_roots(roots)
}
