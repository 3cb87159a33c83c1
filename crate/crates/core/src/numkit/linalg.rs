//! Dense real/complex helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Scalar};

pub(crate) fn require_square<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m.nrows())
}

pub fn all_finite<T: Scalar>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Largest absolute entry (0 for an empty matrix).
pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// All eigenvalues of a real square matrix, with multiplicity.
///
/// Computed from the real Schur form, so complex eigenvalues come in exact
/// conjugate pairs.
pub fn eig<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<Cplx<T>>> {
    let n = require_square(m, "eigenvalue input")?;
    if !all_finite(m) {
        return Err(Error::Numerical("eigenvalue input has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // The unshifted QR iteration can stagnate on orthogonal inputs such as
    // cyclic permutations; a real diagonal shift breaks the symmetry.
    let scale = T::one().max(max_abs(m));
    for shift in [0.0, 0.1357, -0.2468, 0.3691, -0.0713] {
        let s = T::lit(shift) * scale;
        let shifted = m + DMatrix::<T>::identity(n, n) * s;
        if let Some(schur) = Schur::try_new(shifted, T::default_epsilon(), 2_000 * n.max(4)) {
            return Ok(schur.complex_eigenvalues().iter().map(|l| Complex::new(l.re - s, l.im)).collect());
        }
    }
    Err(Error::Numerical(format!("Schur iteration did not converge for a {n}x{n} matrix (max |entry| = {})", max_abs(m))))
}

/// Eigenvalues with unit-norm eigenvectors (null vector of `M - lambda I`).
pub fn eigenpairs<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<(Cplx<T>, DVector<Cplx<T>>)>> {
    let values = eig(m)?;
    let mc = to_complex(m);
    let n = m.nrows();
    values
        .into_iter()
        .map(|lambda| {
            let shifted = &mc - DMatrix::<Cplx<T>>::identity(n, n) * lambda;
            let v = smallest_right_singular_vector(&shifted)?;
            Ok((lambda, v))
        })
        .collect()
}

fn smallest_right_singular_vector<T: Scalar>(m: &DMatrix<Cplx<T>>) -> Result<DVector<Cplx<T>>> {
    let n = m.ncols();
    let padded = pad_rows(m, n);
    let svd =
        padded.try_svd(false, true, T::default_epsilon(), 0).ok_or_else(|| Error::Numerical("complex SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("requested V");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, T::max_value().unwrap()), |(bi, bv), (i, &s)| if s < bv { (i, s) } else { (bi, bv) });
    Ok(DVector::from_iterator(n, v_t.row(idx).iter().map(|z| z.conj())))
}

fn pad_rows<S: nalgebra::Scalar + num_traits::Zero>(m: &DMatrix<S>, min_rows: usize) -> DMatrix<S> {
    if m.nrows() >= min_rows {
        return m.clone();
    }
    let mut out = DMatrix::<S>::zeros(min_rows, m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

pub fn to_complex<T: Scalar>(m: &DMatrix<T>) -> DMatrix<Cplx<T>> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// Singular values in descending order.
pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<T>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd = m.clone().try_svd(false, false, T::default_epsilon(), 0).ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let mut s: Vec<T> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(s)
}

pub fn complex_singular_values<T: Scalar>(m: &DMatrix<Cplx<T>>) -> Result<Vec<T>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd =
        m.clone().try_svd(false, false, T::default_epsilon(), 0).ok_or_else(|| Error::Numerical("complex SVD did not converge".into()))?;
    let mut s: Vec<T> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(s)
}

/// Orthonormal basis of `ker(M)`; singular values below `rel_tol * sigma_max`
/// count as zero.
pub fn kernel_basis<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> Result<DMatrix<T>> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let padded = pad_rows(m, n);
    let svd = padded
        .try_svd(false, true, T::default_epsilon(), 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge in kernel computation".into()))?;
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().fold(T::zero(), |a, &s| a.max(s));
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| smax == T::zero() || svd.singular_values[i] <= rel_tol * smax).collect();
    let mut basis = DMatrix::<T>::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    Ok(basis)
}

/// Orthonormal basis of `range(M)` with the same rank rule as [`kernel_basis`],
/// together with the retained singular values.
pub fn range_basis<T: Scalar>(m: &DMatrix<T>, abs_tol: T) -> Result<(DMatrix<T>, Vec<T>)> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok((DMatrix::zeros(m.nrows(), 0), Vec::new()));
    }
    let svd = m
        .clone()
        .try_svd(true, false, T::default_epsilon(), 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge in range computation".into()))?;
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let keep: Vec<usize> = order.into_iter().filter(|&i| svd.singular_values[i] > abs_tol).collect();
    let mut basis = DMatrix::<T>::zeros(m.nrows(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    let sv = keep.iter().map(|&i| svd.singular_values[i]).collect();
    Ok((basis, sv))
}

pub fn sym<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// `|M - M^T|_max <= 1e-12 (1 + |M|_max)`.
pub fn is_symmetric<T: Scalar>(m: &DMatrix<T>) -> bool {
    m.nrows() == m.ncols() && max_abs(&(m - m.transpose())) <= T::lit(1e-12) * (T::one() + max_abs(m))
}

pub fn min_sym_eig<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::max_value().unwrap();
    }
    SymmetricEigen::new(sym(m)).eigenvalues.iter().fold(T::max_value().unwrap(), |a, &x| a.min(x))
}

/// Factor `F` with `F F^T = M` for a symmetric positive semidefinite `M`
/// (negative eigenvalues are clipped to zero).
pub fn psd_factor<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = SymmetricEigen::new(sym(m));
    let mut f = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(T::zero()).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    f
}

pub fn cond<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    let s = singular_values(m)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() => Ok(hi / lo),
        (Some(_), Some(_)) => Ok(T::max_value().unwrap()),
        _ => Ok(T::one()),
    }
}

pub fn kron<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

fn vec_of<T: Scalar>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

/// Solves `A X + X B = C` through the Kronecker form (intended for the small
/// systems of this crate).
pub fn solve_sylvester<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = require_square(a, "Sylvester A")?;
    let m = require_square(b, "Sylvester B")?;
    if c.nrows() != n || c.ncols() != m {
        return Err(Error::Dimension(format!("Sylvester right-hand side must be {n}x{m}, got {}x{}", c.nrows(), c.ncols())));
    }
    if n == 0 || m == 0 {
        return Ok(DMatrix::zeros(n, m));
    }
    let op = kron(&DMatrix::identity(m, m), a) + kron(&b.transpose(), &DMatrix::identity(n, n));
    let x =
        op.lu().solve(&vec_of(c)).ok_or_else(|| Error::Numerical("Sylvester operator is singular (common spectrum of A and -B)".into()))?;
    Ok(DMatrix::from_column_slice(n, m, x.as_slice()))
}

/// Solves the Stein (discrete Lyapunov) equation `X - A X A^T = Q`.
pub fn solve_stein<T: Scalar>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = require_square(a, "Stein A")?;
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension("Stein right-hand side must match A".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let op = DMatrix::<T>::identity(n * n, n * n) - kron(a, a);
    let x = op.lu().solve(&vec_of(q)).ok_or_else(|| Error::Numerical("Stein operator is singular (reciprocal eigenvalue pair)".into()))?;
    Ok(sym(&DMatrix::from_column_slice(n, n, x.as_slice())))
}

pub fn hcat<T: Scalar>(parts: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = parts.iter().map(|p| p.nrows()).max().unwrap_or(0);
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for p in parts {
        debug_assert!(p.nrows() == rows || p.ncols() == 0, "hcat row mismatch");
        out.view_mut((0, c0), (p.nrows(), p.ncols())).copy_from(*p);
        c0 += p.ncols();
    }
    out
}

pub fn vcat<T: Scalar>(parts: &[&DMatrix<T>]) -> DMatrix<T> {
    let cols = parts.iter().map(|p| p.ncols()).max().unwrap_or(0);
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for p in parts {
        debug_assert!(p.ncols() == cols || p.nrows() == 0, "vcat column mismatch");
        out.view_mut((r0, 0), (p.nrows(), p.ncols())).copy_from(*p);
        r0 += p.nrows();
    }
    out
}

pub fn block_diag<T: Scalar>(parts: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for p in parts {
        out.view_mut((r0, c0), (p.nrows(), p.ncols())).copy_from(*p);
        r0 += p.nrows();
        c0 += p.ncols();
    }
    out
}

/// Assembles a block matrix from rows of blocks; every row must have equal
/// block heights and every column equal block widths.
pub fn blocks<T: Scalar>(rows: &[&[&DMatrix<T>]]) -> DMatrix<T> {
    let row_mats: Vec<DMatrix<T>> = rows.iter().map(|r| hcat(r)).collect();
    let refs: Vec<&DMatrix<T>> = row_mats.iter().collect();
    vcat(&refs)
}

/// Complex solve `(z I - A) X = B`.
pub fn resolvent_apply<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, z: Cplx<T>) -> Option<DMatrix<Cplx<T>>> {
    let n = a.nrows();
    let m = DMatrix::<Cplx<T>>::identity(n, n) * z - to_complex(a);
    m.lu().solve(&to_complex(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn rotation(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn rotation_spectrum() {
        let mut ev = eig(&rotation(PI / 3.0)).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert_relative_eq!(ev[0].re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(ev[0].im, -(3f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1].im, 3f64.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_spectrum() {
        let ev = eig(&DMatrix::<f64>::identity(3, 3)).unwrap();
        assert_eq!(ev.len(), 3);
        for z in ev {
            assert_relative_eq!(z.re, 1.0, epsilon = 1e-14);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn non_square_is_dimension_error() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(eig(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn eigenpair_residuals() {
        let m = DMatrix::from_row_slice(3, 3, &[0.2, 1.0, -0.3, 0.0, 0.5, 2.0, 1.0, -1.0, 0.1]);
        let scale = m.norm();
        for (lambda, v) in eigenpairs(&m).unwrap() {
            let r = to_complex(&m) * &v - &v * lambda;
            assert!(r.norm() <= 1e-8 * scale, "residual {}", r.norm());
        }
    }

    #[test]
    fn kernel_of_row() {
        let row = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]);
        let k = kernel_basis(&row, 1e-10).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!((&row * &k).norm() < 1e-14);
        assert_relative_eq!((k.transpose() * &k - DMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sylvester_and_stein() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, -0.3]);
        let b = DMatrix::from_row_slice(1, 1, &[2.0]);
        let c = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!((&a * &x + &x * &b - &c).norm() < 1e-12);

        let q = DMatrix::identity(2, 2);
        let p = solve_stein(&a, &q).unwrap();
        assert!((&p - &a * &p * a.transpose() - &q).norm() < 1e-12);
    }
}
