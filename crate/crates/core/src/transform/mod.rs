//! Exponential weighting, the Zames–Falb filter, the filtered weighted plant
//! and its feedback interconnections.
//!
//! Everything linear in the multiplier coefficients is also available as a
//! basis (one term per `lambda_j`) so the LMI layer can treat `lambda` as a
//! decision variable.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkit::linalg::{blocks, hcat, vcat};
use crate::numkit::StateSpace;
use crate::plant::PlantRealization;
use crate::scalar::Scalar;

/// `T_rho`-weighted realization `(A / rho, B / rho, C, D)`.
pub fn rho_weight<T: Scalar>(sys: &StateSpace<T>, rho: T) -> Result<StateSpace<T>> {
    if !(rho > T::zero()) {
        return Err(Error::Domain(format!("weighting rate must be positive, got {rho}")));
    }
    StateSpace::new(&sys.a / rho, &sys.b / rho, sys.c.clone(), sys.d.clone())
}

/// Zames–Falb coefficients `lambda_0..lambda_ell` in the admissible set for `rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierParams<T: Scalar> {
    lambda: Vec<T>,
    rho: T,
}

impl<T: Scalar> MultiplierParams<T> {
    pub fn new(lambda: Vec<T>, rho: T) -> Result<Self> {
        if lambda.len() < 2 {
            return Err(Error::Constraint(format!("at least one filter tap is required (ell >= 1), got {} coefficients", lambda.len())));
        }
        if !(rho > T::zero() && rho < T::one()) {
            return Err(Error::Domain(format!("rate must lie in (0, 1), got {rho}")));
        }
        check_admissible(&lambda, rho, T::zero())?;
        Ok(Self { lambda, rho })
    }

    /// Accepts coefficients that violate the admissible set by at most `slack`
    /// (solver round-off).
    pub fn new_with_slack(lambda: Vec<T>, rho: T, slack: T) -> Result<Self> {
        if lambda.len() < 2 {
            return Err(Error::Constraint("at least one filter tap is required".into()));
        }
        check_admissible(&lambda, rho, slack)?;
        Ok(Self { lambda, rho })
    }

    pub fn ell(&self) -> usize {
        self.lambda.len() - 1
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// `sum_j rho^{-j} lambda_j`.
    pub fn weighted_sum(&self) -> T {
        weighted_sum(&self.lambda, self.rho)
    }
}

fn weighted_sum<T: Scalar>(lambda: &[T], rho: T) -> T {
    lambda.iter().enumerate().fold(T::zero(), |acc, (j, &l)| acc + l / rho.powi(j as i32))
}

fn check_admissible<T: Scalar>(lambda: &[T], rho: T, slack: T) -> Result<()> {
    for (j, &l) in lambda.iter().enumerate().skip(1) {
        if l > slack {
            return Err(Error::Constraint(format!("lambda_{j} = {l} violates lambda_{j} <= 0")));
        }
    }
    let s = weighted_sum(lambda, rho);
    if s < -slack {
        return Err(Error::Constraint(format!("sum_j rho^-j lambda_j = {s} violates the constraint >= 0")));
    }
    Ok(())
}

/// Shift matrix with ones on the superdiagonal and `e_ell`.
pub fn filter_dynamics<T: Scalar>(ell: usize) -> (DMatrix<T>, DMatrix<T>) {
    let mut a = DMatrix::zeros(ell, ell);
    for i in 0..ell.saturating_sub(1) {
        a[(i, i + 1)] = T::one();
    }
    let mut b = DMatrix::zeros(ell, 1);
    if ell > 0 {
        b[(ell - 1, 0)] = T::one();
    }
    (a, b)
}

/// `C_f = (lambda_ell, ..., lambda_1)`.
pub fn filter_output_row<T: Scalar>(lambda: &[T]) -> DMatrix<T> {
    let ell = lambda.len() - 1;
    DMatrix::from_fn(1, ell, |_, i| lambda[ell - i])
}

/// Realization `(A_f, B_f, C_f, D_f)` of `psi(z) = lambda_0 + sum_j lambda_j z^{-j}`.
pub fn zf_filter<T: Scalar>(params: &MultiplierParams<T>) -> StateSpace<T> {
    let (a, b) = filter_dynamics(params.ell());
    StateSpace::new(a, b, filter_output_row(params.lambda()), DMatrix::from_element(1, 1, params.lambda()[0]))
        .expect("conformal by construction")
}

fn unit_lambda<T: Scalar>(ell: usize, j: usize) -> Vec<T> {
    let mut v = vec![T::zero(); ell + 1];
    v[j] = T::one();
    v
}

fn combine<T: Scalar>(basis: &[DMatrix<T>], lambda: &[T]) -> DMatrix<T> {
    let mut out = DMatrix::zeros(basis[0].nrows(), basis[0].ncols());
    for (m, &l) in basis.iter().zip(lambda) {
        out += m * l;
    }
    out
}

/// Filtered, `rho`-weighted plant. Inputs `(q, u)`, outputs `(r, y)`, state
/// `(x_f, x_p)`.
#[derive(Clone, Debug)]
pub struct TransformedPlant<T: Scalar> {
    pub a: DMatrix<T>,
    pub b_w: DMatrix<T>,
    pub b_u: DMatrix<T>,
    pub c_z: DMatrix<T>,
    pub d_zw: T,
    pub d_zu: T,
    pub c_y: DMatrix<T>,
    pub ell: usize,
    pub n_p: usize,
}

/// The transformed plant with the `lambda`-dependent output row kept as a
/// basis: `C_z = sum_j lambda_j c_z[j]`, and likewise for the feedthroughs.
#[derive(Clone, Debug)]
pub struct TransformedFamily<T: Scalar> {
    pub a: DMatrix<T>,
    pub b_w: DMatrix<T>,
    pub b_u: DMatrix<T>,
    pub c_y: DMatrix<T>,
    pub c_z: Vec<DMatrix<T>>,
    pub d_zw: Vec<T>,
    pub d_zu: Vec<T>,
    pub ell: usize,
    pub n_p: usize,
    pub mu: T,
    pub l: T,
    pub rho: T,
}

impl<T: Scalar> TransformedFamily<T> {
    pub fn at(&self, lambda: &[T]) -> Result<TransformedPlant<T>> {
        if lambda.len() != self.ell + 1 {
            return Err(Error::Dimension(format!("expected {} multiplier coefficients, got {}", self.ell + 1, lambda.len())));
        }
        let dot = |v: &[T]| v.iter().zip(lambda).fold(T::zero(), |a, (x, l)| a + *x * *l);
        Ok(TransformedPlant {
            a: self.a.clone(),
            b_w: self.b_w.clone(),
            b_u: self.b_u.clone(),
            c_z: combine(&self.c_z, lambda),
            d_zw: dot(&self.d_zw),
            d_zu: dot(&self.d_zu),
            c_y: self.c_y.clone(),
            ell: self.ell,
            n_p: self.n_p,
        })
    }
}

fn check_sector<T: Scalar>(mu: T, l: T, rho: T) -> Result<()> {
    if !(mu > T::zero() && mu < l) {
        return Err(Error::Domain(format!("need 0 < mu < L, got mu = {mu}, L = {l}")));
    }
    if !(rho > T::zero() && rho < T::one()) {
        return Err(Error::Domain(format!("rate must lie in (0, 1), got {rho}")));
    }
    Ok(())
}

pub fn transformed_family<T: Scalar>(plant: &PlantRealization<T>, mu: T, l: T, rho: T, ell: usize) -> Result<TransformedFamily<T>> {
    check_sector(mu, l, rho)?;
    if ell == 0 {
        return Err(Error::Domain("ell must be at least 1".into()));
    }
    let n_p = plant.n_p();
    let (a_f, b_f) = filter_dynamics::<T>(ell);
    let a = crate::numkit::linalg::block_diag(&[&a_f, &(&plant.a_p / rho)]);
    let b_w = vcat(&[&(-&b_f), &(&plant.b_p / rho)]);
    let b_u = vcat(&[&(&b_f * (l - mu)), &(&plant.b_p * (mu / rho))]);
    let c_y = hcat(&[&DMatrix::zeros(1, ell), &plant.c_p]);
    let mut c_z = Vec::with_capacity(ell + 1);
    let mut d_zw = Vec::with_capacity(ell + 1);
    let mut d_zu = Vec::with_capacity(ell + 1);
    for j in 0..=ell {
        let e = unit_lambda::<T>(ell, j);
        c_z.push(hcat(&[&filter_output_row(&e), &DMatrix::zeros(1, n_p)]));
        d_zw.push(-e[0]);
        d_zu.push((l - mu) * e[0]);
    }
    Ok(TransformedFamily { a, b_w, b_u, c_y, c_z, d_zw, d_zu, ell, n_p, mu, l, rho })
}

pub fn assemble_transformed_plant<T: Scalar>(
    plant: &PlantRealization<T>,
    mu: T,
    l: T,
    rho: T,
    params: &MultiplierParams<T>,
) -> Result<TransformedPlant<T>> {
    transformed_family(plant, mu, l, rho, params.ell())?.at(params.lambda())
}

/// Realization from `q` to `r` with `r`-row and feedthrough linear in `lambda`.
#[derive(Clone, Debug)]
pub struct ClosedLoop<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c_basis: Vec<DMatrix<T>>,
    pub d_basis: Vec<T>,
}

impl<T: Scalar> ClosedLoop<T> {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn ell(&self) -> usize {
        self.c_basis.len() - 1
    }

    pub fn c(&self, lambda: &[T]) -> DMatrix<T> {
        combine(&self.c_basis, lambda)
    }

    pub fn d(&self, lambda: &[T]) -> T {
        self.d_basis.iter().zip(lambda).fold(T::zero(), |a, (x, l)| a + *x * *l)
    }

    pub fn state_space(&self, lambda: &[T]) -> StateSpace<T> {
        StateSpace::new(self.a.clone(), self.b.clone(), self.c(lambda), DMatrix::from_element(1, 1, self.d(lambda)))
            .expect("conformal by construction")
    }
}

/// Lower LFT of the transformed plant with a controller given in weighted
/// coordinates, `u = K y`.
pub fn close_loop<T: Scalar>(fam: &TransformedFamily<T>, k: &StateSpace<T>) -> Result<ClosedLoop<T>> {
    if !k.is_siso() {
        return Err(Error::Dimension("controller must be SISO".into()));
    }
    let n = fam.a.nrows();
    let nk = k.order();
    let dk = k.d[(0, 0)];
    let a = blocks(&[&[&(&fam.a + &fam.b_u * &fam.c_y * dk), &(&fam.b_u * &k.c)], &[&(&k.b * &fam.c_y), &k.a]]);
    let b = vcat(&[&fam.b_w, &DMatrix::zeros(nk, 1)]);
    let c_basis = (0..=fam.ell).map(|j| hcat(&[&(&fam.c_z[j] + &fam.c_y * (fam.d_zu[j] * dk)), &(&k.c * fam.d_zu[j])])).collect();
    debug_assert_eq!(a.nrows(), n + nk);
    Ok(ClosedLoop { a, b, c_basis, d_basis: fam.d_zw.clone() })
}

/// Closed loop for a given algorithm `(A, B, C)` with the sector loop
/// transformation applied directly (no internal-model factorization). State
/// `(x_f, x)`.
pub fn direct_loop<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, c: &DMatrix<T>, mu: T, l: T, rho: T, ell: usize) -> Result<ClosedLoop<T>> {
    check_sector(mu, l, rho)?;
    if ell == 0 {
        return Err(Error::Domain("ell must be at least 1".into()));
    }
    let n = a.nrows();
    let (a_f, b_f) = filter_dynamics::<T>(ell);
    let a_cl = blocks(&[&[&a_f, &(&b_f * c * (l - mu))], &[&DMatrix::zeros(n, ell), &((a + b * c * mu) / rho)]]);
    let b_cl = vcat(&[&(-&b_f), &(b / rho)]);
    let mut c_basis = Vec::with_capacity(ell + 1);
    let mut d_basis = Vec::with_capacity(ell + 1);
    for j in 0..=ell {
        let e = unit_lambda::<T>(ell, j);
        c_basis.push(hcat(&[&filter_output_row(&e), &(c * ((l - mu) * e[0]))]));
        d_basis.push(-e[0]);
    }
    Ok(ClosedLoop { a: a_cl, b: b_cl, c_basis, d_basis })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissible_set() {
        assert!(MultiplierParams::new(vec![1.0, -0.8], 0.9).is_ok());
        assert!(matches!(MultiplierParams::new(vec![1.0, -0.95], 0.9), Err(Error::Constraint(_))));
        assert!(matches!(MultiplierParams::new(vec![1.0, 0.1], 0.9), Err(Error::Constraint(_))));
    }

    #[test]
    fn weighting_round_trip() {
        let s = StateSpace::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let w = rho_weight(&s, 0.5).unwrap();
        assert_eq!((w.a[(0, 0)], w.b[(0, 0)]), (2.0, 2.0));
        assert_eq!(rho_weight(&w, 2.0).unwrap(), s);
        assert!(rho_weight(&s, 0.0).is_err());
    }
}
