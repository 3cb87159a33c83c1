//! Order reduction of SISO/MIMO realizations.
//!
//! The realizations met in practice are cascades `K H` with the internal
//! model on the unit circle and the controller poles well inside it. The
//! reduction splits off the marginal part, balances and truncates the stable
//! part, and removes uncontrollable/unobservable directions from the marginal
//! part with an orthogonal staircase.

use nalgebra::DMatrix;

use super::linalg::{eig, hcat, max_abs, psd_factor, range_basis, singular_values, solve_stein, vcat};
use super::ss::{parallel, StateSpace};
use crate::error::{Error, Result};
use crate::scalar::{cabs, Scalar};

/// Default relative truncation tolerance.
pub const DEFAULT_REDUCTION_TOL: f64 = 1e-7;

/// Eigenvalues with modulus at least `1 - MARGINAL_BAND` are treated as marginal.
const MARGINAL_BAND: f64 = 1e-6;

/// Cap on the tolerance used to cancel marginal modes.
const MARGINAL_REDUCTION_TOL: f64 = 1e-8;

/// Orthonormal basis of the smallest `A`-invariant subspace containing
/// `range(B)`, with singular values below `abs_tol` discarded at each sweep.
pub fn controllable_subspace<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, abs_tol: T) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let (mut v, _) = range_basis(b, abs_tol)?;
    for _ in 0..n {
        let grown = hcat(&[&v, &(a * &v)]);
        let (next, _) = range_basis(&grown, abs_tol)?;
        if next.ncols() == v.ncols() {
            return Ok(next);
        }
        v = next;
    }
    Ok(v)
}

/// Removes uncontrollable and then unobservable directions.
pub fn kalman_reduce<T: Scalar>(g: &StateSpace<T>, rel_tol: T) -> Result<StateSpace<T>> {
    if g.order() == 0 {
        return Ok(g.clone());
    }
    // thresholds follow the size of the input and output maps
    let sa = T::one().max(max_abs(&g.a));
    let vc = controllable_subspace(&g.a, &g.b, rel_tol * sa * max_abs(&g.b))?;
    let a = vc.transpose() * &g.a * &vc;
    let b = vc.transpose() * &g.b;
    let c = &g.c * &vc;
    let vo = controllable_subspace(&a.transpose(), &c.transpose(), rel_tol * sa * max_abs(&c))?;
    StateSpace::new(vo.transpose() * &a * &vo, vo.transpose() * &b, &c * &vo, g.d.clone())
}

/// Splits `G = G_s + G_m` where `G_s` collects the eigenvalues strictly inside
/// the unit disk (away from the circle) and `G_m` the marginal/unstable ones.
/// The feedthrough goes to `G_m`.
pub fn stable_split<T: Scalar>(g: &StateSpace<T>) -> Result<(StateSpace<T>, StateSpace<T>)> {
    let n = g.order();
    let (m, p) = (g.inputs(), g.outputs());
    let empty = |d: DMatrix<T>| StateSpace::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, m), DMatrix::zeros(p, 0), d);
    let moduli: Vec<T> = eig(&g.a)?.iter().map(|l| cabs(*l)).collect();
    let edge = T::one() - T::lit(MARGINAL_BAND);
    let n_stable = moduli.iter().filter(|&&r| r < edge).count();
    if n_stable == 0 {
        return Ok((empty(DMatrix::zeros(p, m))?, g.clone()));
    }
    if n_stable == n {
        let mut s = g.clone();
        s.d = DMatrix::zeros(p, m);
        return Ok((s, empty(g.d.clone())?));
    }
    let r_in = moduli.iter().copied().filter(|&r| r < edge).fold(T::zero(), |a, r| a.max(r));
    let r_out = moduli.iter().copied().filter(|&r| r >= edge).fold(T::max_value().unwrap(), |a, r| a.min(r));
    let radius = (r_in + r_out) * T::lit(0.5);

    let sign = cayley_sign(&g.a, radius)?;
    let id = DMatrix::<T>::identity(n, n);
    let p_stable = (&id - &sign) * T::lit(0.5);
    let p_marg = (&id + &sign) * T::lit(0.5);
    let vs = leading_left_vectors(&p_stable, n_stable)?;
    let vm = leading_left_vectors(&p_marg, n - n_stable)?;
    let t = hcat(&[&vs, &vm]);
    let ti = t.clone().try_inverse().ok_or_else(|| Error::Numerical("spectral split produced a singular basis".into()))?;
    let at = &ti * &g.a * &t;
    let bt = &ti * &g.b;
    let ct = &g.c * &t;
    let k = n_stable;
    let stable = StateSpace::new(
        at.view((0, 0), (k, k)).into_owned(),
        bt.rows(0, k).into_owned(),
        ct.columns(0, k).into_owned(),
        DMatrix::zeros(p, m),
    )?;
    let marginal = StateSpace::new(
        at.view((k, k), (n - k, n - k)).into_owned(),
        bt.rows(k, n - k).into_owned(),
        ct.columns(k, n - k).into_owned(),
        g.d.clone(),
    )?;
    Ok((stable, marginal))
}

/// Matrix sign of the Cayley transform of `A / radius`; eigenvalues inside the
/// circle of that radius map to `-1`, outside to `+1`.
fn cayley_sign<T: Scalar>(a: &DMatrix<T>, radius: T) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let z = a / radius;
    let inv = (&z + &id).try_inverse().ok_or_else(|| Error::Numerical("Cayley transform is singular at the split radius".into()))?;
    let mut s = inv * (&z - &id);
    for _ in 0..200 {
        let si = s.clone().try_inverse().ok_or_else(|| Error::Numerical("sign iteration hit a singular iterate".into()))?;
        let next = (&s + si) * T::lit(0.5);
        let delta = max_abs(&(&next - &s));
        s = next;
        if delta <= T::lit(1e-14) * T::one().max(max_abs(&s)) {
            return Ok(s);
        }
    }
    Err(Error::Numerical("matrix sign iteration did not converge".into()))
}

fn leading_left_vectors<T: Scalar>(m: &DMatrix<T>, k: usize) -> Result<DMatrix<T>> {
    let (basis, _) = range_basis(m, T::zero())?;
    if basis.ncols() < k {
        return Err(Error::Numerical(format!("invariant subspace has rank {} but {k} eigenvalues were counted", basis.ncols())));
    }
    Ok(basis.columns(0, k).into_owned())
}

/// Hankel singular values of a stable realization, in descending order.
pub fn hankel_singular_values<T: Scalar>(g: &StateSpace<T>) -> Result<Vec<T>> {
    if g.order() == 0 {
        return Ok(Vec::new());
    }
    let (lc, lo) = gramian_factors(g)?;
    singular_values(&(lo.transpose() * lc))
}

fn gramian_factors<T: Scalar>(g: &StateSpace<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let wc = solve_stein(&g.a, &(&g.b * g.b.transpose()))?;
    let wo = solve_stein(&g.a.transpose(), &(g.c.transpose() * &g.c))?;
    Ok((psd_factor(&wc), psd_factor(&wo)))
}

/// Square-root balanced truncation keeping Hankel singular values above `abs_tol`.
pub fn balanced_truncation<T: Scalar>(g: &StateSpace<T>, abs_tol: T) -> Result<StateSpace<T>> {
    if g.order() == 0 {
        return Ok(g.clone());
    }
    let (lc, lo) = gramian_factors(g)?;
    balance_with(g, &lc, &lo, abs_tol)
}

fn balance_with<T: Scalar>(g: &StateSpace<T>, lc: &DMatrix<T>, lo: &DMatrix<T>, abs_tol: T) -> Result<StateSpace<T>> {
    let svd = (lo.transpose() * lc)
        .try_svd(true, true, T::default_epsilon(), 0)
        .ok_or_else(|| Error::Numerical("SVD failed in balanced truncation".into()))?;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let keep: Vec<usize> = order.into_iter().filter(|&i| svd.singular_values[i] > abs_tol).collect();
    let n = g.order();
    let r = keep.len();
    let mut t = DMatrix::<T>::zeros(n, r);
    let mut ti = DMatrix::<T>::zeros(r, n);
    for (j, &i) in keep.iter().enumerate() {
        let w = T::one() / svd.singular_values[i].sqrt();
        t.set_column(j, &((lc * vt.row(i).transpose()) * w));
        ti.set_row(j, &((u.column(i).transpose() * lo.transpose()) * w));
    }
    StateSpace::new(&ti * &g.a * &t, &ti * &g.b, &g.c * &t, g.d.clone())
}

/// Rebalances a minimal realization with gramians summed over a finite
/// horizon, which exist for marginal systems too. Keeps every state.
pub fn finite_horizon_balance<T: Scalar>(g: &StateSpace<T>, steps: usize) -> Result<StateSpace<T>> {
    let n = g.order();
    if n == 0 {
        return Ok(g.clone());
    }
    let mut wc = DMatrix::<T>::zeros(n, n);
    let mut wo = DMatrix::<T>::zeros(n, n);
    let mut akb = g.b.clone();
    let mut cak = g.c.clone();
    for _ in 0..steps {
        wc += &akb * akb.transpose();
        wo += cak.transpose() * &cak;
        akb = &g.a * akb;
        cak = &cak * &g.a;
    }
    let out = balance_with(g, &psd_factor(&wc), &psd_factor(&wo), T::zero())?;
    if out.order() < n {
        return Err(Error::Numerical("finite-horizon gramians are singular (realization not minimal)".into()));
    }
    Ok(out)
}

/// Largest singular value of the Hankel matrix of Markov parameters
/// `C A^k B` (size `(n+1) x (n+1)` blocks). Used as a size reference for
/// realizations that are not stable.
fn markov_hankel_norm<T: Scalar>(g: &StateSpace<T>) -> Result<T> {
    let n = g.order();
    if n == 0 {
        return Ok(T::zero());
    }
    let mut markov = Vec::with_capacity(2 * n + 1);
    let mut ak_b = g.b.clone();
    for _ in 0..=2 * n {
        markov.push(&g.c * &ak_b);
        ak_b = &g.a * ak_b;
    }
    let rows: Vec<DMatrix<T>> = (0..=n)
        .map(|i| {
            let row: Vec<&DMatrix<T>> = (0..=n).map(|j| &markov[i + j]).collect();
            hcat(&row)
        })
        .collect();
    let refs: Vec<&DMatrix<T>> = rows.iter().collect();
    Ok(singular_values(&vcat(&refs))?.first().copied().unwrap_or(T::zero()))
}

/// Reduced realization of `G`.
///
/// Directions whose Hankel-type singular values fall below `tol` times the
/// largest one are removed. The result never has more states than `G`;
/// `tol <= 0` returns `G` unchanged.
pub fn minimal_realization<T: Scalar>(g: &StateSpace<T>, tol: T) -> Result<StateSpace<T>> {
    if tol <= T::zero() || g.order() == 0 {
        return Ok(g.clone());
    }
    let (stable, marginal) = stable_split(g)?;
    let hsv = hankel_singular_values(&stable)?;
    let reference = hsv.first().copied().unwrap_or(T::zero()).max(markov_hankel_norm(&marginal)?);
    if reference == T::zero() {
        return StateSpace::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, g.inputs()), DMatrix::zeros(g.outputs(), 0), g.d.clone());
    }
    let stable_r = balanced_truncation(&stable, tol * reference)?;
    // marginal modes are structural: only exact cancellations are removed
    let marginal_r = kalman_reduce(&marginal, tol.min(T::lit(MARGINAL_REDUCTION_TOL)))?;
    let marginal_r = finite_horizon_balance(&marginal_r, 4 * marginal_r.order().max(1)).unwrap_or(marginal_r);
    let out = parallel(&stable_r, &marginal_r)?;
    if out.order() > g.order() {
        return Ok(g.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::poly::Polynomial;
    use crate::numkit::ss::{series_connect, test_points, tf_discrepancy};
    use crate::numkit::tf::TransferFunction;

    fn tf(num: &[f64], den: &[f64]) -> StateSpace<f64> {
        TransferFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec())).unwrap().to_state_space().unwrap()
    }

    #[test]
    fn split_recombines() {
        let g = series_connect(&tf(&[0.3, 1.0], &[0.1, -0.2, 1.0]), &tf(&[0.0, 1.0], &[1.0, 0.0, 1.0])).unwrap();
        let (s, m) = stable_split(&g).unwrap();
        assert_eq!((s.order(), m.order()), (2, 2));
        let back = parallel(&s, &m).unwrap();
        assert!(tf_discrepancy(&g, &back, &test_points(30, 4)) < 1e-10);
    }

    #[test]
    fn truncates_pure_delay_cancellation() {
        let mut kn = vec![0.0; 6];
        kn[0] = -0.18;
        let mut kd = vec![0.0; 6];
        kd[5] = 1.0;
        let mut hn = vec![0.0; 6];
        hn[5] = 1.0;
        let mut hd = vec![0.0; 7];
        hd[0] = -1.0;
        hd[6] = 1.0;
        let g = series_connect(&tf(&kn, &kd), &tf(&hn, &hd)).unwrap();
        assert_eq!(g.order(), 11);
        let r = minimal_realization(&g, 1e-7).unwrap();
        assert_eq!(r.order(), 6);
        assert!(tf_discrepancy(&g, &r, &test_points(50, 5)) < 1e-7);
    }
}
