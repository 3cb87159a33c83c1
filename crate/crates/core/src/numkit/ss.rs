use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{all_finite, block_diag, eig, hcat, resolvent_apply, vcat};
use super::poly::Polynomial;
use super::tf::TransferFunction;
use crate::error::{Error, Result};
use crate::scalar::{cabs, Cplx, Scalar};

/// Discrete-time LTI realization `x+ = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
}

impl<T: Scalar> StateSpace<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square, got {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!("D is {}x{}, expected {}x{}", d.nrows(), d.ncols(), c.nrows(), b.ncols())));
        }
        if !(all_finite(&a) && all_finite(&b) && all_finite(&c) && all_finite(&d)) {
            return Err(Error::Numerical("realization has non-finite entries".into()));
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless system `y = K u`.
    pub fn static_gain(k: DMatrix<T>) -> Self {
        let (p, m) = k.shape();
        Self { a: DMatrix::zeros(0, 0), b: DMatrix::zeros(0, m), c: DMatrix::zeros(p, 0), d: k }
    }

    pub fn siso_gain(k: T) -> Self {
        Self::static_gain(DMatrix::from_element(1, 1, k))
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.inputs() == 1 && self.outputs() == 1
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|x| *x == T::zero())
    }

    pub fn poles(&self) -> Result<Vec<Cplx<T>>> {
        eig(&self.a)
    }

    /// Frequency response `C (zI - A)^{-1} B + D`; `None` at a pole.
    pub fn eval(&self, z: Cplx<T>) -> Option<DMatrix<Cplx<T>>> {
        let d = self.d.map(|x| Complex::new(x, T::zero()));
        if self.order() == 0 {
            return Some(d);
        }
        let x = resolvent_apply(&self.a, &self.b, z)?;
        Some(self.c.map(|v| Complex::new(v, T::zero())) * x + d)
    }

    pub fn eval_siso(&self, z: Cplx<T>) -> Option<Cplx<T>> {
        self.eval(z).map(|m| m[(0, 0)])
    }

    /// State transformation `x = T x'`: returns `(T^{-1} A T, T^{-1} B, C T, D)`.
    pub fn similarity(&self, t: &DMatrix<T>) -> Result<Self> {
        let tinv = t.clone().try_inverse().ok_or_else(|| Error::Numerical("singular state transformation".into()))?;
        Self::new(&tinv * &self.a * t, &tinv * &self.b, &self.c * t, self.d.clone())
    }

    /// Exact transfer function of a SISO realization (Faddeev–LeVerrier).
    pub fn to_transfer_function(&self) -> Result<TransferFunction<T>> {
        if !self.is_siso() {
            return Err(Error::Dimension("transfer function conversion needs a SISO system".into()));
        }
        let n = self.order();
        // charpoly coefficients c[0..=n] ascending, adjugate coefficients adj[k] for z^{n-1-k}
        let mut cp = vec![T::zero(); n + 1];
        cp[n] = T::one();
        let mut m = DMatrix::<T>::zeros(n, n);
        let mut adj: Vec<DMatrix<T>> = Vec::with_capacity(n);
        for k in 1..=n {
            m = &self.a * &m + DMatrix::identity(n, n) * cp[n - k + 1];
            adj.push(m.clone());
            let am = &self.a * &m;
            cp[n - k] = -am.trace() / T::from_usize(k).unwrap();
        }
        let mut num = vec![T::zero(); n + 1];
        for (k, mk) in adj.iter().enumerate() {
            num[n - 1 - k] = (&self.c * mk * &self.b)[(0, 0)];
        }
        let d = self.d[(0, 0)];
        for i in 0..=n {
            num[i] += d * cp[i];
        }
        TransferFunction::new(Polynomial::new(num), Polynomial::new(cp))
    }
}

/// Cascade `K ∘ H`: the output of `H` drives `K`; the result realizes
/// `K(z) H(z)` with state `(x_H, x_K)`.
pub fn series_connect<T: Scalar>(k: &StateSpace<T>, h: &StateSpace<T>) -> Result<StateSpace<T>> {
    if h.outputs() != k.inputs() {
        return Err(Error::Dimension(format!("series connection: H has {} outputs but K has {} inputs", h.outputs(), k.inputs())));
    }
    let (nh, nk) = (h.order(), k.order());
    let a = vcat(&[&hcat(&[&h.a, &DMatrix::zeros(nh, nk)]), &hcat(&[&(&k.b * &h.c), &k.a])]);
    let b = vcat(&[&h.b, &(&k.b * &h.d)]);
    let c = hcat(&[&(&k.d * &h.c), &k.c]);
    let d = &k.d * &h.d;
    StateSpace::new(a, b, c, d)
}

/// Parallel sum `G1 + G2`.
pub fn parallel<T: Scalar>(g1: &StateSpace<T>, g2: &StateSpace<T>) -> Result<StateSpace<T>> {
    if g1.inputs() != g2.inputs() || g1.outputs() != g2.outputs() {
        return Err(Error::Dimension("parallel connection needs matching input/output sizes".into()));
    }
    StateSpace::new(block_diag(&[&g1.a, &g2.a]), vcat(&[&g1.b, &g2.b]), hcat(&[&g1.c, &g2.c]), &g1.d + &g2.d)
}

/// Deterministic complex test points with moduli in `[0.6, 1.8]` that avoid
/// the unit circle (where the internal-model poles live).
pub fn test_points<T: Scalar>(count: usize, seed: u64) -> Vec<Cplx<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r: f64 = if rng.random_bool(0.5) { rng.random_range(0.6..0.9) } else { rng.random_range(1.15..1.8) };
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            Complex::new(T::lit(r * th.cos()), T::lit(r * th.sin()))
        })
        .collect()
}

/// Largest relative discrepancy between two SISO frequency responses over
/// `points`: `|G1 - G2| / max(1, |G1|, |G2|)`.
pub fn tf_discrepancy<T: Scalar>(g1: &StateSpace<T>, g2: &StateSpace<T>, points: &[Cplx<T>]) -> T {
    points
        .iter()
        .filter_map(|&z| {
            let a = g1.eval_siso(z)?;
            let b = g2.eval_siso(z)?;
            let scale = T::one().max(cabs(a)).max(cabs(b));
            Some(cabs(a - b) / scale)
        })
        .fold(T::zero(), |acc, e| acc.max(e))
}
