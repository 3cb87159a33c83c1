//! Primal-dual interior-point method for block-diagonal semidefinite programs
//! in the dual form
//!
//! ```text
//! maximize b^T y   subject to   S = C - sum_i y_i A_i >= 0
//! ```
//!
//! with the HKM search direction and a Mehrotra predictor-corrector. Scalar
//! blocks are collected into one diagonal (linear programming) block.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::scalar::Scalar;

/// Dense semidefinite block: `C` and the coefficient matrices of the
/// variables that touch it.
#[derive(Clone, Debug)]
pub struct SdpBlock<T: Scalar> {
    pub c: DMatrix<T>,
    pub a: Vec<(usize, DMatrix<T>)>,
}

/// Diagonal block: `s = c - A y >= 0` componentwise.
#[derive(Clone, Debug)]
pub struct LpBlock<T: Scalar> {
    pub c: DVector<T>,
    pub a: DMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct Sdp<T: Scalar> {
    pub m: usize,
    pub b: DVector<T>,
    pub blocks: Vec<SdpBlock<T>>,
    pub lp: LpBlock<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Converged,
    Stopped,
    MaxIterations,
    Breakdown,
}

#[derive(Clone, Debug)]
pub struct SdpSolution<T: Scalar> {
    pub status: SdpStatus,
    pub y: DVector<T>,
    pub iterations: usize,
    pub primal_obj: T,
    pub dual_obj: T,
    pub primal_infeas: T,
    pub dual_infeas: T,
    pub message: String,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions<T: Scalar> {
    pub tol: T,
    pub max_iter: usize,
    pub step_fraction: T,
}

impl<T: Scalar> Default for SdpOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-9), max_iter: 120, step_fraction: T::lit(0.98) }
    }
}

struct Iterate<T: Scalar> {
    x: Vec<DMatrix<T>>,
    s: Vec<DMatrix<T>>,
    xl: DVector<T>,
    sl: DVector<T>,
    y: DVector<T>,
}

fn inner<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.component_mul(b).sum()
}

fn sym<T: Scalar>(m: DMatrix<T>) -> DMatrix<T> {
    (&m + m.transpose()) * T::lit(0.5)
}

/// Largest `alpha` with `X + alpha dX >= 0`, given `X > 0`.
fn max_step<T: Scalar>(x: &DMatrix<T>, dx: &DMatrix<T>) -> Option<T> {
    let n = x.nrows();
    if n == 0 {
        return Some(T::max_value().unwrap());
    }
    let chol = Cholesky::new(x.clone())?;
    let l = chol.l();
    let li_dx = l.solve_lower_triangular(dx)?;
    let w = l.solve_lower_triangular(&li_dx.transpose())?;
    let eig = SymmetricEigen::new(sym(w));
    let lmin = eig.eigenvalues.iter().fold(T::max_value().unwrap(), |a, &v| a.min(v));
    Some(if lmin < T::zero() { -T::one() / lmin } else { T::max_value().unwrap() })
}

fn max_step_lp<T: Scalar>(x: &DVector<T>, dx: &DVector<T>) -> T {
    x.iter().zip(dx.iter()).fold(T::max_value().unwrap(), |a, (&xi, &di)| if di < T::zero() { a.min(-xi / di) } else { a })
}

impl<T: Scalar> Sdp<T> {
    fn dims(&self) -> usize {
        self.blocks.iter().map(|b| b.c.nrows()).sum::<usize>() + self.lp.c.len()
    }

    /// `sum_i y_i A_i` per block and for the diagonal block.
    fn at_y(&self, y: &DVector<T>) -> (Vec<DMatrix<T>>, DVector<T>) {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut m = DMatrix::zeros(b.c.nrows(), b.c.ncols());
                for (i, a) in &b.a {
                    m += a * y[*i];
                }
                m
            })
            .collect();
        (blocks, &self.lp.a * y)
    }

    /// `(<A_i, W>)_i` for block matrices `W` (nonsymmetric allowed) and a diagonal part.
    fn a_of(&self, w: &[DMatrix<T>], wl: &DVector<T>) -> DVector<T> {
        let mut out = self.lp.a.transpose() * wl;
        for (b, wb) in self.blocks.iter().zip(w) {
            for (i, a) in &b.a {
                out[*i] += inner(a, wb);
            }
        }
        out
    }

    pub fn solve(&self, opts: &SdpOptions<T>, mut stop: impl FnMut(&DVector<T>) -> bool) -> SdpSolution<T> {
        let m = self.m;
        let n_tot = T::from_usize(self.dims().max(1)).unwrap();
        let norm_b = self.b.norm();
        let norm_c = self.blocks.iter().fold(self.lp.c.norm(), |a, b| a.max(b.c.norm()));
        let max_a = self.blocks.iter().flat_map(|b| b.a.iter().map(|(_, a)| a.norm())).fold(T::one(), |a, v| a.max(v));
        let xi0 = T::lit(10.0).max(T::one() + norm_b / (T::one() + max_a));
        let eta0 = T::lit(10.0).max(norm_c).max(max_a);

        let mut it = Iterate {
            x: self.blocks.iter().map(|b| DMatrix::identity(b.c.nrows(), b.c.nrows()) * xi0).collect(),
            s: self.blocks.iter().map(|b| DMatrix::identity(b.c.nrows(), b.c.nrows()) * eta0).collect(),
            xl: DVector::from_element(self.lp.c.len(), xi0),
            sl: DVector::from_element(self.lp.c.len(), eta0),
            y: DVector::zeros(m),
        };

        let mut last = (T::zero(), T::zero(), T::zero(), T::zero());
        for iter in 0..opts.max_iter {
            // residuals
            let (aty, atyl) = self.at_y(&it.y);
            let rd: Vec<DMatrix<T>> = self.blocks.iter().zip(&aty).zip(&it.s).map(|((b, ay), s)| &b.c - s - ay).collect();
            let rdl = &self.lp.c - &it.sl - atyl;
            let ax = self.a_of(&it.x, &it.xl);
            let rp = &self.b - ax;

            let pobj = self.blocks.iter().zip(&it.x).fold(self.lp.c.dot(&it.xl), |a, (b, x)| a + inner(&b.c, x));
            let dobj = self.b.dot(&it.y);
            let gap = it.x.iter().zip(&it.s).fold(it.xl.dot(&it.sl), |a, (x, s)| a + inner(x, s));
            let mu = gap / n_tot;
            let pinf = rp.norm() / (T::one() + norm_b);
            let rd_norm = rd.iter().fold(rdl.norm_squared(), |a, r| a + r.norm_squared()).sqrt();
            let dinf = rd_norm / (T::one() + norm_c);
            let relgap = gap / (T::one() + pobj.abs() + dobj.abs());
            last = (pobj, dobj, pinf, dinf);

            if stop(&it.y) {
                return self.finish(SdpStatus::Stopped, it.y, iter, last, "stopping rule satisfied".into());
            }
            if relgap < opts.tol && pinf < opts.tol && dinf < opts.tol {
                return self.finish(SdpStatus::Converged, it.y, iter, last, "converged".into());
            }

            // S^{-1} per block
            let mut z = Vec::with_capacity(self.blocks.len());
            for s in &it.s {
                match Cholesky::new(s.clone()) {
                    Some(c) => z.push(c.inverse()),
                    None => return self.finish(SdpStatus::Breakdown, it.y, iter, last, "dual slack lost definiteness".into()),
                }
            }
            let zl = it.sl.map(|v| T::one() / v);

            // Schur complement
            let mut schur = DMatrix::<T>::zeros(m, m);
            for ((b, x), zb) in self.blocks.iter().zip(&it.x).zip(&z) {
                let prods: Vec<DMatrix<T>> = b.a.iter().map(|(_, a)| x * a * zb).collect();
                for (jj, (j, _)) in b.a.iter().enumerate() {
                    for (ii, (i, ai)) in b.a.iter().enumerate().take(jj + 1) {
                        let v = inner(ai, &prods[jj]);
                        schur[(*i, *j)] += v;
                        if ii != jj {
                            schur[(*j, *i)] += v;
                        }
                    }
                }
            }
            if !self.lp.c.is_empty() {
                let d = it.xl.component_mul(&zl);
                let mut ad = self.lp.a.clone();
                for (r, mut row) in ad.row_iter_mut().enumerate() {
                    row *= d[r];
                }
                schur += self.lp.a.transpose() * ad;
            }
            let schur = sym(schur);
            let solver = match factor(&schur) {
                Some(f) => f,
                None => return self.finish(SdpStatus::Breakdown, it.y, iter, last, "Schur complement is singular".into()),
            };

            // direction for a given centering term G (blocks) / gl (diagonal)
            let direction =
                |g: &[DMatrix<T>], gl: &DVector<T>| -> Option<(Vec<DMatrix<T>>, DVector<T>, Vec<DMatrix<T>>, DVector<T>, DVector<T>)> {
                    let gz: Vec<DMatrix<T>> = g.iter().zip(&z).map(|(g, z)| g * z).collect();
                    let gzl = gl.component_mul(&zl);
                    let xrz: Vec<DMatrix<T>> = it.x.iter().zip(&rd).zip(&z).map(|((x, r), z)| x * r * z).collect();
                    let xrzl = it.xl.component_mul(&rdl).component_mul(&zl);
                    let rhs = &self.b - self.a_of(&gz, &gzl) + self.a_of(&xrz, &xrzl);
                    let dy = solver.solve(&rhs)?;
                    let (ady, adyl) = self.at_y(&dy);
                    let ds: Vec<DMatrix<T>> = rd.iter().zip(&ady).map(|(r, a)| r - a).collect();
                    let dsl = &rdl - adyl;
                    let dx: Vec<DMatrix<T>> =
                        gz.iter().zip(&it.x).zip(&ds).zip(&z).map(|(((gz, x), ds), z)| sym(gz - x - x * ds * z)).collect();
                    let dxl = &gzl - &it.xl - it.xl.component_mul(&dsl).component_mul(&zl);
                    Some((dx, dxl, ds, dsl, dy))
                };
            let steps = |dx: &[DMatrix<T>], dxl: &DVector<T>, ds: &[DMatrix<T>], dsl: &DVector<T>| -> Option<(T, T)> {
                let mut ap = max_step_lp(&it.xl, dxl);
                for (x, d) in it.x.iter().zip(dx) {
                    ap = ap.min(max_step(x, d)?);
                }
                let mut ad = max_step_lp(&it.sl, dsl);
                for (s, d) in it.s.iter().zip(ds) {
                    ad = ad.min(max_step(s, d)?);
                }
                Some((ap, ad))
            };

            // predictor
            let zero_g: Vec<DMatrix<T>> = self.blocks.iter().map(|b| DMatrix::zeros(b.c.nrows(), b.c.nrows())).collect();
            let zero_gl = DVector::zeros(self.lp.c.len());
            let Some((dxa, dxla, dsa, dsla, _)) = direction(&zero_g, &zero_gl) else {
                return self.finish(SdpStatus::Breakdown, it.y, iter, last, "predictor solve failed".into());
            };
            let Some((apa, ada)) = steps(&dxa, &dxla, &dsa, &dsla) else {
                return self.finish(SdpStatus::Breakdown, it.y, iter, last, "predictor step failed".into());
            };
            let apa = T::one().min(apa);
            let ada = T::one().min(ada);
            let mut gap_aff = (&it.xl + &dxla * apa).dot(&(&it.sl + &dsla * ada));
            for (((x, dx), s), ds) in it.x.iter().zip(&dxa).zip(&it.s).zip(&dsa) {
                gap_aff += inner(&(x + dx * apa), &(s + ds * ada));
            }
            let mu_aff = gap_aff / n_tot;
            let sigma = T::one().min((mu_aff / mu).max(T::zero()).powi(3));

            // corrector
            let g: Vec<DMatrix<T>> =
                dxa.iter().zip(&dsa).map(|(dx, ds)| DMatrix::identity(dx.nrows(), dx.nrows()) * (sigma * mu) - dx * ds).collect();
            let gl = DVector::from_element(self.lp.c.len(), sigma * mu) - dxla.component_mul(&dsla);
            let Some((dx, dxl, ds, dsl, dy)) = direction(&g, &gl) else {
                return self.finish(SdpStatus::Breakdown, it.y, iter, last, "corrector solve failed".into());
            };
            let Some((ap, ad)) = steps(&dx, &dxl, &ds, &dsl) else {
                return self.finish(SdpStatus::Breakdown, it.y, iter, last, "corrector step failed".into());
            };
            let ap = T::one().min(opts.step_fraction * ap);
            let ad = T::one().min(opts.step_fraction * ad);

            for (x, d) in it.x.iter_mut().zip(&dx) {
                *x += d * ap;
            }
            it.xl += &dxl * ap;
            for (s, d) in it.s.iter_mut().zip(&ds) {
                *s += d * ad;
            }
            it.sl += &dsl * ad;
            it.y += &dy * ad;
            if ap < T::lit(1e-12) && ad < T::lit(1e-12) {
                return self.finish(SdpStatus::Breakdown, it.y, iter, last, "step length collapsed".into());
            }
        }
        self.finish(SdpStatus::MaxIterations, it.y, opts.max_iter, last, "iteration limit reached".into())
    }

    fn finish(&self, status: SdpStatus, y: DVector<T>, iterations: usize, last: (T, T, T, T), message: String) -> SdpSolution<T> {
        SdpSolution { status, y, iterations, primal_obj: last.0, dual_obj: last.1, primal_infeas: last.2, dual_infeas: last.3, message }
    }
}

enum Factor<T: Scalar> {
    Chol(Cholesky<T, nalgebra::Dyn>),
    Lu(nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>),
}

impl<T: Scalar> Factor<T> {
    fn solve(&self, b: &DVector<T>) -> Option<DVector<T>> {
        match self {
            Factor::Chol(c) => Some(c.solve(b)),
            Factor::Lu(l) => l.solve(b),
        }
    }
}

fn factor<T: Scalar>(m: &DMatrix<T>) -> Option<Factor<T>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(Factor::Chol(c));
    }
    let dmax = m.diagonal().iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let n = m.nrows();
    let reg = m + DMatrix::identity(n, n) * (dmax * T::lit(1e-13));
    if let Some(c) = Cholesky::new(reg) {
        return Some(Factor::Chol(c));
    }
    let lu = m.clone().lu();
    if lu.is_invertible() {
        Some(Factor::Lu(lu))
    } else {
        None
    }
}
