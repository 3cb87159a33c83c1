//! The analysis LMI, the fixed-multiplier and convex synthesis LMIs, and the
//! linearized controller LMI used for reconstruction.

use nalgebra::DMatrix;

use nalgebra::DVector;

use super::model::{combine, AffineMatrix, LmiProblem, MatVar, SymVar, VarSet};
use super::solve::verify_point;
use crate::error::{Error, Result};
use crate::numkit::linalg::{hcat, kernel_basis, solve_sylvester, vcat};
use crate::plant::PlantRealization;
use crate::scalar::Scalar;
use crate::transform::{filter_dynamics, filter_output_row, ClosedLoop, MultiplierParams, TransformedPlant};

/// Bound on the trace of the Lyapunov certificates (normalization).
pub const TRACE_BOUND: f64 = 1e4;
/// Bound on the entries of the linearized controller variables.
pub const CONTROLLER_BOUND: f64 = 1e4;
/// Relative threshold for annihilator kernels.
pub const KERNEL_TOL: f64 = 1e-10;

/// Multiplier coefficients either as decision variables or fixed numbers.
#[derive(Clone, Debug)]
pub enum LambdaMode<T: Scalar> {
    Free,
    Fixed(Vec<T>),
}

fn trace_expr<T: Scalar>(m: &AffineMatrix<T>) -> AffineMatrix<T> {
    (0..m.nrows()).fold(AffineMatrix::scalar_const(T::zero()), |acc, i| acc.add(&m.entry(i, i)))
}

fn unit_row<T: Scalar>(n: usize, k: usize) -> DMatrix<T> {
    let mut r = DMatrix::zeros(1, n);
    r[(0, k)] = T::one();
    r
}

/// Adds `lambda_0 = 1`, `lambda_j <= 0` and `sum_j rho^-j lambda_j >= 0`.
fn add_lambda_constraints<T: Scalar>(p: &mut LmiProblem<T>, lam: &[AffineMatrix<T>], rho: T) -> Result<()> {
    p.add_equality("lambda_0 = 1", &lam[0], T::one())?;
    for (j, l) in lam.iter().enumerate().skip(1) {
        p.add_psd(&format!("lambda_{j} <= 0"), l.neg())?;
    }
    let s =
        lam.iter().enumerate().fold(AffineMatrix::scalar_const(T::zero()), |acc, (j, l)| acc.add(&l.scale(T::one() / rho.powi(j as i32))));
    p.add_psd("sum rho^-j lambda_j >= 0", s)
}

fn lambda_exprs<T: Scalar>(vs: &mut VarSet, ell: usize, mode: &LambdaMode<T>) -> Result<Vec<AffineMatrix<T>>> {
    match mode {
        LambdaMode::Free => Ok((0..=ell).map(|j| vs.scalar::<T>(&format!("lambda_{j}")).1).collect()),
        LambdaMode::Fixed(v) => {
            if v.len() != ell + 1 {
                return Err(Error::Assembly(format!("expected {} multiplier coefficients, got {}", ell + 1, v.len())));
            }
            Ok(v.iter().map(|&x| AffineMatrix::scalar_const(x)).collect())
        }
    }
}

/// Dissipation form `[A B]^T X [A B] - diag(X, 0) + [[0, C^T], [C, 2D]]`,
/// optionally compressed by `U` (columns act on `(state, input)`).
fn dissipation<T: Scalar>(x: &AffineMatrix<T>, ab: &DMatrix<T>, cd: &AffineMatrix<T>, u: Option<&DMatrix<T>>) -> AffineMatrix<T> {
    let n = ab.nrows();
    let mut e0 = DMatrix::zeros(n, n + 1);
    e0.view_mut((0, 0), (n, n)).fill_with_identity();
    let o = unit_row::<T>(n + 1, n);
    let (ab, e0, o, cd) = match u {
        Some(u) => (ab * u, e0 * u, o * u, cd.right(u)),
        None => (ab.clone(), e0, o, cd.clone()),
    };
    let quad = x.congruence(&ab.transpose(), &ab).sub(&x.congruence(&e0.transpose(), &e0));
    let cross = cd.transpose().right(&o).add(&cd.left(&o.transpose()));
    quad.add(&cross).sym()
}

pub struct AnalysisLmi<T: Scalar> {
    pub problem: LmiProblem<T>,
    pub x: SymVar<T>,
    pub lambda: Vec<AffineMatrix<T>>,
}

/// LMI certifying rate `rho` for a closed loop (assembled at that rate).
pub fn assemble_analysis<T: Scalar>(cl: &ClosedLoop<T>, rho: T, mode: LambdaMode<T>) -> Result<AnalysisLmi<T>> {
    let n = cl.order();
    if cl.a.ncols() != n || cl.b.shape() != (n, 1) || cl.c_basis.iter().any(|c| c.shape() != (1, n)) {
        return Err(Error::Assembly("closed-loop realization has inconsistent dimensions".into()));
    }
    let ell = cl.ell();
    let mut vs = VarSet::new();
    let x = vs.sym_matrix::<T>("X", n);
    let lam = lambda_exprs(&mut vs, ell, &mode)?;
    let c = combine(&lam, &cl.c_basis);
    let d_mats: Vec<DMatrix<T>> = cl.d_basis.iter().map(|&d| DMatrix::from_element(1, 1, d)).collect();
    let d = combine(&lam, &d_mats);
    let ab = hcat(&[&cl.a, &cl.b]);
    let q = dissipation(&x.expr, &ab, &AffineMatrix::hcat(&[&c, &d]), None);

    let mut p = LmiProblem::new(vs);
    p.add_strict("analysis", q.neg())?;
    p.add_strict("X > 0", x.expr.clone())?;
    p.add_psd("trace X <= bound", trace_expr(&x.expr).neg().add_const(&DMatrix::from_element(1, 1, T::lit(TRACE_BOUND))))?;
    if matches!(mode, LambdaMode::Free) {
        add_lambda_constraints(&mut p, &lam, rho)?;
    }
    Ok(AnalysisLmi { problem: p, x, lambda: lam })
}

/// Orthonormal basis of the kernel of a row vector, as columns.
fn row_kernel<T: Scalar>(row: &DMatrix<T>) -> Result<DMatrix<T>> {
    let k = kernel_basis(row, T::lit(KERNEL_TOL))?;
    if k.ncols() + 1 != row.ncols() {
        return Err(Error::Assembly(format!("annihilator has {} columns, expected {} (degenerate row)", k.ncols(), row.ncols() - 1)));
    }
    Ok(k)
}

/// `U`: columns span `ker [C_y, 0]`.
pub fn primal_annihilator<T: Scalar>(c_y: &DMatrix<T>) -> Result<DMatrix<T>> {
    row_kernel(&hcat(&[c_y, &DMatrix::zeros(1, 1)]))
}

pub struct FixedSynthesisLmi<T: Scalar> {
    pub problem: LmiProblem<T>,
    pub x_hat: SymVar<T>,
    pub y_hat: SymVar<T>,
    pub u_hat: DMatrix<T>,
    pub v_hat: DMatrix<T>,
}

/// Primal/dual dissipativity and coupling LMIs for a fixed multiplier.
pub fn assemble_fixed_multiplier_synthesis<T: Scalar>(ph: &TransformedPlant<T>) -> Result<FixedSynthesisLmi<T>> {
    let ns = ph.a.nrows();
    let mut vs = VarSet::new();
    let x = vs.sym_matrix::<T>("Xhat", ns);
    let y = vs.sym_matrix::<T>("Yhat", ns);

    let u_hat = primal_annihilator(&ph.c_y)?;
    let ab = hcat(&[&ph.a, &ph.b_w]);
    let cd = AffineMatrix::constant(hcat(&[&ph.c_z, &DMatrix::from_element(1, 1, ph.d_zw)]));
    let m1 = dissipation(&x.expr, &ab, &cd, Some(&u_hat));

    let v_hat = row_kernel(&hcat(&[&ph.b_u.transpose(), &DMatrix::from_element(1, 1, ph.d_zu)]))?.transpose();
    let w1 = vcat(&[&(-DMatrix::<T>::identity(ns, ns)), &DMatrix::zeros(1, ns)]);
    let w2 = vcat(&[&ph.a, &ph.c_z]);
    let mut wa = DMatrix::zeros(ns + 1, 1);
    wa[(ns, 0)] = -T::one();
    let wb = vcat(&[&ph.b_w, &DMatrix::from_element(1, 1, ph.d_zw)]);
    let inner = y
        .expr
        .congruence(&w1, &w1.transpose())
        .sub(&y.expr.congruence(&w2, &w2.transpose()))
        .add_const(&(&wa * wb.transpose() + &wb * wa.transpose()));
    let m2 = inner.congruence(&v_hat, &v_hat.transpose()).sym();

    let id = AffineMatrix::identity(ns);
    let m3 = AffineMatrix::blocks(&[&[&y.expr, &id], &[&id, &x.expr]]);

    let mut p = LmiProblem::new(vs);
    p.add_strict("primal dissipativity", m1.neg())?;
    p.add_strict("dual dissipativity", m2)?;
    p.add_strict("coupling", m3)?;
    let tr = trace_expr(&x.expr).add(&trace_expr(&y.expr));
    p.add_psd("trace bound", tr.neg().add_const(&DMatrix::from_element(1, 1, T::lit(TRACE_BOUND))))?;
    Ok(FixedSynthesisLmi { problem: p, x_hat: x, y_hat: y, u_hat, v_hat })
}

pub struct ConvexSynthesisLmi<T: Scalar> {
    pub problem: LmiProblem<T>,
    pub x_hat: SymVar<T>,
    pub y_tilde: SymVar<T>,
    pub n: MatVar<T>,
    pub lambda: Vec<AffineMatrix<T>>,
    pub u_hat: DMatrix<T>,
    pub v: DMatrix<T>,
}

/// Convex synthesis LMIs with the multiplier as a decision variable and the
/// Sylvester relation as linear equalities.
pub fn assemble_convex_synthesis<T: Scalar>(plant: &PlantRealization<T>, mu: T, l: T, rho: T, ell: usize) -> Result<ConvexSynthesisLmi<T>> {
    if !(mu > T::zero() && mu < l) {
        return Err(Error::Domain(format!("need 0 < mu < L, got mu = {mu}, L = {l}")));
    }
    if !(rho > T::zero() && rho < T::one()) {
        return Err(Error::Domain(format!("rate must lie in (0, 1), got {rho}")));
    }
    if ell == 0 {
        return Err(Error::Domain("ell must be at least 1".into()));
    }
    let np = plant.n_p();
    let ns = np + ell;
    let ap_inv = plant.a_p.clone().try_inverse().ok_or_else(|| Error::Domain("plant state matrix is singular".into()))?;
    let (a_f, b_f) = filter_dynamics::<T>(ell);

    let mut vs = VarSet::new();
    let x = vs.sym_matrix::<T>("Xhat", ns);
    let y = vs.sym_matrix::<T>("Ytilde", np);
    let nv = vs.matrix::<T>("N", np, ell);
    let lam = lambda_exprs(&mut vs, ell, &LambdaMode::Free)?;

    let cf_basis: Vec<DMatrix<T>> = (0..=ell)
        .map(|j| {
            let mut e = vec![T::zero(); ell + 1];
            e[j] = T::one();
            filter_output_row(&e)
        })
        .collect();
    let c_f = combine(&lam, &cf_basis);
    let d_zw = lam[0].neg();

    // transformed plant pieces that do not depend on lambda
    let a_hat = crate::numkit::linalg::block_diag(&[&a_f, &(&plant.a_p / rho)]);
    let b_w = vcat(&[&(-&b_f), &(&plant.b_p / rho)]);
    let c_y = hcat(&[&DMatrix::zeros(1, ell), &plant.c_p]);

    // primal
    let u_hat = primal_annihilator(&c_y)?;
    let cd = AffineMatrix::hcat(&[&c_f, &AffineMatrix::zeros(1, np), &d_zw]);
    let m1 = dissipation(&x.expr, &hcat(&[&a_hat, &b_w]), &cd, Some(&u_hat));

    // dual
    let v = row_kernel(&hcat(&[&(plant.b_p.transpose() * (mu / rho)), &DMatrix::from_element(1, 1, l - mu)]))?.transpose();
    let mut powers = Vec::with_capacity(ell + 1);
    let mut pw = DMatrix::<T>::identity(np, np);
    for j in 0..=ell {
        powers.push(&pw * rho.powi(j as i32));
        pw = &pw * &ap_inv;
    }
    let t_tilde = AffineMatrix::hcat(&[&nv.expr.scale(T::one() / (l - mu)), &combine(&lam, &powers)]);
    let tb = t_tilde.right(&b_w);
    let w1 = vcat(&[&(-DMatrix::<T>::identity(np, np)), &DMatrix::zeros(1, np)]);
    let w2 = vcat(&[&plant.a_p, &DMatrix::zeros(1, np)]);
    let mut wa = DMatrix::zeros(np + 1, 1);
    wa[(np, 0)] = -T::one();
    let wb = AffineMatrix::vcat(&[&tb, &d_zw]);
    let cross = wb.transpose().left(&wa).add(&wb.right(&wa.transpose()));
    let inner =
        y.expr.congruence(&w1, &w1.transpose()).sub(&y.expr.congruence(&w2, &w2.transpose()).scale(T::one() / (rho * rho))).add(&cross);
    let m2 = inner.congruence(&v, &v.transpose()).sym();

    // coupling through the commuting transformation
    let m3 = AffineMatrix::blocks(&[&[&y.expr, &t_tilde], &[&t_tilde.transpose(), &x.expr]]);

    let mut p = LmiProblem::new(vs);
    p.add_strict("primal dissipativity", m1.neg())?;
    p.add_strict("dual dissipativity", m2)?;
    p.add_strict("coupling", m3)?;
    let tr = trace_expr(&x.expr).add(&trace_expr(&y.expr));
    p.add_psd("trace bound", tr.neg().add_const(&DMatrix::from_element(1, 1, T::lit(TRACE_BOUND))))?;
    add_lambda_constraints(&mut p, &lam, rho)?;
    // A_p N - rho N A_f + mu B_p C_f = 0
    let syl = nv.expr.left(&plant.a_p).sub(&nv.expr.right(&a_f).scale(rho)).add(&c_f.left(&plant.b_p).scale(mu));
    p.add_matrix_equality("sylvester", &syl)?;
    Ok(ConvexSynthesisLmi { problem: p, x_hat: x, y_tilde: y, n: nv, lambda: lam, u_hat, v })
}

/// Either fixed certificate matrices or decision variables.
pub enum CertificateMode<T: Scalar> {
    Fixed { x: DMatrix<T>, y: DMatrix<T> },
    Free,
}

pub struct ControllerLmi<T: Scalar> {
    pub problem: LmiProblem<T>,
    pub k_hat: MatVar<T>,
    pub l_hat: MatVar<T>,
    pub m_hat: MatVar<T>,
    pub n_hat: MatVar<T>,
    pub x: AffineMatrix<T>,
    pub y: AffineMatrix<T>,
}

/// Analysis condition for a full-order controller after the linearizing
/// change of variables; affine in `(K, L, M, N)` (and in `X`, `Y` when free).
pub fn assemble_controller_lmi<T: Scalar>(ph: &TransformedPlant<T>, mode: CertificateMode<T>) -> Result<ControllerLmi<T>> {
    let ns = ph.a.nrows();
    let mut vs = VarSet::new();
    let k = vs.matrix::<T>("Khat", ns, ns);
    let lh = vs.matrix::<T>("Lhat", ns, 1);
    let mh = vs.matrix::<T>("Mhat", 1, ns);
    let nh = vs.matrix::<T>("Nhat", 1, 1);
    let free = matches!(mode, CertificateMode::Free);
    let (x, y) = match mode {
        CertificateMode::Fixed { x, y } => {
            if x.shape() != (ns, ns) || y.shape() != (ns, ns) {
                return Err(Error::Assembly("certificate blocks have the wrong size".into()));
            }
            (AffineMatrix::constant(x), AffineMatrix::constant(y))
        }
        CertificateMode::Free => (vs.sym_matrix::<T>("X", ns).expr, vs.sym_matrix::<T>("Y", ns).expr),
    };
    let id = AffineMatrix::identity(ns);
    let xy = AffineMatrix::blocks(&[&[&y, &id], &[&id, &x]]);
    let b_u_n = nh.expr.left(&ph.b_u).right(&ph.c_y);
    let pa = AffineMatrix::blocks(&[
        &[&y.left(&ph.a).add(&mh.expr.left(&ph.b_u)), &b_u_n.add_const(&ph.a)],
        &[&k.expr, &x.right(&ph.a).add(&lh.expr.right(&ph.c_y))],
    ]);
    let pb = AffineMatrix::vcat(&[&AffineMatrix::constant(ph.b_w.clone()), &x.right(&ph.b_w)]);
    let cp =
        AffineMatrix::hcat(&[&y.left(&ph.c_z).add(&mh.expr.scale(ph.d_zu)), &nh.expr.right(&ph.c_y).scale(ph.d_zu).add_const(&ph.c_z)]);
    let dzw2 = AffineMatrix::scalar_const(ph.d_zw * T::lit(2.0));
    let big =
        AffineMatrix::blocks(&[&[&xy.neg(), &cp.transpose(), &pa.transpose()], &[&cp, &dzw2, &pb.transpose()], &[&pa, &pb, &xy.neg()]]);
    let mut p = LmiProblem::new(vs);
    p.var_bound = T::lit(CONTROLLER_BOUND);
    p.add_strict("closed-loop dissipation", big.sym().neg())?;
    if free {
        p.add_strict("certificate", xy.clone())?;
        let tr = trace_expr(&x).add(&trace_expr(&y));
        p.add_psd("trace bound", tr.neg().add_const(&DMatrix::from_element(1, 1, T::lit(TRACE_BOUND))))?;
    }
    Ok(ControllerLmi { problem: p, k_hat: k, l_hat: lh, m_hat: mh, n_hat: nh, x, y })
}

/// Witness of the convex synthesis LMIs at a fixed rate.
#[derive(Clone, Debug)]
pub struct SynthesisCertificate<T: Scalar> {
    pub x_hat: DMatrix<T>,
    pub y_tilde: DMatrix<T>,
    pub n: DMatrix<T>,
    pub lambda: MultiplierParams<T>,
    pub rho: T,
    /// Max-abs Sylvester residual after the exact re-solve.
    pub sylvester_residual: T,
    /// Smallest verified slack over all constraints.
    pub min_slack: T,
}

impl<T: Scalar> ConvexSynthesisLmi<T> {
    /// Builds a certificate from a feasible witness. `N` is recomputed from
    /// `lambda` by an exact Sylvester solve and the LMIs are re-verified at the
    /// corrected point.
    pub fn certificate(&self, plant: &PlantRealization<T>, mu: T, rho: T, x: &DVector<T>) -> Result<SynthesisCertificate<T>> {
        let lam: Vec<T> = self.lambda.iter().map(|l| l.eval(x)[(0, 0)]).collect();
        let ell = lam.len() - 1;
        let (a_f, _) = filter_dynamics::<T>(ell);
        let rhs = &plant.b_p * filter_output_row(&lam) * (-mu);
        let n = solve_sylvester(&plant.a_p, &(&a_f * (-rho)), &rhs)?;
        let mut y = x.clone();
        for c in 0..self.n.cols {
            for r in 0..self.n.rows {
                y[self.n.start + r + c * self.n.rows] = n[(r, c)];
            }
        }
        let (slack, worst, eq, ok) = verify_point(&self.problem, &y);
        if !ok {
            return Err(Error::Numerical(format!(
                "certificate fails re-verification at constraint '{worst}' (slack {slack:e}, equality residual {eq:e})"
            )));
        }
        let res = &plant.a_p * &n - &n * &a_f * rho + &plant.b_p * filter_output_row(&lam) * mu;
        let lambda = MultiplierParams::new_with_slack(lam, rho, self.problem.margin() * T::lit(10.0))?;
        Ok(SynthesisCertificate {
            x_hat: self.x_hat.value(&y),
            y_tilde: self.y_tilde.value(&y),
            n,
            lambda,
            rho,
            sylvester_residual: res.amax(),
            min_slack: slack,
        })
    }
}
