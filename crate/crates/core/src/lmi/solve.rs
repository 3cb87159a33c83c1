//! Reduction of an [`LmiProblem`] to the interior-point engine and
//! independent verification of the returned witness.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::model::LmiProblem;
use super::sdp::{LpBlock, Sdp, SdpBlock, SdpOptions, SdpSolution, SdpStatus};
use crate::numkit::linalg::{kernel_basis, max_abs, min_sym_eig};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    Infeasible,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub message: String,
    /// Constraint with the smallest slack at the reported point.
    pub worst_constraint: String,
}

/// Outcome of [`solve_feasibility`].
#[derive(Clone, Debug)]
pub struct Feasibility<T: Scalar> {
    pub status: Status,
    /// Verified witness when feasible; best iterate otherwise.
    pub x: Option<DVector<T>>,
    /// Largest common margin found by the solver (negative when infeasible).
    pub margin: T,
    /// `min_c (lambda_min(F_c(x)) - required_c)`, recomputed independently.
    pub min_slack: T,
    pub eq_residual: T,
    pub diagnostics: Diagnostics,
}

impl<T: Scalar> Feasibility<T> {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    pub fn witness(&self) -> Option<&DVector<T>> {
        if self.is_feasible() {
            self.x.as_ref()
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions<T: Scalar> {
    pub sdp: SdpOptions<T>,
    /// Upper bound on the common margin variable.
    pub margin_cap: T,
    /// Solver margin below which a converged problem is declared infeasible.
    pub infeasible_below: T,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self { sdp: SdpOptions::default(), margin_cap: T::one(), infeasible_below: T::lit(-1e-8) }
    }
}

impl<T: Scalar> SolveOptions<T> {
    /// Tighter tolerances, used to re-solve borderline cases.
    pub fn tightened(&self) -> Self {
        let mut o = *self;
        o.sdp.tol = self.sdp.tol * T::lit(1e-2);
        o.sdp.max_iter = self.sdp.max_iter * 2;
        o
    }
}

/// Affine parameterization `x = x0 + Z y` of the equality-feasible set.
struct Parameterization<T: Scalar> {
    x0: DVector<T>,
    z: DMatrix<T>,
}

fn parameterize<T: Scalar>(p: &LmiProblem<T>) -> Result<Parameterization<T>, String> {
    let m = p.nvars();
    let (e, rhs) = p.equality_system();
    let support: Vec<usize> = (0..m).filter(|&j| e.column(j).iter().any(|v| *v != T::zero())).collect();
    let free: Vec<usize> = (0..m).filter(|j| !support.contains(j)).collect();
    let mut x0 = DVector::zeros(m);
    let mut kernel = DMatrix::zeros(support.len(), 0);
    if !support.is_empty() {
        let es = DMatrix::from_fn(e.nrows(), support.len(), |r, c| e[(r, support[c])]);
        let svd = es.clone().svd(true, true);
        let xs = svd.solve(&rhs, T::lit(1e-12) * svd.singular_values.max()).map_err(|e| format!("equality system solve failed: {e}"))?;
        let res = &es * &xs - &rhs;
        let scale = T::one().max(max_abs(&DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice())));
        if max_abs(&DMatrix::from_column_slice(res.len(), 1, res.as_slice())) > T::lit(1e-9) * scale {
            return Err("linear equalities are inconsistent".into());
        }
        for (c, &j) in support.iter().enumerate() {
            x0[j] = xs[c];
        }
        kernel = kernel_basis(&es, T::lit(1e-12)).map_err(|e| e.to_string())?;
    }
    let r = free.len() + kernel.ncols();
    let mut z = DMatrix::zeros(m, r);
    for (k, &j) in free.iter().enumerate() {
        z[(j, k)] = T::one();
    }
    for c in 0..kernel.ncols() {
        for (row, &j) in support.iter().enumerate() {
            z[(j, free.len() + c)] = kernel[(row, c)];
        }
    }
    Ok(Parameterization { x0, z })
}

/// Either maximize a common margin `t` (feasibility) or minimize the
/// objective.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Margin,
    Objective,
}

fn build_sdp<T: Scalar>(p: &LmiProblem<T>, par: &Parameterization<T>, mode: Mode, opts: &SolveOptions<T>) -> Sdp<T> {
    let r = par.z.ncols();
    let t_idx = r;
    let m = if mode == Mode::Margin { r + 1 } else { r };
    let eps = p.margin();
    let mut blocks = Vec::new();
    let mut lp_c: Vec<T> = Vec::new();
    let mut lp_rows: Vec<DVector<T>> = Vec::new();

    for con in &p.constraints {
        let n = con.f.nrows();
        let mut c0 = con.f.constant_part().clone();
        let mut coef: BTreeMap<usize, DMatrix<T>> = BTreeMap::new();
        for (&i, fi) in con.f.terms() {
            c0 += fi * par.x0[i];
            for k in 0..r {
                let zk = par.z[(i, k)];
                if zk != T::zero() {
                    let slot = coef.entry(k).or_insert_with(|| DMatrix::zeros(n, n));
                    *slot += fi * zk;
                }
            }
        }
        let required = if con.strict { eps + con.margin } else { con.margin };
        c0 -= DMatrix::identity(n, n) * required;
        let use_t = con.strict && mode == Mode::Margin;
        if n == 1 {
            let mut row = DVector::zeros(m);
            for (k, a) in &coef {
                row[*k] = -a[(0, 0)];
            }
            if use_t {
                row[t_idx] = T::one();
            }
            lp_c.push(c0[(0, 0)]);
            lp_rows.push(row);
        } else {
            let mut a: Vec<(usize, DMatrix<T>)> = coef.into_iter().map(|(k, v)| (k, -v)).collect();
            if use_t {
                a.push((t_idx, DMatrix::identity(n, n)));
            }
            blocks.push(SdpBlock { c: crate::numkit::linalg::sym(&c0), a });
        }
    }
    // box on the original variables
    for i in 0..p.nvars() {
        let zi = par.z.row(i).transpose();
        if zi.iter().all(|v| *v == T::zero()) {
            continue;
        }
        let mut up = DVector::zeros(m);
        up.rows_mut(0, r).copy_from(&zi);
        lp_c.push(p.var_bound - par.x0[i]);
        lp_rows.push(up.clone());
        lp_c.push(p.var_bound + par.x0[i]);
        lp_rows.push(-up);
    }
    let b = match mode {
        Mode::Margin => {
            let mut row = DVector::zeros(m);
            row[t_idx] = T::one();
            lp_c.push(opts.margin_cap);
            lp_rows.push(row);
            let mut b = DVector::zeros(m);
            b[t_idx] = T::one();
            b
        }
        Mode::Objective => {
            let c = p.objective.clone().unwrap_or_else(|| DVector::zeros(p.nvars()));
            -(par.z.transpose() * c)
        }
    };
    let lp_a = if lp_rows.is_empty() { DMatrix::zeros(0, m) } else { DMatrix::from_fn(lp_rows.len(), m, |i, j| lp_rows[i][j]) };
    Sdp { m, b, blocks, lp: LpBlock { c: DVector::from_vec(lp_c), a: lp_a } }
}

/// Independent check of a candidate point: returns
/// `(min slack, worst constraint, equality residual, passes)`.
pub fn verify_point<T: Scalar>(p: &LmiProblem<T>, x: &DVector<T>) -> (T, String, T, bool) {
    let eps = p.margin();
    let scale = p.scale();
    let mut worst = T::max_value().unwrap();
    let mut worst_name = String::new();
    let mut ok = true;
    for con in &p.constraints {
        let f = con.f.eval(x);
        let lmin = min_sym_eig(&f);
        let (required, tol) = if con.strict { (eps + con.margin, T::zero()) } else { (con.margin, T::lit(1e-9) * scale) };
        let slack = lmin - required;
        if slack < worst {
            worst = slack;
            worst_name = con.name.clone();
        }
        if slack < -tol || !lmin.is_finite() {
            ok = false;
        }
    }
    let mut eq_res = T::zero();
    for eq in &p.equalities {
        let v = eq.coeffs.iter().fold(-eq.rhs, |a, (&k, &c)| a + c * x[k]);
        eq_res = eq_res.max(v.abs());
    }
    if eq_res > T::lit(1e-8) * scale {
        ok = false;
    }
    (worst, worst_name, eq_res, ok)
}

fn diagnostics<T: Scalar>(sol: &SdpSolution<T>, worst: String) -> Diagnostics {
    Diagnostics {
        iterations: sol.iterations,
        primal_obj: sol.primal_obj.to_f64_lossy(),
        dual_obj: sol.dual_obj.to_f64_lossy(),
        primal_infeas: sol.primal_infeas.to_f64_lossy(),
        dual_infeas: sol.dual_infeas.to_f64_lossy(),
        message: sol.message.clone(),
        worst_constraint: worst,
    }
}

fn failed<T: Scalar>(msg: String, status: Status) -> Feasibility<T> {
    Feasibility {
        status,
        x: None,
        margin: T::zero(),
        min_slack: T::zero(),
        eq_residual: T::zero(),
        diagnostics: Diagnostics { message: msg, ..Default::default() },
    }
}

/// Decides feasibility of the strict constraints (with the problem margin) and
/// non-strict constraints, maximizing a common margin. If an objective is
/// present, a feasible problem is subsequently optimized.
/// Residual below which the matrix-side objective is trusted as an upper
/// bound on the margin.
const INFEASIBILITY_RESIDUAL: f64 = 1e-6;

pub fn solve_feasibility<T: Scalar>(p: &LmiProblem<T>) -> Feasibility<T> {
    solve_with(p, &SolveOptions::default())
}

pub fn solve_with<T: Scalar>(p: &LmiProblem<T>, opts: &SolveOptions<T>) -> Feasibility<T> {
    let par = match parameterize(p) {
        Ok(par) => par,
        Err(msg) if msg.contains("inconsistent") => return failed(msg, Status::Infeasible),
        Err(msg) => return failed(msg, Status::Inconclusive),
    };
    let sdp = build_sdp(p, &par, Mode::Margin, opts);
    let r = par.z.ncols();
    let to_x = |y: &DVector<T>| &par.x0 + &par.z * y.rows(0, r);
    let sol = sdp.solve(&opts.sdp, |y| {
        if y[r] <= T::zero() {
            return false;
        }
        verify_point(p, &to_x(y)).3
    });
    let x = to_x(&sol.y);
    let (slack, worst, eq_res, ok) = verify_point(p, &x);
    let margin = sol.y[r];
    let status = if ok {
        Status::Feasible
    } else if (sol.status == SdpStatus::Converged && margin < opts.infeasible_below)
        || (sol.primal_infeas <= T::lit(INFEASIBILITY_RESIDUAL) && sol.primal_obj < opts.infeasible_below)
    {
        // the matrix-side objective bounds the best margin from above once
        // its residual is negligible
        Status::Infeasible
    } else {
        Status::Inconclusive
    };
    let phase1 = Feasibility { status, x: Some(x), margin, min_slack: slack, eq_residual: eq_res, diagnostics: diagnostics(&sol, worst) };
    if status != Status::Feasible || p.objective.is_none() {
        return phase1;
    }
    let sdp = build_sdp(p, &par, Mode::Objective, opts);
    let sol = sdp.solve(&opts.sdp, |_| false);
    let x = &par.x0 + &par.z * &sol.y;
    let (slack, worst, eq_res, ok) = verify_point(p, &x);
    if !ok {
        let mut out = phase1;
        out.diagnostics.message = format!("objective phase failed verification ({}); returning the phase-1 witness", sol.message);
        return out;
    }
    Feasibility {
        status: Status::Feasible,
        x: Some(x),
        margin,
        min_slack: slack,
        eq_residual: eq_res,
        diagnostics: diagnostics(&sol, worst),
    }
}
