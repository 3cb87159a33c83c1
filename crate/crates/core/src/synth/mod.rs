//! Rate bisection, controller reconstruction and algorithm assembly.

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exo::HarmonicSet;
use crate::lmi::{
    assemble_analysis, assemble_controller_lmi, assemble_convex_synthesis, assemble_fixed_multiplier_synthesis, solve_with,
    CertificateMode, LambdaMode, SolveOptions, Status, SynthesisCertificate,
};
use crate::numkit::reduce::finite_horizon_balance;
use crate::numkit::{minimal_realization, series_connect, StateSpace};
use crate::plant::{build_h, verify_internal_model_structure, Algorithm, PlantRealization, STRUCTURE_TOL};
use crate::scalar::{Cplx, Scalar};
use crate::transform::{close_loop, direct_loop, transformed_family, MultiplierParams};

/// Reduction tolerance used when exporting a synthesized algorithm.
pub const EXPORT_REDUCTION_TOL: f64 = 1e-3;
/// Rate steps of one tolerance tried when reconstruction fails at the bisection rate.
pub const RECONSTRUCTION_STEPS: usize = 3;
/// Condition number above which the certificate completion is rejected.
pub const COMPLETION_COND_LIMIT: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct RateQuery<T: Scalar> {
    pub mu: T,
    pub l: T,
    pub harmonics: HarmonicSet<T>,
    pub ell: usize,
    pub rho_lo: T,
    pub rho_hi: T,
    pub tol: T,
}

impl<T: Scalar> RateQuery<T> {
    /// Query with the default bracket `(0.05, 0.9999)` and tolerance `1e-3`.
    pub fn new(mu: T, l: T, harmonics: HarmonicSet<T>, ell: usize) -> Self {
        Self { mu, l, harmonics, ell, rho_lo: T::lit(0.05), rho_hi: T::lit(0.9999), tol: T::lit(1e-3) }
    }

    pub fn with_bracket(mut self, lo: T, hi: T) -> Self {
        self.rho_lo = lo;
        self.rho_hi = hi;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    /// All violated preconditions, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.mu > T::zero() && self.mu < self.l) {
            v.push(format!("need 0 < mu < L, got mu = {}, L = {}", self.mu, self.l));
        }
        if !(self.rho_lo > T::zero() && self.rho_lo < self.rho_hi && self.rho_hi < T::one()) {
            v.push(format!("need 0 < rho_lo < rho_hi < 1, got ({}, {})", self.rho_lo, self.rho_hi));
        }
        if !(self.tol > T::zero()) {
            v.push(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.ell == 0 {
            v.push("ell must be at least 1".into());
        }
        if self.harmonics.is_empty() {
            v.push("harmonic set is empty".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(v.join("; ")))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BisectionStep {
    pub rho: f64,
    pub status: Status,
    pub margin: f64,
    pub tightened: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SynthesisDiagnostics {
    pub harmonic_set: String,
    pub ell: usize,
    pub tol: f64,
    pub trace: Vec<BisectionStep>,
    /// Inconclusive solves that were counted as infeasible.
    pub inconclusive: usize,
    /// Set when a rate above the returned one was found infeasible.
    pub monotonicity_warning: Option<String>,
    pub certificate_margin: f64,
    pub sylvester_residual: f64,
    pub reconstruction: Vec<String>,
    pub recertified_rate: Option<f64>,
    pub seconds: f64,
}

/// Result of the rate search alone.
#[derive(Clone, Debug)]
pub struct RateBracket<T: Scalar> {
    pub rho_star: T,
    /// Largest rate found infeasible (or the lower end of the bracket).
    pub rho_infeasible: T,
    pub certificate: SynthesisCertificate<T>,
    pub diagnostics: SynthesisDiagnostics,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult<T: Scalar> {
    pub rho_star: T,
    pub lambda_star: MultiplierParams<T>,
    /// Controller in original (un-weighted) coordinates.
    pub k: StateSpace<T>,
    /// Exported algorithm after reduction.
    pub g: Algorithm<T>,
    pub certificate: SynthesisCertificate<T>,
    pub diagnostics: SynthesisDiagnostics,
}

struct Probe<T: Scalar> {
    status: Status,
    cert: Option<SynthesisCertificate<T>>,
    margin: T,
}

fn probe<T: Scalar>(
    plant: &PlantRealization<T>,
    q: &RateQuery<T>,
    rho: T,
    opts: &SolveOptions<T>,
    diag: &mut SynthesisDiagnostics,
    tightened: bool,
) -> Result<Probe<T>> {
    let t0 = Instant::now();
    let lmi = assemble_convex_synthesis(plant, q.mu, q.l, rho, q.ell)?;
    let sol = solve_with(&lmi.problem, opts);
    let mut status = sol.status;
    let mut cert = None;
    if let (Status::Feasible, Some(x)) = (status, sol.x.as_ref()) {
        match lmi.certificate(plant, q.mu, rho, x) {
            Ok(c) => cert = Some(c),
            Err(e) => {
                log::debug!("certificate rejected at rho = {rho}: {e}");
                status = Status::Inconclusive;
            }
        }
    }
    if status == Status::Inconclusive {
        diag.inconclusive += 1;
    }
    diag.trace.push(BisectionStep {
        rho: rho.to_f64_lossy(),
        status,
        margin: sol.margin.to_f64_lossy(),
        tightened,
        seconds: t0.elapsed().as_secs_f64(),
    });
    Ok(Probe { status, cert, margin: sol.margin })
}

/// Bisection over the rate on the convex synthesis LMIs. Inconclusive
/// solves count as infeasible.
pub fn bisect_rate<T: Scalar>(q: &RateQuery<T>) -> Result<RateBracket<T>> {
    q.validate()?;
    let t0 = Instant::now();
    let plant = build_h(&q.harmonics)?;
    let opts = SolveOptions::default();
    let mut diag =
        SynthesisDiagnostics { harmonic_set: q.harmonics.describe(), ell: q.ell, tol: q.tol.to_f64_lossy(), ..Default::default() };

    let top = probe(&plant, q, q.rho_hi, &opts, &mut diag, false)?;
    let mut best = match top.cert {
        Some(c) => c,
        None if top.status == Status::Inconclusive => {
            return Err(Error::Inconclusive(format!("solver inconclusive at the top of the bracket rho = {}", q.rho_hi)))
        }
        None => return Err(Error::NoAlgorithm { rho_max: q.rho_hi.to_f64_lossy() }),
    };
    let mut hi = q.rho_hi;
    let mut lo = q.rho_lo;
    let bottom = probe(&plant, q, lo, &opts, &mut diag, false)?;
    if let Some(c) = bottom.cert {
        hi = lo;
        best = c;
    }
    while hi - lo > q.tol {
        let mid = (lo + hi) / T::lit(2.0);
        let p = probe(&plant, q, mid, &opts, &mut diag, false)?;
        match p.cert {
            Some(c) => {
                hi = mid;
                best = c;
            }
            None => lo = mid,
        }
    }

    // re-solve the upper end tightly; step up if it does not hold
    let tight = opts.tightened();
    let mut rho_star = hi;
    for _ in 0..5 {
        let p = probe(&plant, q, rho_star, &tight, &mut diag, true)?;
        if let Some(c) = p.cert {
            best = c;
            break;
        }
        let next = (rho_star + q.tol).min(q.rho_hi);
        if next == rho_star {
            break;
        }
        rho_star = next;
    }

    // monotonicity probe above the returned rate
    if rho_star < q.rho_hi {
        let above = (rho_star + T::lit(4.0) * q.tol).min((rho_star + q.rho_hi) / T::lit(2.0));
        let p = probe(&plant, q, above, &opts, &mut diag, false)?;
        if p.status != Status::Feasible {
            let msg = format!(
                "non-monotone feasibility: feasible at {rho_star}, {:?} at {above}; brackets [{lo}, {rho_star}] and [{rho_star}, {above}]",
                p.status
            );
            log::warn!("{msg}");
            diag.monotonicity_warning = Some(msg);
        }
    }
    diag.certificate_margin = best.min_slack.to_f64_lossy();
    diag.sylvester_residual = best.sylvester_residual.to_f64_lossy();
    diag.seconds = t0.elapsed().as_secs_f64();
    let _ = top.margin;
    Ok(RateBracket { rho_star, rho_infeasible: lo, certificate: best, diagnostics: diag })
}

/// Full pipeline: rate bisection, controller reconstruction, algorithm
/// assembly and a closed-loop re-check with the returned multiplier.
pub fn bisect_optimal_rate<T: Scalar>(q: &RateQuery<T>) -> Result<SynthesisResult<T>> {
    complete_synthesis(q, bisect_rate(q)?)
}

/// Reconstruction and export for a rate found by [`bisect_rate`].
pub fn complete_synthesis<T: Scalar>(q: &RateQuery<T>, br: RateBracket<T>) -> Result<SynthesisResult<T>> {
    let t0 = Instant::now();
    let plant = build_h(&q.harmonics)?;
    let mut diag = br.diagnostics;
    let mut rho = br.rho_star;
    let mut cert = br.certificate;
    // a certificate on the edge of feasibility may not admit a controller;
    // step the rate up and take a fresh multiplier from the convex LMIs
    let mut attempt = 0;
    let rec = loop {
        match reconstruct_weighted(&plant, q.mu, q.l, rho, &cert.lambda) {
            Ok(rec) => break rec,
            Err(e) if attempt < RECONSTRUCTION_STEPS && rho + q.tol < q.rho_hi => {
                attempt += 1;
                let next = rho + q.tol;
                diag.reconstruction.push(format!("reconstruction at rho = {rho} failed ({e}); retrying at {next}"));
                rho = next;
                if let Some(c) = probe(&plant, q, rho, &SolveOptions::default().tightened(), &mut diag, true)?.cert {
                    cert = c;
                }
            }
            Err(e) => return Err(e),
        }
    };
    let lambda = cert.lambda.clone();
    let k_weighted = rec.k_weighted;
    diag.reconstruction.extend(rec.notes);

    // closed-loop re-check at rho (allowing one tolerance step)
    let fam = transformed_family(&plant, q.mu, q.l, rho, q.ell)?;
    let cl = close_loop(&fam, &k_weighted)?;
    let an = assemble_analysis(&cl, rho, LambdaMode::Fixed(lambda.lambda().to_vec()))?;
    let st = solve_with(&an.problem, &SolveOptions::default()).status;
    if st != Status::Feasible {
        diag.reconstruction.push(format!("closed-loop analysis at rho* with lambda* returned {st:?}"));
    }

    let k = unweight(&k_weighted, rho)?;
    let g = build_algorithm(&k, &plant, q.mu, q.l, T::lit(EXPORT_REDUCTION_TOL))?.with_rho(rho);
    diag.seconds += t0.elapsed().as_secs_f64();
    diag.certificate_margin = cert.min_slack.to_f64_lossy();
    diag.sylvester_residual = cert.sylvester_residual.to_f64_lossy();
    Ok(SynthesisResult { rho_star: rho, lambda_star: lambda, k, g, certificate: cert, diagnostics: diag })
}

fn unweight<T: Scalar>(k: &StateSpace<T>, rho: T) -> Result<StateSpace<T>> {
    StateSpace::new(&k.a * rho, &k.b * rho, k.c.clone(), k.d.clone())
}

/// Two-stage reconstruction of a full-order controller for fixed `(rho, lambda)`.
/// The returned controller is in original coordinates.
pub fn reconstruct_controller<T: Scalar>(
    plant: &PlantRealization<T>,
    mu: T,
    l: T,
    rho: T,
    lambda: &MultiplierParams<T>,
) -> Result<StateSpace<T>> {
    let r = reconstruct_weighted(plant, mu, l, rho, lambda)?;
    unweight(&r.k_weighted, rho)
}

/// Controller in weighted coordinates together with the completed closed-loop
/// certificate (plant states first, then controller states).
#[derive(Clone, Debug)]
pub struct Reconstruction<T: Scalar> {
    pub k_weighted: StateSpace<T>,
    pub x_cl: DMatrix<T>,
    pub notes: Vec<String>,
}

pub fn reconstruct_weighted<T: Scalar>(
    plant: &PlantRealization<T>,
    mu: T,
    l: T,
    rho: T,
    lambda: &MultiplierParams<T>,
) -> Result<Reconstruction<T>> {
    let fam = transformed_family(plant, mu, l, rho, lambda.ell())?;
    let ph = fam.at(lambda.lambda())?;
    let mut notes = Vec::new();
    let opts = SolveOptions::default();

    // stage 1: certificate blocks for the fixed multiplier
    let fixed = assemble_fixed_multiplier_synthesis(&ph)?;
    let sol = solve_with(&fixed.problem, &opts);
    let stage1 = match (sol.status, sol.x.as_ref()) {
        (Status::Feasible, Some(x)) => Some((fixed.x_hat.value(x), fixed.y_hat.value(x))),
        (st, _) => {
            notes.push(format!("fixed-multiplier synthesis returned {st:?}; completing with free certificate"));
            None
        }
    };

    // stage 2: controller with the certificate held fixed, free as fallback
    let attempt = |mode: CertificateMode<T>, notes: &mut Vec<String>| -> Result<Option<(StateSpace<T>, DMatrix<T>)>> {
        let lmi = assemble_controller_lmi(&ph, mode)?;
        let sol = solve_with(&lmi.problem, &opts);
        match (sol.status, sol.x.as_ref()) {
            (Status::Feasible, Some(x)) => {
                let xv = lmi.x.eval(x);
                let yv = lmi.y.eval(x);
                recover(
                    &ph.a,
                    &ph.b_u,
                    &ph.c_y,
                    &xv,
                    &yv,
                    &lmi.k_hat.value(x),
                    &lmi.l_hat.value(x),
                    &lmi.m_hat.value(x),
                    &lmi.n_hat.value(x),
                )
                .map(Some)
            }
            (st, _) => {
                notes.push(format!("controller LMI returned {st:?}"));
                Ok(None)
            }
        }
    };
    if let Some((x, y)) = stage1 {
        match attempt(CertificateMode::Fixed { x, y }, &mut notes) {
            Ok(Some((k, x_cl))) => return Ok(Reconstruction { k_weighted: k, x_cl, notes }),
            Ok(None) => {}
            Err(e) => notes.push(format!("fixed-certificate completion failed: {e}")),
        }
    }
    match attempt(CertificateMode::Free, &mut notes)? {
        Some((k, x_cl)) => {
            notes.push("controller recovered with free certificate".into());
            Ok(Reconstruction { k_weighted: k, x_cl, notes })
        }
        None => {
            Err(Error::Reconstruction(format!("no controller found at rho = {rho}; try a slightly larger rate ({})", notes.join("; "))))
        }
    }
}

/// Inverts the linearizing change of variables.
#[allow(clippy::too_many_arguments)]
fn recover<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    k_hat: &DMatrix<T>,
    l_hat: &DMatrix<T>,
    m_hat: &DMatrix<T>,
    n_hat: &DMatrix<T>,
) -> Result<(StateSpace<T>, DMatrix<T>)> {
    let n = a.nrows();
    let e = DMatrix::<T>::identity(n, n) - x * y;
    let svd = e.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    if !(smin > T::zero()) || (smax / smin).to_f64_lossy() > COMPLETION_COND_LIMIT {
        return Err(Error::Reconstruction(format!(
            "I - XY is ill-conditioned (singular values {smin:e} .. {smax:e}); perturb the rate slightly"
        )));
    }
    let root = DMatrix::from_diagonal(&s.map(|v| v.sqrt()));
    let u = svd.u.as_ref().expect("requested") * &root;
    let v = svd.v_t.as_ref().expect("requested").transpose() * &root;
    let u_inv = u.clone().try_inverse().ok_or_else(|| Error::Reconstruction("completion factor U is singular".into()))?;
    let v_inv_t = v.clone().try_inverse().ok_or_else(|| Error::Reconstruction("completion factor V is singular".into()))?.transpose();
    let d_k = n_hat.clone();
    let c_k = (m_hat - &d_k * c * y) * &v_inv_t;
    let b_k = &u_inv * (l_hat - x * b * &d_k);
    let a_k = &u_inv * (k_hat - x * (a + b * &d_k * c) * y - &u * &b_k * c * y - x * b * &c_k * v.transpose()) * &v_inv_t;
    // closed-loop certificate: X_cl [[Y, I], [V^T, 0]] = [[I, X], [0, U^T]]
    let pi_y = crate::numkit::linalg::blocks(&[&[y, &DMatrix::identity(n, n)], &[&v.transpose(), &DMatrix::zeros(n, n)]]);
    let rhs = crate::numkit::linalg::blocks(&[&[&DMatrix::identity(n, n), x], &[&DMatrix::zeros(n, n), &u.transpose()]]);
    let pi_inv = pi_y.try_inverse().ok_or_else(|| Error::Reconstruction("completion is singular".into()))?;
    let x_cl = crate::numkit::linalg::sym(&(rhs * pi_inv));
    Ok((StateSpace::new(a_k, b_k, c_k, d_k)?, x_cl))
}

/// `G = K H`, reduced, with the algorithm invariants and the internal-model
/// structure verified.
pub fn build_algorithm<T: Scalar>(k: &StateSpace<T>, plant: &PlantRealization<T>, mu: T, l: T, reduce_tol: T) -> Result<Algorithm<T>> {
    let g = series_connect(k, &plant.state_space())?;
    let g = minimal_realization(&g, reduce_tol)?;
    let harmonics = plant.harmonics.values();
    let report = verify_internal_model_structure(&g.a, &g.b, &g.c, &harmonics, STRUCTURE_TOL)?;
    if !report.passed() {
        return Err(Error::Build(format!("reduction tolerance {reduce_tol} too aggressive:\n{report}")));
    }
    let mut d = g.d.clone();
    if d.amax() <= T::lit(1e-9) * T::one().max(g.c.amax()) {
        d.fill(T::zero());
    }
    let g = StateSpace::new(g.a, g.b, g.c, d)?;
    Ok(Algorithm::from_state_space(&g, mu, l)?.with_harmonics(harmonics))
}

/// Outcome of analysis-only rate certification.
#[derive(Clone, Debug, Serialize)]
pub struct RateCertificate {
    pub rho: f64,
    pub margin: f64,
    pub trace: Vec<BisectionStep>,
}

/// Smallest rate in the bracket certified by the analysis LMI on the direct
/// loop. When `harmonics` is given the structure check must pass first.
pub fn certify_rate<T: Scalar>(
    alg: &Algorithm<T>,
    mu: T,
    l: T,
    ell: usize,
    bracket: (T, T),
    tol: T,
    harmonics: Option<&[Cplx<T>]>,
) -> Result<RateCertificate> {
    if let Some(h) = harmonics {
        let report = verify_internal_model_structure(&alg.a, &alg.b, &alg.c, h, STRUCTURE_TOL)?;
        if !report.passed() {
            return Err(Error::Structure(format!("algorithm lacks the required internal model:\n{report}")));
        }
    }
    // a similarity to well-scaled coordinates when the realization is minimal
    let g = alg.state_space();
    let g = finite_horizon_balance(&g, 4 * g.order().max(1)).unwrap_or(g);
    let (mut lo, mut hi) = bracket;
    if !(mu > T::zero() && mu < l) {
        return Err(Error::Domain(format!("need 0 < mu < L, got mu = {mu}, L = {l}")));
    }
    if !(lo > T::zero() && lo < hi && hi < T::one()) {
        return Err(Error::Domain(format!("invalid bracket ({lo}, {hi})")));
    }
    let opts = SolveOptions::default();
    let mut trace = Vec::new();
    let check = |rho: T, trace: &mut Vec<BisectionStep>| -> Result<(bool, f64)> {
        let t0 = Instant::now();
        let cl = direct_loop(&g.a, &g.b, &g.c, mu, l, rho, ell)?;
        let lmi = assemble_analysis(&cl, rho, LambdaMode::Free)?;
        let sol = solve_with(&lmi.problem, &opts);
        let margin = sol.margin.to_f64_lossy();
        trace.push(BisectionStep {
            rho: rho.to_f64_lossy(),
            status: sol.status,
            margin,
            tightened: false,
            seconds: t0.elapsed().as_secs_f64(),
        });
        Ok((sol.status == Status::Feasible, margin))
    };
    let (ok, mut margin) = check(hi, &mut trace)?;
    if !ok {
        return Err(Error::NoAlgorithm { rho_max: hi.to_f64_lossy() });
    }
    if let (true, m) = check(lo, &mut trace)? {
        return Ok(RateCertificate { rho: lo.to_f64_lossy(), margin: m, trace });
    }
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        match check(mid, &mut trace)? {
            (true, m) => {
                hi = mid;
                margin = m;
            }
            (false, _) => lo = mid,
        }
    }
    Ok(RateCertificate { rho: hi.to_f64_lossy(), margin, trace })
}

impl<T: Scalar> fmt::Display for SynthesisResult<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.diagnostics;
        writeln!(f, "rho_star = {:.6}", self.rho_star.to_f64_lossy())?;
        writeln!(f, "harmonic set = {}", d.harmonic_set)?;
        writeln!(f, "ell = {}", d.ell)?;
        let lam: Vec<String> = self.lambda_star.lambda().iter().map(|v| format!("{:.6}", v.to_f64_lossy())).collect();
        writeln!(f, "lambda_star = [{}]", lam.join(", "))?;
        writeln!(f, "certificate margin = {:.3e}", d.certificate_margin)?;
        writeln!(f, "sylvester residual = {:.3e}", d.sylvester_residual)?;
        writeln!(f, "controller order = {}", self.k.order())?;
        writeln!(f, "algorithm order = {}", self.g.order())?;
        if let Some(w) = &d.monotonicity_warning {
            writeln!(f, "warning: {w}")?;
        }
        for n in &d.reconstruction {
            writeln!(f, "note: {n}")?;
        }
        writeln!(f, "bisection trace:")?;
        for s in &d.trace {
            write!(f, "  rho = {:.6}  {:?}{}  margin = {:.3e}", s.rho, s.status, if s.tightened { " (tight)" } else { "" }, s.margin)?;
            // wall-clock only on request, so plain reports stay reproducible
            if f.alternate() {
                write!(f, "  ({:.2}s)", s.seconds)?;
            }
            writeln!(f)?;
        }
        write!(f, "inconclusive solves = {}", d.inconclusive)
    }
}
