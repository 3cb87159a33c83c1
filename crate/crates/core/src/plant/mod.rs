//! Internal model `H(z) = z^{n-1} / prod (z - w)`, the generalized plant and
//! the exported algorithm type.

mod algorithm;

pub use algorithm::{Algorithm, AlgorithmFile, Provenance};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exo::HarmonicSet;
use crate::numkit::linalg::{complex_singular_values, eig, max_abs, to_complex};
use crate::numkit::{Polynomial, StateSpace, TransferFunction};
use crate::scalar::{cabs, Cplx, Scalar};

/// Controllable canonical realization of `H` for a harmonic set.
#[derive(Clone, Debug)]
pub struct PlantRealization<T: Scalar> {
    pub a_p: DMatrix<T>,
    pub b_p: DMatrix<T>,
    pub c_p: DMatrix<T>,
    pub harmonics: HarmonicSet<T>,
    den: Polynomial<T>,
}

impl<T: Scalar> PlantRealization<T> {
    pub fn n_p(&self) -> usize {
        self.a_p.nrows()
    }

    /// `prod (z - w)`.
    pub fn denominator(&self) -> &Polynomial<T> {
        &self.den
    }

    pub fn transfer_function(&self) -> TransferFunction<T> {
        TransferFunction::new(Polynomial::monomial(self.n_p() - 1), self.den.clone()).expect("nonzero denominator")
    }

    pub fn state_space(&self) -> StateSpace<T> {
        StateSpace::new(self.a_p.clone(), self.b_p.clone(), self.c_p.clone(), DMatrix::zeros(1, 1)).expect("conformal by construction")
    }
}

/// Builds `H` for the given harmonics. When the harmonics are exactly the
/// `N`-th roots of unity the denominator is `z^N - 1` with exact integer
/// coefficients.
pub fn build_h<T: Scalar>(harmonics: &HarmonicSet<T>) -> Result<PlantRealization<T>> {
    if harmonics.is_empty() {
        return Err(Error::Domain("empty harmonic set".into()));
    }
    if !harmonics.contains_one() {
        return Err(Error::Domain("harmonic set must contain 1 (fixed points would not be tracked)".into()));
    }
    if !harmonics.is_conjugation_closed() {
        return Err(Error::Domain("harmonic set is not closed under conjugation".into()));
    }
    let n = harmonics.len();
    let den = match harmonics.cyclic_order() {
        Some(order) => {
            let mut c = vec![T::zero(); order + 1];
            c[0] = -T::one();
            c[order] = T::one();
            Polynomial::new(c)
        }
        None => Polynomial::from_roots(&harmonics.values())?,
    };
    let tf = TransferFunction::new(Polynomial::monomial(n - 1), den.clone())?;
    let ss = tf.to_state_space()?;
    Ok(PlantRealization { a_p: ss.a, b_p: ss.b, c_p: ss.c, harmonics: harmonics.clone(), den })
}

/// Two-port plant `[z; y] = P [w; u]`: state `A_p`, inputs `(B_p, 0)`,
/// outputs `z = u` and `y = C_p x`.
#[derive(Clone, Debug)]
pub struct GeneralizedPlant<T: Scalar> {
    pub sys: StateSpace<T>,
}

pub fn build_generalized_plant<T: Scalar>(plant: &PlantRealization<T>) -> GeneralizedPlant<T> {
    let n = plant.n_p();
    let mut b = DMatrix::zeros(n, 2);
    b.set_column(0, &plant.b_p.column(0));
    let mut c = DMatrix::zeros(2, n);
    c.set_row(1, &plant.c_p.row(0));
    let mut d = DMatrix::zeros(2, 2);
    d[(0, 1)] = T::one();
    GeneralizedPlant { sys: StateSpace::new(plant.a_p.clone(), b, c, d).expect("conformal by construction") }
}

impl<T: Scalar> GeneralizedPlant<T> {
    /// Closes `u = K y` and returns the map `w -> z`.
    pub fn close(&self, k: &StateSpace<T>) -> Result<StateSpace<T>> {
        let p = &self.sys;
        if !k.is_siso() {
            return Err(Error::Dimension("controller must be SISO".into()));
        }
        let (n, nk) = (p.order(), k.order());
        let bw = p.b.columns(0, 1).into_owned();
        let bu = p.b.columns(1, 1).into_owned();
        let cz = p.c.rows(0, 1).into_owned();
        let cy = p.c.rows(1, 1).into_owned();
        let dzu = p.d[(0, 1)];
        let a = crate::numkit::linalg::blocks(&[&[&(&p.a + &bu * &k.d * &cy), &(&bu * &k.c)], &[&(&k.b * &cy), &k.a]]);
        let b = crate::numkit::linalg::vcat(&[&bw, &DMatrix::zeros(nk, 1)]);
        let c = crate::numkit::linalg::hcat(&[&(&cz + &k.d * &cy * dzu), &(&k.c * dzu)]);
        debug_assert_eq!(a.nrows(), n + nk);
        StateSpace::new(a, b, c, DMatrix::zeros(1, 1))
    }
}

/// Per-harmonic outcome of the structural check.
#[derive(Clone, Debug, Serialize)]
pub struct HarmonicCheck {
    pub omega: [f64; 2],
    pub eig_distance: f64,
    pub eig_pass: bool,
    pub sigma_min: f64,
    pub sigma_threshold: f64,
    pub nonresonance_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub tol: f64,
    pub checks: Vec<HarmonicCheck>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.eig_pass && c.nonresonance_pass)
    }

    pub fn failures(&self) -> Vec<&HarmonicCheck> {
        self.checks.iter().filter(|c| !(c.eig_pass && c.nonresonance_pass)).collect()
    }
}

impl std::fmt::Display for StructureReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "internal-model structure check (tol {:e}):", self.tol)?;
        for c in &self.checks {
            writeln!(
                f,
                "  omega = {:+.6}{:+.6}j  eig distance {:.3e} [{}]  sigma_min {:.3e} (>= {:.3e}) [{}]",
                c.omega[0],
                c.omega[1],
                c.eig_distance,
                if c.eig_pass { "ok" } else { "FAIL" },
                c.sigma_min,
                c.sigma_threshold,
                if c.nonresonance_pass { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "  overall: {}", if self.passed() { "pass" } else { "FAIL" })
    }
}

/// Default tolerance of the structural check.
pub const STRUCTURE_TOL: f64 = 1e-6;

/// Checks, for every harmonic `w`, that `A` has an eigenvalue at `w` and that
/// `[[A - wI, B], [C, 0]]` has full rank.
pub fn verify_internal_model_structure<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    harmonics: &[Cplx<T>],
    tol: f64,
) -> Result<StructureReport> {
    let n = a.nrows();
    let spectrum = eig(a)?;
    let scale = 1.0f64.max(max_abs(a).to_f64_lossy()).max(max_abs(b).to_f64_lossy()).max(max_abs(c).to_f64_lossy());
    let threshold = tol * scale;
    let mut checks = Vec::with_capacity(harmonics.len());
    for &w in harmonics {
        let dist = spectrum.iter().map(|&l| cabs(l - w).to_f64_lossy()).fold(f64::INFINITY, f64::min);
        let mut m = DMatrix::<Cplx<T>>::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&(to_complex(a) - DMatrix::<Cplx<T>>::identity(n, n) * w));
        m.view_mut((0, n), (n, 1)).copy_from(&to_complex(b));
        m.view_mut((n, 0), (1, n)).copy_from(&to_complex(c));
        let sigma = complex_singular_values(&m)?.last().copied().unwrap_or(T::zero()).to_f64_lossy();
        checks.push(HarmonicCheck {
            omega: [w.re.to_f64_lossy(), w.im.to_f64_lossy()],
            eig_distance: dist,
            eig_pass: dist <= tol,
            sigma_min: sigma,
            sigma_threshold: threshold,
            nonresonance_pass: sigma >= threshold,
        });
    }
    Ok(StructureReport { tol, checks })
}
