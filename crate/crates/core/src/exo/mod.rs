//! Exosystems `theta+ = S theta` and their harmonic sets.

mod frequency;

pub use frequency::{parse_frequency, Frequency};

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{Complex, DMatrix, DVector};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::linalg::{complex_singular_values, eig, to_complex};
use crate::scalar::{cabs, unit_phasor, Cplx, Scalar};

/// Eigenvalue modulus tolerance for the unit-circle assumption.
pub const UNIT_MODULUS_TOL: f64 = 1e-8;
/// Two harmonics closer than this (radians) are the same harmonic.
pub const ANGLE_TOL: f64 = 1e-9;
/// Default cap on the size of a harmonic closure.
pub const DEFAULT_CLOSURE_CAP: usize = 64;

/// Validated exosystem matrix with cached spectrum.
#[derive(Clone, Debug)]
pub struct Exosystem<T: Scalar> {
    s: DMatrix<T>,
    spectrum: Vec<Cplx<T>>,
}

impl<T: Scalar> Exosystem<T> {
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn spectrum(&self) -> &[Cplx<T>] {
        &self.spectrum
    }

    pub fn step(&self, theta: &DVector<T>) -> Result<DVector<T>> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension(format!("parameter state has length {}, exosystem dimension is {}", theta.len(), self.dim())));
        }
        Ok(&self.s * theta)
    }

    /// Harmonic set generated by the spectrum.
    pub fn harmonics(&self, policy: DegreePolicy) -> Result<HarmonicSet<T>> {
        harmonic_closure(&self.spectrum, policy)
    }
}

/// Checks that every eigenvalue of `S` lies on the unit circle and that `S`
/// is diagonalizable.
pub fn validate_exosystem<T: Scalar>(s: DMatrix<T>) -> Result<Exosystem<T>> {
    let spectrum = eig(&s)?;
    for l in &spectrum {
        let r = cabs(*l);
        if (r - T::one()).abs() > T::lit(UNIT_MODULUS_TOL) {
            return Err(Error::Assumption(format!("exosystem eigenvalue {:.6}{:+.6}j has modulus {:.9}, expected 1", l.re, l.im, r)));
        }
    }
    check_diagonalizable(&s, &spectrum)?;
    Ok(Exosystem { s, spectrum })
}

/// Geometric multiplicity of every eigenvalue cluster must equal its algebraic
/// multiplicity.
fn check_diagonalizable<T: Scalar>(s: &DMatrix<T>, spectrum: &[Cplx<T>]) -> Result<()> {
    let n = s.nrows();
    let cluster_tol = T::lit(1e-6);
    let rank_tol = T::lit(1e-7) * T::one().max(crate::numkit::linalg::max_abs(s));
    let sc = to_complex(s);
    let mut seen: Vec<Cplx<T>> = Vec::new();
    for &l in spectrum {
        if seen.iter().any(|&m| cabs(m - l) <= cluster_tol) {
            continue;
        }
        seen.push(l);
        let alg = spectrum.iter().filter(|&&m| cabs(m - l) <= cluster_tol).count();
        if alg == 1 {
            continue;
        }
        let shifted = &sc - DMatrix::<Cplx<T>>::identity(n, n) * l;
        let sv = complex_singular_values(&shifted)?;
        let geo = sv.iter().filter(|&&x| x <= rank_tol).count();
        if geo < alg {
            return Err(Error::Assumption(format!(
                "exosystem matrix is not diagonalizable: eigenvalue {:.6}{:+.6}j has algebraic multiplicity {alg} but only {geo} eigenvectors",
                l.re, l.im
            )));
        }
    }
    Ok(())
}

pub fn step_exosystem<T: Scalar>(exo: &Exosystem<T>, theta: &DVector<T>) -> Result<DVector<T>> {
    exo.step(theta)
}

/// How far products of source eigenvalues are enumerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreePolicy {
    /// Iterate to a fixpoint, failing beyond `cap` elements.
    Closure { cap: usize },
    /// All products of total degree at most `d`.
    MaxDegree(usize),
}

impl DegreePolicy {
    pub fn closure() -> Self {
        DegreePolicy::Closure { cap: DEFAULT_CLOSURE_CAP }
    }
}

impl fmt::Display for DegreePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreePolicy::Closure { cap } => write!(f, "closure(cap={cap})"),
            DegreePolicy::MaxDegree(d) => write!(f, "max_degree={d}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Harmonic<T: Scalar> {
    value: Cplx<T>,
    /// angle / pi reduced to (-1, 1] when known exactly
    exact: Option<Ratio<i64>>,
}

impl<T: Scalar> Harmonic<T> {
    fn one() -> Self {
        Self { value: Complex::new(T::one(), T::zero()), exact: Some(Ratio::from_integer(0)) }
    }

    fn mul(&self, other: &Self) -> Self {
        let p = self.value * other.value;
        let value = p / cabs(p);
        let exact = match (self.exact, other.exact) {
            (Some(a), Some(b)) => Some(reduce_half_turns(a + b)),
            _ => None,
        };
        match exact {
            Some(r) => Self { value: exact_phasor(r), exact },
            None => Self { value, exact },
        }
    }

    fn same(&self, other: &Self) -> bool {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => cabs(self.value - other.value) <= T::lit(ANGLE_TOL),
        }
    }

    fn angle(&self) -> T {
        self.value.im.atan2(self.value.re)
    }
}

/// Maps `r` (angle in units of pi) into `(-1, 1]`.
fn reduce_half_turns(r: Ratio<i64>) -> Ratio<i64> {
    let two = Ratio::from_integer(2);
    let mut x = r % two;
    if x <= Ratio::from_integer(-1) {
        x += two;
    } else if x > Ratio::from_integer(1) {
        x -= two;
    }
    x
}

fn exact_phasor<T: Scalar>(r: Ratio<i64>) -> Cplx<T> {
    // snap the quarter turns so 1, j, -1, -j are exact
    let four = r * Ratio::from_integer(2);
    if four.is_integer() {
        return match four.to_integer().rem_euclid(4) {
            0 => Complex::new(T::one(), T::zero()),
            1 => Complex::new(T::zero(), T::one()),
            2 => Complex::new(-T::one(), T::zero()),
            _ => Complex::new(T::zero(), -T::one()),
        };
    }
    let angle = T::pi() * T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64);
    unit_phasor(angle)
}

/// The set of harmonics `{ lambda^alpha }` generated by a tuple of
/// unit-modulus eigenvalues.
#[derive(Clone, Debug)]
pub struct HarmonicSet<T: Scalar> {
    items: Vec<Harmonic<T>>,
    source: Vec<Cplx<T>>,
    policy: DegreePolicy,
}

impl<T: Scalar> HarmonicSet<T> {
    pub fn values(&self) -> Vec<Cplx<T>> {
        self.items.iter().map(|h| h.value).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn source_eigenvalues(&self) -> &[Cplx<T>] {
        &self.source
    }

    pub fn policy(&self) -> DegreePolicy {
        self.policy
    }

    /// Angles in `(-pi, pi]`, in the stored order.
    pub fn angles(&self) -> Vec<T> {
        self.items.iter().map(|h| h.angle()).collect()
    }

    /// Angles as exact multiples of pi, when every harmonic is known exactly.
    pub fn exact_angles(&self) -> Option<Vec<Ratio<i64>>> {
        self.items.iter().map(|h| h.exact).collect()
    }

    pub fn contains(&self, w: Cplx<T>) -> bool {
        self.items.iter().any(|h| cabs(h.value - w) <= T::lit(ANGLE_TOL))
    }

    pub fn contains_one(&self) -> bool {
        self.contains(Complex::new(T::one(), T::zero()))
    }

    pub fn is_conjugation_closed(&self) -> bool {
        self.items.iter().all(|h| self.contains(h.value.conj()))
    }

    /// If the set is exactly the group of `N`-th roots of unity, returns `N`.
    pub fn cyclic_order(&self) -> Option<usize> {
        let n = self.items.len();
        if let Some(exact) = self.exact_angles() {
            let ok = exact.iter().all(|r| {
                let k = *r * Ratio::from_integer(n as i64) / Ratio::from_integer(2);
                k.is_integer()
            });
            return ok.then_some(n);
        }
        let step = unit_phasor(T::two_pi() / T::lit(n as f64));
        let mut w = Complex::new(T::one(), T::zero());
        for _ in 0..n {
            if !self.contains(w) {
                return None;
            }
            w *= step;
        }
        Some(n)
    }

    /// Frequencies in `[0, pi]` represented by the set, ascending.
    pub fn frequencies(&self) -> Vec<T> {
        let mut f: Vec<T> = self.angles().into_iter().filter(|a| *a >= -T::lit(ANGLE_TOL)).map(|a| a.abs()).collect();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        f
    }

    /// `(re, im)` pairs for serialization.
    pub fn as_pairs(&self) -> Vec<[f64; 2]> {
        self.items.iter().map(|h| [h.value.re.to_f64_lossy(), h.value.im.to_f64_lossy()]).collect()
    }

    /// Human-readable form such as `{0, ±pi/3, ±2pi/3, pi}`.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        for h in &self.items {
            let a = h.angle();
            if a < -T::lit(ANGLE_TOL) {
                continue;
            }
            let zero = a.abs() <= T::lit(ANGLE_TOL);
            let pi = (a - T::pi()).abs() <= T::lit(ANGLE_TOL);
            let body = match h.exact {
                Some(r) => format_pi_multiple(r),
                None => format!("{:.6}", a.to_f64_lossy()),
            };
            parts.push(if zero || pi { body } else { format!("±{body}") });
        }
        format!("{{{}}}", parts.join(", "))
    }
}

fn format_pi_multiple(r: Ratio<i64>) -> String {
    let (n, d) = (*r.numer(), *r.denom());
    match (n, d) {
        (0, _) => "0".into(),
        (1, 1) => "pi".into(),
        (1, d) => format!("pi/{d}"),
        (n, 1) => format!("{n}pi"),
        (n, d) => format!("{n}pi/{d}"),
    }
}

fn sort_items<T: Scalar>(items: &mut [Harmonic<T>]) {
    // 0 first, then increasing |angle|, positive before negative
    items.sort_by(|a, b| {
        let (x, y) = (a.angle(), b.angle());
        let key = |t: T| (t.abs(), if t < T::zero() { 1 } else { 0 });
        let (kx, ky) = (key(x), key(y));
        if (kx.0 - ky.0).abs() <= T::lit(ANGLE_TOL) {
            kx.1.cmp(&ky.1)
        } else {
            kx.0.partial_cmp(&ky.0).unwrap_or(Ordering::Equal)
        }
    });
}

fn closure_of<T: Scalar>(gens: Vec<Harmonic<T>>, policy: DegreePolicy) -> Result<Vec<Harmonic<T>>> {
    let mut gens_all = gens.clone();
    for g in &gens {
        let c = Harmonic { value: g.value.conj(), exact: g.exact.map(|r| reduce_half_turns(-r)) };
        if !gens_all.iter().any(|h| h.same(&c)) {
            gens_all.push(c);
        }
    }
    let mut all = vec![Harmonic::one()];
    let mut frontier = all.clone();
    let (max_deg, cap) = match policy {
        DegreePolicy::Closure { cap } => (usize::MAX, cap),
        DegreePolicy::MaxDegree(d) => (d, usize::MAX),
    };
    let mut degree = 0;
    while degree < max_deg && !frontier.is_empty() {
        let mut next = Vec::new();
        for f in &frontier {
            for g in &gens_all {
                let p = f.mul(g);
                if !all.iter().any(|h| h.same(&p)) && !next.iter().any(|h: &Harmonic<T>| h.same(&p)) {
                    next.push(p);
                }
            }
        }
        all.extend(next.iter().copied());
        if all.len() > cap {
            return Err(Error::ClosureOverflow { cap });
        }
        frontier = next;
        degree += 1;
    }
    // max-degree sets need not be closed under conjugation when the source
    // tuple is not; the generators were conjugate-completed above, so they are.
    sort_items(&mut all);
    Ok(all)
}

/// `Omega_lambda = { lambda^alpha }` under the given degree policy.
pub fn harmonic_closure<T: Scalar>(lambda: &[Cplx<T>], policy: DegreePolicy) -> Result<HarmonicSet<T>> {
    for l in lambda {
        if (cabs(*l) - T::one()).abs() > T::lit(UNIT_MODULUS_TOL) {
            return Err(Error::Assumption(format!("source eigenvalue {:.6}{:+.6}j is not on the unit circle", l.re, l.im)));
        }
    }
    let gens = lambda.iter().map(|&l| Harmonic { value: l / cabs(l), exact: None }).collect();
    let items = closure_of(gens, policy)?;
    Ok(HarmonicSet { items, source: lambda.to_vec(), policy })
}

/// Harmonic set from frequencies in `[0, pi]`: each `0 < theta < pi`
/// contributes `(e^{j theta}, e^{-j theta})`, `0` contributes `1` and `pi`
/// contributes `-1`. Frequencies given as rational multiples of pi are
/// tracked exactly.
pub fn harmonics_from_frequencies<T: Scalar>(freqs: &[Frequency], policy: DegreePolicy) -> Result<HarmonicSet<T>> {
    let mut gens = Vec::new();
    let mut source = Vec::new();
    for f in freqs {
        let theta = f.radians();
        if !(0.0..=std::f64::consts::PI + ANGLE_TOL).contains(&theta) {
            return Err(Error::Domain(format!("frequency {theta} outside [0, pi]")));
        }
        let h = match f.pi_multiple() {
            Some(r) => Harmonic { value: exact_phasor(r), exact: Some(reduce_half_turns(r)) },
            None => Harmonic { value: unit_phasor(T::lit(theta)), exact: None },
        };
        source.push(h.value);
        let is_real = h.value.im.abs() <= T::lit(ANGLE_TOL);
        if !is_real {
            source.push(h.value.conj());
        }
        gens.push(h);
    }
    let items = closure_of(gens, policy)?;
    Ok(HarmonicSet { items, source, policy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rot(t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    }

    #[test]
    fn rotation_is_valid() {
        let e = validate_exosystem(rot(PI / 3.0)).unwrap();
        assert_eq!(e.spectrum().len(), 2);
    }

    #[test]
    fn contraction_rejected() {
        let err = validate_exosystem(DMatrix::<f64>::identity(2, 2) * 0.9).unwrap_err();
        assert!(matches!(err, Error::Assumption(ref m) if m.contains("0.9")));
    }

    #[test]
    fn jordan_block_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(validate_exosystem(s), Err(Error::Assumption(_))));
    }

    #[test]
    fn identity_is_diagonalizable() {
        assert!(validate_exosystem(DMatrix::<f64>::identity(3, 3)).is_ok());
    }

    #[test]
    fn exact_sixth_roots() {
        let f = parse_frequency("pi/3").unwrap();
        let h = harmonics_from_frequencies::<f64>(&[f], DegreePolicy::closure()).unwrap();
        assert_eq!(h.len(), 6);
        assert_eq!(h.cyclic_order(), Some(6));
        assert_eq!(h.describe(), "{0, ±pi/3, ±2pi/3, pi}");
    }

    #[test]
    fn irrational_overflows() {
        let h = harmonics_from_frequencies::<f64>(&[Frequency::from_radians(1.0)], DegreePolicy::closure());
        assert!(matches!(h, Err(Error::ClosureOverflow { cap: 64 })));
        let h = harmonics_from_frequencies::<f64>(&[Frequency::from_radians(1.0)], DegreePolicy::MaxDegree(1)).unwrap();
        assert_eq!(h.len(), 3);
    }
}
