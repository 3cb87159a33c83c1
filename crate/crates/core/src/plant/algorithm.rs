use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::linalg::{all_finite, eig, kernel_basis, max_abs};
use crate::numkit::StateSpace;
use crate::scalar::{cabs, Cplx, Scalar};

/// Where an algorithm came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// `synth`, `baseline:gradient_descent`, ...
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub harmonic_set: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(source: impl Into<String>) -> Self {
        Self { tool_version: env!("CARGO_PKG_VERSION").to_string(), source: source.into(), ..Default::default() }
    }
}

/// Strictly proper first-order method `x+ = A x + B w`, `z = C x`, applied
/// coordinatewise.
#[derive(Clone, Debug, PartialEq)]
pub struct Algorithm<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub mu: T,
    pub l: T,
    pub rho: Option<T>,
    pub harmonics: Vec<Cplx<T>>,
    pub provenance: Provenance,
}

impl<T: Scalar> Algorithm<T> {
    /// Validates dimensions and the fixed-point condition (eigenvalue at 1
    /// visible at the output).
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, mu: T, l: T) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.shape() != (n, 1) || c.shape() != (1, n) {
            return Err(Error::Dimension(format!(
                "algorithm matrices must be n x n, n x 1, 1 x n; got {:?}, {:?}, {:?}",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        if !(all_finite(&a) && all_finite(&b) && all_finite(&c)) {
            return Err(Error::Numerical("algorithm has non-finite entries".into()));
        }
        let alg = Self { a, b, c, mu, l, rho: None, harmonics: Vec::new(), provenance: Provenance::default() };
        alg.check_fixed_point()?;
        Ok(alg)
    }

    pub fn from_state_space(g: &StateSpace<T>, mu: T, l: T) -> Result<Self> {
        if !g.is_siso() {
            return Err(Error::Dimension("algorithm realization must be SISO".into()));
        }
        if !g.is_strictly_proper() {
            return Err(Error::Build(format!("algorithm must be strictly proper, D = {}", g.d[(0, 0)])));
        }
        Self::new(g.a.clone(), g.b.clone(), g.c.clone(), mu, l)
    }

    pub fn with_rho(mut self, rho: T) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_harmonics(mut self, h: Vec<Cplx<T>>) -> Self {
        self.harmonics = h;
        self
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn state_space(&self) -> StateSpace<T> {
        StateSpace::new(self.a.clone(), self.b.clone(), self.c.clone(), DMatrix::zeros(1, 1)).expect("validated")
    }

    /// `A` has an eigenvalue at 1 whose eigenvector is not annihilated by `C`.
    pub fn check_fixed_point(&self) -> Result<()> {
        let n = self.order();
        let dist =
            eig(&self.a)?.iter().map(|&l| cabs(l - Complex::new(T::one(), T::zero()))).fold(T::max_value().unwrap(), |a, b| a.min(b));
        if dist > T::lit(1e-6) {
            return Err(Error::Build(format!("A has no eigenvalue at 1 (closest at distance {dist:.3e})")));
        }
        let shifted = &self.a - DMatrix::<T>::identity(n, n);
        let mut ker = kernel_basis(&shifted, T::lit(1e-7))?;
        if ker.ncols() == 0 {
            ker = kernel_basis(&shifted, T::lit(1e-4))?;
        }
        let out = max_abs(&(&self.c * &ker));
        if ker.ncols() == 0 || out <= T::lit(1e-8) * T::one().max(max_abs(&self.c)) {
            return Err(Error::Build("the fixed-point mode at 1 is not observable from C".into()));
        }
        Ok(())
    }

    pub fn to_file(&self) -> AlgorithmFile {
        let rows = |m: &DMatrix<T>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_f64_lossy()).collect()).collect()
        };
        AlgorithmFile {
            format: ALGORITHM_FORMAT.to_string(),
            a: rows(&self.a),
            b: rows(&self.b),
            c: rows(&self.c),
            mu: self.mu.to_f64_lossy(),
            l: self.l.to_f64_lossy(),
            rho: self.rho.map(|r| r.to_f64_lossy()),
            harmonics: self.harmonics.iter().map(|w| [w.re.to_f64_lossy(), w.im.to_f64_lossy()]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_file(f: &AlgorithmFile) -> Result<Self> {
        if f.format != ALGORITHM_FORMAT {
            return Err(Error::Parse(format!("unknown algorithm format {:?}", f.format)));
        }
        let mat = |name: &str, r: &[Vec<f64>]| -> Result<DMatrix<T>> {
            let nr = r.len();
            let nc = r.first().map_or(0, |x| x.len());
            if r.iter().any(|x| x.len() != nc) {
                return Err(Error::Parse(format!("ragged matrix {name}")));
            }
            Ok(DMatrix::from_fn(nr, nc, |i, j| T::lit(r[i][j])))
        };
        let n = f.a.len();
        let a = if n == 0 { DMatrix::zeros(0, 0) } else { mat("A", &f.a)? };
        let alg = Self::new(a, mat("B", &f.b)?, mat("C", &f.c)?, T::lit(f.mu), T::lit(f.l))?;
        Ok(alg
            .with_harmonics(f.harmonics.iter().map(|p| Complex::new(T::lit(p[0]), T::lit(p[1]))).collect())
            .with_provenance(f.provenance.clone()))
        .map(|a: Self| match f.rho {
            Some(r) => a.with_rho(T::lit(r)),
            None => a,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub const ALGORITHM_FORMAT: &str = "imsynth-algorithm/1";

/// On-disk form of an [`Algorithm`] (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmFile {
    pub format: String,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default)]
    pub rho: Option<f64>,
    /// `[re, im]` pairs
    #[serde(default)]
    pub harmonics: Vec<[f64; 2]>,
    #[serde(default)]
    pub provenance: Provenance,
}
