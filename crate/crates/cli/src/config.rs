//! Run configuration: TOML file merged under command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use imsynth::exo::{harmonics_from_frequencies, parse_frequency, DegreePolicy, Frequency, HarmonicSet};
use serde::{Deserialize, Serialize};

/// Every knob of every command. Missing values fall back to per-command
/// defaults.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Strong convexity parameter.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Smoothness parameter.
    #[arg(long = "L", global = true)]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Exosystem frequency ("0", "pi/3", "2pi/5", or radians); repeatable.
    #[arg(long = "freq", global = true)]
    pub freq: Vec<String>,
    /// Exosystem matrix, rows separated by ';' and entries by ','.
    #[arg(long = "S", global = true, value_parser = parse_matrix)]
    #[serde(rename = "S")]
    pub s: Option<Vec<Vec<f64>>>,
    /// Number of multiplier taps.
    #[arg(long, global = true)]
    pub ell: Option<usize>,
    #[arg(long, global = true)]
    pub rho_lo: Option<f64>,
    #[arg(long, global = true)]
    pub rho_hi: Option<f64>,
    /// Bisection tolerance on the rate.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// "closure" or "degree:<d>".
    #[arg(long, global = true)]
    pub harmonics: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub objective: Option<ObjectiveChoice>,
    #[arg(long, global = true)]
    pub a: Option<f64>,
    #[arg(long, global = true)]
    pub b: Option<f64>,
    /// Quadratic cost matrix, same syntax as --S.
    #[arg(long = "Q", global = true, value_parser = parse_matrix)]
    #[serde(rename = "Q")]
    pub q: Option<Vec<Vec<f64>>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub theta0: Option<Vec<f64>>,
    /// Exosystem orders for figure1.
    #[arg(long, global = true, value_delimiter = ',')]
    pub orders: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Averaging window for asymptotic errors.
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Number of frequencies in the sweep grid on [0, pi].
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Baseline to simulate instead of an algorithm file.
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodChoice>,
    /// Algorithm file (JSON).
    #[arg(long, global = true)]
    pub algorithm: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Rate for the simulated envelope (defaults to the algorithm's rate).
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Sweep: also reconstruct, export and re-certify every point.
    #[arg(long, global = true)]
    pub full: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveChoice {
    Logistic,
    Quadratic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[value(alias = "gd")]
    GradientDescent,
    #[value(alias = "tm")]
    TripleMomentum,
}

pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';')
        .map(|row| row.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad matrix entry '{}': {e}", v.trim()))).collect())
        .collect()
}

macro_rules! take {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    /// `self` with every value set in `flags` overriding it.
    pub fn merged(mut self, flags: &RunConfig) -> Self {
        take!(
            self, flags, mu, l, s, ell, rho_lo, rho_hi, tol, harmonics, objective, a, b, q, theta0, orders, seeds, seed, steps, window,
            points, method, algorithm, out, rho, full
        );
        if !flags.freq.is_empty() {
            self.freq = flags.freq.clone();
        }
        self
    }

    pub fn policy(&self, default: DegreePolicy) -> Result<DegreePolicy, String> {
        match self.harmonics.as_deref().map(str::trim) {
            None => Ok(default),
            Some("closure") => Ok(DegreePolicy::closure()),
            Some(s) => s
                .strip_prefix("degree:")
                .or_else(|| s.strip_prefix("degree="))
                .and_then(|d| d.trim().parse().ok())
                .map(DegreePolicy::MaxDegree)
                .ok_or_else(|| format!("harmonic policy must be 'closure' or 'degree:<d>', got '{s}'")),
        }
    }

    pub fn frequencies(&self) -> Result<Vec<Frequency>, String> {
        self.freq.iter().map(|f| parse_frequency(f).map_err(|e| format!("frequency '{f}': {e}"))).collect()
    }

    /// Harmonic set from `--freq` or, failing that, from `--S`.
    pub fn harmonic_set(&self, default: DegreePolicy) -> Result<Option<HarmonicSet<f64>>, String> {
        let policy = self.policy(default)?;
        if !self.freq.is_empty() {
            let f = self.frequencies()?;
            return harmonics_from_frequencies(&f, policy).map(Some).map_err(|e| e.to_string());
        }
        if let Some(s) = &self.s {
            let exo = imsynth::exo::validate_exosystem(matrix(s)?).map_err(|e| e.to_string())?;
            return exo.harmonics(policy).map(Some).map_err(|e| e.to_string());
        }
        Ok(None)
    }

    /// Checks the sector and rate parameters; one message per violation.
    pub fn common_violations(&self, mu: f64, l: f64) -> Vec<String> {
        let mut v = Vec::new();
        if !(mu > 0.0 && mu < l) {
            v.push(format!("need 0 < mu < L, got mu = {mu}, L = {l}"));
        }
        let (lo, hi) = (self.rho_lo.unwrap_or(0.05), self.rho_hi.unwrap_or(0.9999));
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            v.push(format!("need 0 < rho_lo < rho_hi < 1, got ({lo}, {hi})"));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                v.push(format!("tol must be positive, got {t}"));
            }
        }
        if self.ell == Some(0) {
            v.push("ell must be at least 1".into());
        }
        v
    }
}

pub fn matrix(rows: &[Vec<f64>]) -> Result<nalgebra::DMatrix<f64>, String> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err("matrix rows must be nonempty and of equal length".into());
    }
    Ok(nalgebra::DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}
