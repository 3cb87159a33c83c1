use thiserror::Error;

/// Errors raised by the synthesis, analysis and simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error(
        "harmonic closure did not stabilize within {cap} elements \
         (eigenvalues are probably not roots of unity); use a max-degree policy instead"
    )]
    ClosureOverflow { cap: usize },

    #[error("multiplier outside the admissible set: {0}")]
    Constraint(String),

    #[error("LMI assembly error: {0}")]
    Assembly(String),

    #[error("no algorithm found: infeasible at the upper end of the bracket (largest rate tried {rho_max})")]
    NoAlgorithm { rho_max: f64 },

    #[error("solver inconclusive: {0}")]
    Inconclusive(String),

    #[error("internal-model structure check failed: {0}")]
    Structure(String),

    #[error("controller reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("algorithm build failed: {0}")]
    Build(String),

    #[error("optimizer oracle failed: {0}")]
    Oracle(String),

    #[error("simulation diverged: {0}")]
    Divergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
