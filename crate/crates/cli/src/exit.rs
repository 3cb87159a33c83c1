//! Exit-code contract.

use std::fmt;

use imsynth::Error;

pub const VALIDATION: u8 = 1;
pub const INFEASIBLE: u8 = 2;
pub const NUMERICAL: u8 = 3;
pub const IO: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    /// All violations in one report.
    pub fn validation(violations: Vec<String>) -> Self {
        let mut message = format!("invalid input ({} problem{}):", violations.len(), if violations.len() == 1 { "" } else { "s" });
        for v in &violations {
            message.push_str("\n  - ");
            message.push_str(v);
        }
        Self { code: VALIDATION, message }
    }

    pub fn io(e: impl fmt::Display) -> Self {
        Self { code: IO, message: format!("I/O error: {e}") }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error: {}", self.message)
    }
}

pub fn code_for(e: &Error) -> u8 {
    match e {
        Error::Domain(_)
        | Error::Dimension(_)
        | Error::Constraint(_)
        | Error::Parse(_)
        | Error::Assumption(_)
        | Error::ClosureOverflow { .. } => VALIDATION,
        Error::NoAlgorithm { .. } | Error::Structure(_) => INFEASIBLE,
        Error::Io(_) => IO,
        Error::Numerical(_)
        | Error::Inconclusive(_)
        | Error::Reconstruction(_)
        | Error::Build(_)
        | Error::Assembly(_)
        | Error::Oracle(_)
        | Error::Divergence(_) => NUMERICAL,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = code_for(&e);
        if code == VALIDATION {
            return CliError::validation(vec![e.to_string()]);
        }
        Self { code, message: e.to_string() }
    }
}
