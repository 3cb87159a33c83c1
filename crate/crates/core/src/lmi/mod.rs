//! LMI modeling, the semidefinite engine and the problem assemblers.

pub mod assemble;
pub mod dump;
pub mod model;
pub mod sdp;
pub mod solve;

pub use assemble::*;
pub use dump::dump_problem;
pub use model::{combine, AffineMatrix, LmiConstraint, LmiProblem, MatVar, SymVar, VarSet};
pub use solve::{solve_feasibility, solve_with, verify_point, Diagnostics, Feasibility, SolveOptions, Status};
