//! Plain-text dump of an assembled problem.
//!
//! One record per line, whitespace separated:
//!
//! ```text
//! # comment
//! vars <m>
//! lmi <constraint> <size> <strict:0|1> <name>
//! F <constraint> <block> <row> <col> <var> <coef>   (upper triangle, var 0 = constant, var k = x_{k-1})
//! eq <row> <var> <coef>                              (var 0 = right-hand side)
//! obj <var> <coef>
//! ```

use std::fmt::Write;

use super::model::LmiProblem;
use crate::scalar::Scalar;

pub fn dump_problem<T: Scalar>(p: &LmiProblem<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# imsynth LMI problem dump");
    let _ = writeln!(out, "vars {}", p.nvars());
    for (ci, c) in p.constraints.iter().enumerate() {
        let n = c.f.nrows();
        let _ = writeln!(out, "lmi {ci} {n} {} {}", u8::from(c.strict), c.name.replace(' ', "_"));
        let mut emit = |var: usize, m: &nalgebra::DMatrix<T>| {
            for j in 0..n {
                for i in 0..=j {
                    let v = m[(i, j)];
                    if v != T::zero() {
                        let _ = writeln!(out, "F {ci} 0 {i} {j} {var} {:e}", v.to_f64_lossy());
                    }
                }
            }
        };
        emit(0, c.f.constant_part());
        for (&k, m) in c.f.terms() {
            emit(k + 1, m);
        }
    }
    for (r, eq) in p.equalities.iter().enumerate() {
        let _ = writeln!(out, "eq {r} 0 {:e}", eq.rhs.to_f64_lossy());
        for (&k, &v) in &eq.coeffs {
            let _ = writeln!(out, "eq {r} {} {:e}", k + 1, v.to_f64_lossy());
        }
    }
    if let Some(c) = &p.objective {
        for (k, v) in c.iter().enumerate() {
            if *v != T::zero() {
                let _ = writeln!(out, "obj {} {:e}", k + 1, v.to_f64_lossy());
            }
        }
    }
    out
}
