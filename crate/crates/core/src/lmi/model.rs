//! Affine matrix expressions over a flat vector of scalar decision variables.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkit::linalg::{is_symmetric, max_abs};
use crate::scalar::Scalar;

/// `F(x) = F_0 + sum_i x_i F_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMatrix<T: Scalar> {
    constant: DMatrix<T>,
    terms: BTreeMap<usize, DMatrix<T>>,
}

impl<T: Scalar> AffineMatrix<T> {
    pub fn constant(m: DMatrix<T>) -> Self {
        Self { constant: m, terms: BTreeMap::new() }
    }

    pub fn zeros(r: usize, c: usize) -> Self {
        Self::constant(DMatrix::zeros(r, c))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn scalar_const(v: T) -> Self {
        Self::constant(DMatrix::from_element(1, 1, v))
    }

    /// The 1x1 expression `x_i`.
    pub fn var(i: usize) -> Self {
        Self::var_times(i, DMatrix::from_element(1, 1, T::one()))
    }

    /// `x_i M`.
    pub fn var_times(i: usize, m: DMatrix<T>) -> Self {
        let mut terms = BTreeMap::new();
        let (r, c) = m.shape();
        terms.insert(i, m);
        Self { constant: DMatrix::zeros(r, c), terms }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn constant_part(&self) -> &DMatrix<T> {
        &self.constant
    }

    pub fn terms(&self) -> &BTreeMap<usize, DMatrix<T>> {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    fn map(&self, f: impl Fn(&DMatrix<T>) -> DMatrix<T>) -> Self {
        Self { constant: f(&self.constant), terms: self.terms.iter().map(|(&k, v)| (k, f(v))).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "affine add shape mismatch");
        let mut out = self.clone();
        out.constant += &other.constant;
        for (&k, v) in &other.terms {
            match out.terms.get_mut(&k) {
                Some(w) => *w += v,
                None => {
                    out.terms.insert(k, v.clone());
                }
            }
        }
        out
    }

    pub fn add_const(&self, m: &DMatrix<T>) -> Self {
        let mut out = self.clone();
        out.constant += m;
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(|m| -m)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|m| m * s)
    }

    /// `L F`.
    pub fn left(&self, l: &DMatrix<T>) -> Self {
        self.map(|m| l * m)
    }

    /// `F R`.
    pub fn right(&self, r: &DMatrix<T>) -> Self {
        self.map(|m| m * r)
    }

    /// `L F R`.
    pub fn congruence(&self, l: &DMatrix<T>, r: &DMatrix<T>) -> Self {
        self.map(|m| l * m * r)
    }

    pub fn transpose(&self) -> Self {
        self.map(|m| m.transpose())
    }

    /// `(F + F^T) / 2`.
    pub fn sym(&self) -> Self {
        self.map(|m| (m + m.transpose()) * T::lit(0.5))
    }

    /// Product of a 1x1 affine expression with a constant matrix.
    pub fn scalar_times(&self, m: &DMatrix<T>) -> Self {
        assert_eq!(self.shape(), (1, 1), "scalar_times needs a 1x1 expression");
        Self { constant: m * self.constant[(0, 0)], terms: self.terms.iter().map(|(&k, v)| (k, m * v[(0, 0)])).collect() }
    }

    pub fn eval(&self, x: &DVector<T>) -> DMatrix<T> {
        let mut out = self.constant.clone();
        for (&k, v) in &self.terms {
            out += v * x[k];
        }
        out
    }

    pub fn entry(&self, i: usize, j: usize) -> Self {
        self.map(|m| DMatrix::from_element(1, 1, m[(i, j)]))
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    /// Horizontal concatenation.
    pub fn hcat(parts: &[&Self]) -> Self {
        let rows = parts[0].nrows();
        let cols: usize = parts.iter().map(|p| p.ncols()).sum();
        let mut out = Self::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            assert_eq!(p.nrows(), rows, "hcat row mismatch");
            out.place(p, 0, c0);
            c0 += p.ncols();
        }
        out
    }

    pub fn vcat(parts: &[&Self]) -> Self {
        let cols = parts[0].ncols();
        let rows: usize = parts.iter().map(|p| p.nrows()).sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for p in parts {
            assert_eq!(p.ncols(), cols, "vcat column mismatch");
            out.place(p, r0, 0);
            r0 += p.nrows();
        }
        out
    }

    /// Block matrix from rows of blocks.
    pub fn blocks(rows: &[&[&Self]]) -> Self {
        let row_exprs: Vec<Self> = rows.iter().map(|r| Self::hcat(r)).collect();
        let refs: Vec<&Self> = row_exprs.iter().collect();
        Self::vcat(&refs)
    }

    fn place(&mut self, p: &Self, r0: usize, c0: usize) {
        let (r, c) = p.shape();
        self.constant.view_mut((r0, c0), (r, c)).copy_from(&p.constant);
        let (nr, nc) = self.shape();
        for (&k, v) in &p.terms {
            let slot = self.terms.entry(k).or_insert_with(|| DMatrix::zeros(nr, nc));
            slot.view_mut((r0, c0), (r, c)).copy_from(v);
        }
    }

    pub fn is_symmetric(&self) -> bool {
        is_symmetric(&self.constant) && self.terms.values().all(is_symmetric)
    }

    pub fn max_abs_constant(&self) -> T {
        max_abs(&self.constant)
    }
}

impl<T: Scalar> From<DMatrix<T>> for AffineMatrix<T> {
    fn from(m: DMatrix<T>) -> Self {
        Self::constant(m)
    }
}

/// Sum `sum_j c_j M_j` with 1x1 affine coefficients.
pub fn combine<T: Scalar>(coeffs: &[AffineMatrix<T>], mats: &[DMatrix<T>]) -> AffineMatrix<T> {
    let (r, c) = mats[0].shape();
    coeffs.iter().zip(mats).fold(AffineMatrix::zeros(r, c), |acc, (k, m)| acc.add(&k.scalar_times(m)))
}

/// A named group of consecutive decision variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarBlock {
    pub label: String,
    pub start: usize,
    pub len: usize,
}

/// Allocator of decision variables.
#[derive(Clone, Debug, Default)]
pub struct VarSet {
    count: usize,
    blocks: Vec<VarBlock>,
}

/// Symmetric matrix variable.
#[derive(Clone, Debug)]
pub struct SymVar<T: Scalar> {
    pub n: usize,
    pub start: usize,
    pub expr: AffineMatrix<T>,
}

/// Full matrix variable.
#[derive(Clone, Debug)]
pub struct MatVar<T: Scalar> {
    pub rows: usize,
    pub cols: usize,
    pub start: usize,
    pub expr: AffineMatrix<T>,
}

impl<T: Scalar> SymVar<T> {
    pub fn value(&self, x: &DVector<T>) -> DMatrix<T> {
        self.expr.eval(x)
    }
}

impl<T: Scalar> MatVar<T> {
    pub fn value(&self, x: &DVector<T>) -> DMatrix<T> {
        self.expr.eval(x)
    }
}

impl VarSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    fn alloc(&mut self, label: &str, len: usize) -> usize {
        let start = self.count;
        self.count += len;
        self.blocks.push(VarBlock { label: label.to_string(), start, len });
        start
    }

    pub fn scalar<T: Scalar>(&mut self, label: &str) -> (usize, AffineMatrix<T>) {
        let i = self.alloc(label, 1);
        (i, AffineMatrix::var(i))
    }

    pub fn sym_matrix<T: Scalar>(&mut self, label: &str, n: usize) -> SymVar<T> {
        let start = self.alloc(label, n * (n + 1) / 2);
        let mut expr = AffineMatrix::zeros(n, n);
        let mut k = start;
        for j in 0..n {
            for i in 0..=j {
                let mut e = DMatrix::zeros(n, n);
                e[(i, j)] = T::one();
                e[(j, i)] = T::one();
                expr.terms.insert(k, e);
                k += 1;
            }
        }
        SymVar { n, start, expr }
    }

    pub fn matrix<T: Scalar>(&mut self, label: &str, rows: usize, cols: usize) -> MatVar<T> {
        let start = self.alloc(label, rows * cols);
        let mut expr = AffineMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                let mut e = DMatrix::zeros(rows, cols);
                e[(i, j)] = T::one();
                expr.terms.insert(start + j * rows + i, e);
            }
        }
        MatVar { rows, cols, start, expr }
    }
}

/// One constraint `F(x) >= margin * I` (positive semidefinite).
#[derive(Clone, Debug)]
pub struct LmiConstraint<T: Scalar> {
    pub name: String,
    pub f: AffineMatrix<T>,
    pub margin: T,
    /// Strict constraints take part in the margin maximization.
    pub strict: bool,
}

/// Linear equality `sum_i coeffs_i x_i = rhs`.
#[derive(Clone, Debug)]
pub struct LinearEquality<T: Scalar> {
    pub name: String,
    pub coeffs: BTreeMap<usize, T>,
    pub rhs: T,
}

/// Semidefinite feasibility/optimization problem.
#[derive(Clone, Debug)]
pub struct LmiProblem<T: Scalar> {
    pub vars: VarSet,
    pub constraints: Vec<LmiConstraint<T>>,
    pub equalities: Vec<LinearEquality<T>>,
    /// Minimize `c^T x` when present.
    pub objective: Option<DVector<T>>,
    /// Box `|x_i| <= bound` keeping the search region compact.
    pub var_bound: T,
    /// Relative strictness margin; absolute margins are `rel_margin * scale()`.
    pub rel_margin: T,
}

pub const DEFAULT_REL_MARGIN: f64 = 1e-7;
pub const DEFAULT_VAR_BOUND: f64 = 1e6;

impl<T: Scalar> LmiProblem<T> {
    pub fn new(vars: VarSet) -> Self {
        Self {
            vars,
            constraints: Vec::new(),
            equalities: Vec::new(),
            objective: None,
            var_bound: T::lit(DEFAULT_VAR_BOUND),
            rel_margin: T::lit(DEFAULT_REL_MARGIN),
        }
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// Max absolute entry over the constant blocks of the strict constraints
    /// (at least 1). Normalization bounds do not set the scale.
    pub fn scale(&self) -> T {
        self.constraints.iter().filter(|c| c.strict).fold(T::one(), |a, c| a.max(c.f.max_abs_constant()))
    }

    fn check(&self, name: &str, f: &AffineMatrix<T>) -> Result<()> {
        if f.nrows() != f.ncols() {
            return Err(Error::Assembly(format!("constraint {name} is not square: {:?}", f.shape())));
        }
        if !f.is_symmetric() {
            return Err(Error::Assembly(format!("constraint {name} is not symmetric")));
        }
        if let Some(k) = f.max_var() {
            if k >= self.nvars() {
                return Err(Error::Assembly(format!("constraint {name} references unknown variable {k}")));
            }
        }
        Ok(())
    }

    /// Strict constraint `F(x) > 0`, realized with the problem margin.
    pub fn add_strict(&mut self, name: &str, f: AffineMatrix<T>) -> Result<()> {
        self.check(name, &f)?;
        self.constraints.push(LmiConstraint { name: name.to_string(), f, margin: T::zero(), strict: true });
        Ok(())
    }

    /// Non-strict constraint `F(x) >= 0`.
    pub fn add_psd(&mut self, name: &str, f: AffineMatrix<T>) -> Result<()> {
        self.check(name, &f)?;
        self.constraints.push(LmiConstraint { name: name.to_string(), f, margin: T::zero(), strict: false });
        Ok(())
    }

    /// `expr = rhs` for a 1x1 expression.
    pub fn add_equality(&mut self, name: &str, expr: &AffineMatrix<T>, rhs: T) -> Result<()> {
        if expr.shape() != (1, 1) {
            return Err(Error::Assembly(format!("equality {name} must be scalar")));
        }
        let coeffs = expr.terms().iter().map(|(&k, v)| (k, v[(0, 0)])).filter(|(_, v)| *v != T::zero()).collect();
        self.equalities.push(LinearEquality { name: name.to_string(), coeffs, rhs: rhs - expr.constant_part()[(0, 0)] });
        Ok(())
    }

    /// Entrywise `expr = 0`.
    pub fn add_matrix_equality(&mut self, name: &str, expr: &AffineMatrix<T>) -> Result<()> {
        for i in 0..expr.nrows() {
            for j in 0..expr.ncols() {
                self.add_equality(&format!("{name}[{i},{j}]"), &expr.entry(i, j), T::zero())?;
            }
        }
        Ok(())
    }

    pub fn set_objective(&mut self, c: DVector<T>) {
        self.objective = Some(c);
    }

    /// Absolute margin used for strict constraints.
    pub fn margin(&self) -> T {
        self.rel_margin * self.scale()
    }

    /// Equality matrix `E` and right-hand side `e`.
    pub fn equality_system(&self) -> (DMatrix<T>, DVector<T>) {
        let m = self.nvars();
        let mut e = DMatrix::zeros(self.equalities.len(), m);
        let mut rhs = DVector::zeros(self.equalities.len());
        for (r, eq) in self.equalities.iter().enumerate() {
            for (&k, &v) in &eq.coeffs {
                e[(r, k)] = v;
            }
            rhs[r] = eq.rhs;
        }
        (e, rhs)
    }
}
