use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::SparseColMatRef;
use faer::{Mat, Side};

use super::sparse::{SparsePattern, SparseSystem};
use crate::error::{Error, Result};

/// Relative residual ‖Ax−b‖/‖b‖ every solve must reach.
pub const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

enum Numeric {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// A numeric factorization bound to the matrix it was computed from.
pub struct Factor {
    numeric: Numeric,
    system: SparseSystem,
    field: String,
}

impl Factor {
    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        match &self.numeric {
            Numeric::Cholesky(f) => f.solve_in_place(m.as_mut()),
            Numeric::Lu(f) => f.solve_in_place(m.as_mut()),
        }
        (0..b.len()).map(|i| m[(i, 0)]).collect()
    }

    /// Solves A·x = b with iterative refinement until the relative residual
    /// meets [`RESIDUAL_TOL`].
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let norm_b = norm(b);
        if norm_b == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.apply(b);
        let mut rel = f64::INFINITY;
        for step in 0..=REFINEMENT_STEPS {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::solver(&self.field, "non-finite solution (singular matrix)"));
            }
            let ax = self.system.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            rel = norm(&r) / norm_b;
            if rel <= RESIDUAL_TOL {
                return Ok(x);
            }
            if step < REFINEMENT_STEPS {
                let dx = self.apply(&r);
                for (xi, di) in x.iter_mut().zip(&dx) {
                    *xi += di;
                }
            }
        }
        Err(Error::solver(
            &self.field,
            format!("relative residual {rel:e} above {RESIDUAL_TOL:e} (matrix singular or ill-conditioned)"),
        ))
    }

    pub fn system(&self) -> &SparseSystem {
        &self.system
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct sparse solver for one field. The symbolic analysis is done once per
/// sparsity pattern and reused across numeric factorizations.
pub struct LinearSolver {
    field: String,
    pattern: Option<Arc<SparsePattern>>,
    llt: Option<SymbolicLlt<usize>>,
    lu: Option<SymbolicLu<usize>>,
}

impl LinearSolver {
    pub fn new(field: impl Into<String>) -> Self {
        LinearSolver {
            field: field.into(),
            pattern: None,
            llt: None,
            lu: None,
        }
    }

    pub fn field(&self) -> &str {
        &self.field
    }

    fn ensure_pattern(&mut self, pattern: &Arc<SparsePattern>) {
        let same = self.pattern.as_ref().is_some_and(|p| Arc::ptr_eq(p, pattern));
        if !same {
            self.pattern = Some(pattern.clone());
            self.llt = None;
            self.lu = None;
        }
    }

    /// Factorizes the system matrix: Cholesky when the system is flagged
    /// symmetric, LU with partial pivoting otherwise.
    pub fn factorize(&mut self, system: SparseSystem) -> Result<Factor> {
        self.ensure_pattern(&system.pattern);
        if system.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::solver(&self.field, "matrix has non-finite entries"));
        }
        let field = self.field.clone();
        let err = |what: &str, e: &dyn std::fmt::Debug| Error::solver(&field, format!("{what}: {e:?}"));
        let sym = system.pattern.symbolic().as_ref();
        let mat = SparseColMatRef::new(sym, &system.values);
        let numeric = if system.symmetric {
            if self.llt.is_none() {
                self.llt = Some(SymbolicLlt::try_new(sym, Side::Lower).map_err(|e| err("symbolic Cholesky", &e))?);
            }
            let symb = self.llt.clone().unwrap();
            Numeric::Cholesky(
                Llt::try_new_with_symbolic(symb, mat, Side::Lower)
                    .map_err(|e| err("Cholesky factorization (matrix not positive definite)", &e))?,
            )
        } else {
            if self.lu.is_none() {
                self.lu = Some(SymbolicLu::try_new(sym).map_err(|e| err("symbolic LU", &e))?);
            }
            let symb = self.lu.clone().unwrap();
            Numeric::Lu(Lu::try_new_with_symbolic(symb, mat).map_err(|e| err("LU factorization", &e))?)
        };
        Ok(Factor {
            numeric,
            system,
            field: self.field.clone(),
        })
    }

    /// Factorizes and solves with the system's own right-hand side.
    pub fn solve(&mut self, system: SparseSystem) -> Result<Vec<f64>> {
        let rhs = system.rhs.clone();
        self.factorize(system)?.solve(&rhs)
    }
}

/// One-shot solve of an assembled system.
pub fn solve(system: SparseSystem, field: &str) -> Result<Vec<f64>> {
    LinearSolver::new(field).solve(system)
}
