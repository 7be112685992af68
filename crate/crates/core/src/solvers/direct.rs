//! Sparse direct solve.

use std::sync::Arc;

use super::{axpy, residual, Solver};
use crate::error::Result;
use crate::la::{CsrMatrix, SkylineCholesky};

/// Relative diagonal shift used for semidefinite auxiliary blocks.
pub const SEMIDEFINITE_SHIFT: f64 = 1e-8;

pub struct Direct {
    a: Arc<CsrMatrix>,
    chol: SkylineCholesky,
}

impl Direct {
    pub fn new(a: Arc<CsrMatrix>) -> Result<Self> {
        let chol = SkylineCholesky::factor(&a)?;
        Ok(Self { a, chol })
    }

    /// Factors `A + ε max_i(a_ii) I`, for matrices that may be singular.
    pub fn shifted(a: &CsrMatrix, eps: f64) -> Result<Self> {
        Self::new(Arc::new(shift(a, eps)?))
    }
}

/// `A + ε max_i(a_ii) I`.
pub fn shift(a: &CsrMatrix, eps: f64) -> Result<CsrMatrix> {
    let dmax = a.diag().iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let s = eps * if dmax > 0.0 { dmax } else { 1.0 };
    a.add(&CsrMatrix::diagonal(&vec![s; a.n_rows()]), 1.0)
}

impl Solver for Direct {
    fn size(&self) -> usize {
        self.a.n_rows()
    }
    fn iterate(&self, b: &[f64], x: &mut [f64]) {
        let r = residual(&self.a, b, x);
        axpy(1.0, &self.chol.solve(&r), x);
    }
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.chol.solve(r)
    }
}
