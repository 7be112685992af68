//! Auxiliary-space preconditioner
//! `B r = M r + Π̂ B_H1 Π̂ᵀ r + D B_aux Dᵀ r`.

use std::sync::Arc;

use super::direct::{shift, Direct, SEMIDEFINITE_SHIFT};
use super::{axpy, residual, L1Sgs, Solver};
use crate::error::Result;
use crate::hierarchy::{masked_galerkin, Hierarchy};
use crate::la::CsrMatrix;

/// Additive combination of a smoother on `A` and subspace corrections
/// `T B Tᵀ`.
pub struct AuxSpace {
    a: Arc<CsrMatrix>,
    smoother: Box<dyn Solver>,
    blocks: Vec<(CsrMatrix, Box<dyn Solver>)>,
}

impl AuxSpace {
    pub fn new(
        a: Arc<CsrMatrix>,
        smoother: Box<dyn Solver>,
        blocks: Vec<(CsrMatrix, Box<dyn Solver>)>,
    ) -> Self {
        Self {
            a,
            smoother,
            blocks,
        }
    }

    /// Preconditioner for the system matrix of `h` on level `l`. The H1
    /// blocks are solved directly; for H(div) the auxiliary H(curl)-type
    /// block is itself an auxiliary-space preconditioner.
    pub fn for_level(h: &Hierarchy, l: usize, sweeps: usize) -> Result<Self> {
        let a = h.a[l].clone();
        let smoother: Box<dyn Solver> = Box::new(L1Sgs::new(a.clone(), sweeps)?);
        let vflags = h.vector_boundary(l);
        let pi = h.masked_pi_hat(l, h.form);
        let a_h1 = masked_galerkin(&a, &pi, &vflags)?;
        let h1: Box<dyn Solver> = Box::new(Direct::shifted(&a_h1, SEMIDEFINITE_SHIFT)?);
        let d = h.masked_derivative(l, h.form - 1);
        let a_aux = masked_galerkin(&a, &d, h.boundary(l, h.form - 1))?;
        let aux: Box<dyn Solver> = if h.form == 2 {
            Box::new(Direct::new(Arc::new(a_aux))?)
        } else {
            // Dᵀ A D is semidefinite here (its kernel holds the gradients);
            // the gradient block of the nested preconditioner vanishes.
            let a_c = Arc::new(shift(&a_aux, SEMIDEFINITE_SHIFT)?);
            let pi2 = h.masked_pi_hat(l, 2);
            let a_h1c = masked_galerkin(&a_c, &pi2, &vflags)?;
            let inner: Box<dyn Solver> = Box::new(Direct::shifted(&a_h1c, SEMIDEFINITE_SHIFT)?);
            Box::new(AuxSpace::new(
                a_c.clone(),
                Box::new(L1Sgs::new(a_c, sweeps)?),
                vec![(pi2, inner)],
            ))
        };
        Ok(Self::new(a, smoother, vec![(pi, h1), (d, aux)]))
    }
}

impl Solver for AuxSpace {
    fn size(&self) -> usize {
        self.a.n_rows()
    }
    fn iterate(&self, b: &[f64], x: &mut [f64]) {
        let r = residual(&self.a, b, x);
        axpy(1.0, &self.apply(&r), x);
    }
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut z = self.smoother.apply(r);
        for (t, solver) in &self.blocks {
            let y = solver.apply(&t.mul_vec_transpose(r));
            axpy(1.0, &t.mul_vec(&y), &mut z);
        }
        z
    }
}
