//! Iterative and direct solvers for the hierarchy's system matrices.
//!
//! Every solver is a stationary correction `x <- x + B (b - A x)` for its
//! own matrix `A`; applied to a zero initial guess it acts as the
//! preconditioner `B`.

pub mod aux;
pub mod config;
pub mod direct;
pub mod pcg;
pub mod smoothers;
pub mod vcycle;

pub use aux::AuxSpace;
pub use config::{SolverLibrary, SolverSpec};
pub use direct::Direct;
pub use pcg::{pcg, Pcg, PcgResult};
pub use smoothers::{Hybrid, Jacobi, L1Sgs};
pub use vcycle::VCycle;

/// Default number of smoothing sweeps.
pub const DEFAULT_SWEEPS: usize = 2;

pub trait Solver: Send + Sync {
    fn size(&self) -> usize;

    /// `x <- x + B (b - A x)`.
    fn iterate(&self, b: &[f64], x: &mut [f64]);

    /// `x <- x + Bᵀ (b - A x)`.
    fn iterate_transpose(&self, b: &[f64], x: &mut [f64]) {
        self.iterate(b, x)
    }

    /// `B r`.
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.size()];
        self.iterate(r, &mut x);
        x
    }
}

/// Identity preconditioner.
pub struct Identity(pub usize);

impl Solver for Identity {
    fn size(&self) -> usize {
        self.0
    }
    fn iterate(&self, b: &[f64], x: &mut [f64]) {
        for (xi, bi) in x.iter_mut().zip(b) {
            *xi += bi;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `b - A x`.
pub(crate) fn residual(a: &crate::la::CsrMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}
