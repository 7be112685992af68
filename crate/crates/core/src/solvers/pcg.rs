//! Preconditioned conjugate gradients.
//!
//! The search direction update uses the Polak-Ribière formula, which keeps
//! the iteration well behaved when the preconditioner is itself an inexact
//! iterative solve (as with a fixed number of inner PCG steps on the
//! coarsest level). For a fixed linear preconditioner it coincides with
//! standard PCG in exact arithmetic.

use std::sync::Arc;

use super::{axpy, dot, residual, Solver};
use crate::error::{Error, Result};
use crate::la::CsrMatrix;

/// Default relative tolerance in the preconditioner-induced norm.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `sqrt(rᵀBr / r0ᵀBr0)` after each iteration, starting with 1.
    pub history: Vec<f64>,
}

impl PcgResult {
    pub fn rel_residual(&self) -> f64 {
        *self.history.last().unwrap_or(&0.0)
    }
}

/// Solves `A x = b` from `x0`. Stops when `sqrt(rᵀBr) <= rel_tol sqrt(r0ᵀBr0)`
/// or after `max_it` iterations (then `converged` is false and `x` is the
/// last, lowest-energy-error iterate).
pub fn pcg(
    a: &CsrMatrix,
    prec: &dyn Solver,
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_it: usize,
) -> Result<PcgResult> {
    let mut x = x0.to_vec();
    let mut r = residual(a, b, &x);
    let mut z = prec.apply(&r);
    let mut delta = dot(&r, &z);
    if delta < 0.0 {
        return Err(Error::IndefinitePreconditioner(delta));
    }
    let delta0 = delta;
    let mut history = vec![if delta0 > 0.0 { 1.0 } else { 0.0 }];
    if delta0 == 0.0 {
        return Ok(PcgResult {
            x,
            iterations: 0,
            converged: true,
            history,
        });
    }
    let mut p = z.clone();
    for it in 1..=max_it {
        let q = a.mul_vec(&p);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::IndefinitePreconditioner(pq));
        }
        let alpha = delta / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        let z_new = prec.apply(&r);
        let delta_new = dot(&r, &z_new);
        if delta_new < 0.0 {
            return Err(Error::IndefinitePreconditioner(delta_new));
        }
        history.push((delta_new / delta0).sqrt());
        if delta_new.sqrt() <= rel_tol * delta0.sqrt() {
            return Ok(PcgResult {
                x,
                iterations: it,
                converged: true,
                history,
            });
        }
        let beta = (delta_new - dot(&r, &z)) / delta;
        for (pi, zi) in p.iter_mut().zip(&z_new) {
            *pi = zi + beta * *pi;
        }
        z = z_new;
        delta = delta_new;
    }
    Ok(PcgResult {
        x,
        iterations: max_it,
        converged: false,
        history,
    })
}

/// PCG with a fixed iteration budget, used as a solver component.
pub struct Pcg {
    a: Arc<CsrMatrix>,
    prec: Box<dyn Solver>,
    pub rel_tol: f64,
    pub max_iterations: usize,
}

impl Pcg {
    pub fn new(
        a: Arc<CsrMatrix>,
        prec: Box<dyn Solver>,
        rel_tol: f64,
        max_iterations: usize,
    ) -> Self {
        Self {
            a,
            prec,
            rel_tol,
            max_iterations,
        }
    }

    pub fn solve(&self, b: &[f64], x0: &[f64]) -> Result<PcgResult> {
        pcg(
            &self.a,
            self.prec.as_ref(),
            b,
            x0,
            self.rel_tol,
            self.max_iterations,
        )
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }
}

impl Solver for Pcg {
    fn size(&self) -> usize {
        self.a.n_rows()
    }
    fn iterate(&self, b: &[f64], x: &mut [f64]) {
        // Inner solves cannot report failures through the stationary
        // interface; an indefinite inner preconditioner leaves `x` unchanged
        // and surfaces in the outer iteration instead.
        if let Ok(res) = self.solve(b, x) {
            x.copy_from_slice(&res.x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Identity, Jacobi};
    use super::*;

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let res = pcg(&a, &Identity(5), &b, &[0.0; 5], 1e-6, 10).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
        assert_eq!(res.x, b);
    }

    #[test]
    fn exact_initial_guess_takes_no_iterations() {
        let a = CsrMatrix::diagonal(&[2.0, 3.0]);
        let res = pcg(&a, &Identity(2), &[2.0, 3.0], &[1.0, 1.0], 1e-6, 10).unwrap();
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn jacobi_on_diagonal_is_exact() {
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        let a = Arc::new(CsrMatrix::diagonal(&d));
        let j = Jacobi::new(a.clone(), 1).unwrap();
        let res = pcg(&a, &j, &vec![1.0; 100], &[0.0; 100], 1e-6, 10).unwrap();
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let d: Vec<f64> = (1..=50).map(f64::from).collect();
        let a = CsrMatrix::diagonal(&d);
        let res = pcg(&a, &Identity(50), &vec![1.0; 50], &[0.0; 50], 1e-12, 3).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
        assert_eq!(res.history.len(), 4);
    }

    struct Negative;
    impl Solver for Negative {
        fn size(&self) -> usize {
            2
        }
        fn iterate(&self, b: &[f64], x: &mut [f64]) {
            axpy(-1.0, b, x);
        }
    }

    #[test]
    fn indefinite_preconditioner_is_reported() {
        let a = CsrMatrix::identity(2);
        assert!(matches!(
            pcg(&a, &Negative, &[1.0, 0.0], &[0.0; 2], 1e-6, 5),
            Err(Error::IndefinitePreconditioner(_))
        ));
    }
}
