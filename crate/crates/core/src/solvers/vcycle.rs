//! Multilevel V-cycle.

use std::sync::Arc;

use super::{axpy, residual, Solver};
use crate::la::CsrMatrix;

/// Symmetric V-cycle over levels `0..n`: `smoothers[l]` pre-relaxes with
/// `M⁻¹` and post-relaxes with `M⁻ᵀ` on each level but the last, where
/// `coarse` is applied.
pub struct VCycle {
    a: Vec<Arc<CsrMatrix>>,
    /// `p[l]`: level `l + 1` to level `l`.
    p: Vec<Arc<CsrMatrix>>,
    smoothers: Vec<Box<dyn Solver>>,
    coarse: Box<dyn Solver>,
}

impl VCycle {
    pub fn new(
        a: Vec<Arc<CsrMatrix>>,
        p: Vec<Arc<CsrMatrix>>,
        smoothers: Vec<Box<dyn Solver>>,
        coarse: Box<dyn Solver>,
    ) -> Self {
        assert!(!a.is_empty() && p.len() + 1 == a.len() && smoothers.len() == p.len());
        Self {
            a,
            p,
            smoothers,
            coarse,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.a.len()
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l + 1 == self.a.len() {
            self.coarse.iterate(b, x);
            return;
        }
        self.smoothers[l].iterate(b, x);
        let r = residual(&self.a[l], b, x);
        let rc = self.p[l].mul_vec_transpose(&r);
        let mut xc = vec![0.0; rc.len()];
        self.cycle(l + 1, &rc, &mut xc);
        axpy(1.0, &self.p[l].mul_vec(&xc), x);
        self.smoothers[l].iterate_transpose(b, x);
    }

    /// Stationary iteration with the V-cycle; returns the residual norms
    /// relative to the initial one.
    pub fn stationary(&self, b: &[f64], x: &mut [f64], rel_tol: f64, max_it: usize) -> Vec<f64> {
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let r0 = norm(&residual(&self.a[0], b, x));
        let mut hist = vec![1.0];
        for _ in 0..max_it {
            if r0 == 0.0 || *hist.last().unwrap() <= rel_tol {
                break;
            }
            self.iterate(b, x);
            hist.push(norm(&residual(&self.a[0], b, x)) / r0);
        }
        hist
    }
}

impl Solver for VCycle {
    fn size(&self) -> usize {
        self.a[0].n_rows()
    }
    fn iterate(&self, b: &[f64], x: &mut [f64]) {
        self.cycle(0, b, x);
    }
}
