//! Pointwise smoothers and the hybrid smoother.

use std::sync::Arc;

use super::{axpy, residual, Solver};
use crate::error::{Error, Result};
use crate::la::CsrMatrix;

/// `d_i = a_ii + Σ_{j≠i} |a_ij|`.
fn l1_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    (0..a.n_rows())
        .map(|i| {
            let d: f64 = a
                .row(i)
                .map(|(j, v)| if j == i { v } else { v.abs() })
                .sum();
            if a.get(i, i) == 0.0 || d <= 0.0 {
                Err(Error::ZeroDiagonal(i))
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// l1-Jacobi.
pub struct Jacobi {
    a: Arc<CsrMatrix>,
    inv_diag: Vec<f64>,
    sweeps: usize,
}

impl Jacobi {
    pub fn new(a: Arc<CsrMatrix>, sweeps: usize) -> Result<Self> {
        let inv_diag = l1_diagonal(&a)?.iter().map(|d| 1.0 / d).collect();
        Ok(Self {
            a,
            inv_diag,
            sweeps,
        })
    }
}

impl Solver for Jacobi {
    fn size(&self) -> usize {
        self.a.n_rows()
    }
    fn iterate(&self, b: &[f64], x: &mut [f64]) {
        for _ in 0..self.sweeps {
            let r = residual(&self.a, b, x);
            for ((xi, ri), di) in x.iter_mut().zip(&r).zip(&self.inv_diag) {
                *xi += ri * di;
            }
        }
    }
}

/// l1 symmetric Gauss-Seidel: each sweep is a forward then a backward pass.
pub struct L1Sgs {
    a: Arc<CsrMatrix>,
    diag: Vec<f64>,
    sweeps: usize,
}

impl L1Sgs {
    pub fn new(a: Arc<CsrMatrix>, sweeps: usize) -> Result<Self> {
        let diag = l1_diagonal(&a)?;
        Ok(Self { a, diag, sweeps })
    }

    fn relax_row(&self, i: usize, b: &[f64], x: &mut [f64]) {
        let ax: f64 = self.a.row(i).map(|(j, v)| v * x[j]).sum();
        x[i] += (b[i] - ax) / self.diag[i];
    }
}

impl Solver for L1Sgs {
    fn size(&self) -> usize {
        self.a.n_rows()
    }
    fn iterate(&self, b: &[f64], x: &mut [f64]) {
        let n = self.size();
        for _ in 0..self.sweeps {
            for i in 0..n {
                self.relax_row(i, b, x);
            }
            for i in (0..n).rev() {
                self.relax_row(i, b, x);
            }
        }
    }
}

/// Hybrid smoother: a pointwise step on `A` followed by a correction from
/// the range of `D`, smoothed on `Dᵀ A D`.
pub struct Hybrid {
    a: Arc<CsrMatrix>,
    primary: Box<dyn Solver>,
    d: Arc<CsrMatrix>,
    aux: Box<dyn Solver>,
}

impl Hybrid {
    pub fn new(
        a: Arc<CsrMatrix>,
        primary: Box<dyn Solver>,
        d: Arc<CsrMatrix>,
        aux: Box<dyn Solver>,
    ) -> Self {
        Self { a, primary, d, aux }
    }

    fn aux_step(&self, b: &[f64], x: &mut [f64], transpose: bool) {
        let r = residual(&self.a, b, x);
        let rc = self.d.mul_vec_transpose(&r);
        let mut y = vec![0.0; self.aux.size()];
        if transpose {
            self.aux.iterate_transpose(&rc, &mut y);
        } else {
            self.aux.iterate(&rc, &mut y);
        }
        axpy(1.0, &self.d.mul_vec(&y), x);
    }
}

impl Solver for Hybrid {
    fn size(&self) -> usize {
        self.a.n_rows()
    }
    fn iterate(&self, b: &[f64], x: &mut [f64]) {
        self.primary.iterate(b, x);
        self.aux_step(b, x, false);
    }
    fn iterate_transpose(&self, b: &[f64], x: &mut [f64]) {
        self.aux_step(b, x, true);
        self.primary.iterate_transpose(b, x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn l1_diagonal_of_laplacian() {
        let d = l1_diagonal(&laplace_1d(4)).unwrap();
        assert_eq!(d, vec![3.0, 4.0, 4.0, 3.0]);
    }

    #[test]
    fn zero_diagonal_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]);
        assert!(matches!(
            L1Sgs::new(Arc::new(a), 1),
            Err(Error::ZeroDiagonal(1))
        ));
    }

    #[test]
    fn sgs_reduces_error_and_is_symmetric() {
        let a = Arc::new(laplace_1d(20));
        let s = L1Sgs::new(a.clone(), 2).unwrap();
        let n = 20;
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                s.apply(
                    &(0..n)
                        .map(|i| f64::from(u8::from(i == j)))
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                assert!((cols[i][j] - cols[j][i]).abs() < 1e-14);
            }
        }
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let r0 = residual(&a, &b, &x).iter().map(|v| v * v).sum::<f64>();
        for _ in 0..5 {
            s.iterate(&b, &mut x);
        }
        let r1 = residual(&a, &b, &x).iter().map(|v| v * v).sum::<f64>();
        assert!(r1 < r0);
    }
}
