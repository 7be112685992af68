//! Sparse and dense linear-algebra kernels.

pub mod cholesky;
pub mod dense;
pub mod io;
pub mod sparse;

pub use cholesky::{sparse_direct_solve, SkylineCholesky};
pub use dense::{dense_solve, svd_orthonormal_complement, DenseMatrix, Lu};
pub use sparse::{triple_product, CsrMatrix};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
