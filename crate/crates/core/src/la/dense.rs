use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.n_cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.n_cols + c]
    }
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    /// Builds a matrix whose columns are the given vectors (all of length `n_rows`).
    pub fn from_columns(n_rows: usize, cols: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(n_rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), n_rows);
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_cols).map(|j| self.column(j)).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, other.n_rows, "dense matmul shape");
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.n_cols..(i + 1) * other.n_cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Lower Cholesky factor `L` with `self = L L^T`.
    pub fn cholesky(&self) -> Result<DenseMatrix> {
        assert_eq!(self.n_rows, self.n_cols);
        let n = self.n_rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { row: j, pivot: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Solves `L y = b` for lower-triangular `self`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n_rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self[(i, k)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        y
    }

    /// Solves `L^T x = b` for lower-triangular `self`.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n_rows;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self[(k, i)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }

    /// Singular value decomposition by one-sided Jacobi rotations.
    pub fn svd(&self) -> Svd {
        one_sided_jacobi(self)
    }

    /// Numerical rank: singular values above `rel_tol * sigma_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let s = self.svd().singular_values;
        let smax = s.iter().fold(0.0f64, |m, &v| m.max(v));
        if smax == 0.0 {
            return 0;
        }
        s.iter().filter(|&&v| v > rel_tol * smax).count()
    }

    /// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        self.symmetric_eigen().0
    }

    /// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and
    /// the matching eigenvectors as columns.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, DenseMatrix) {
        assert_eq!(self.n_rows, self.n_cols);
        let n = self.n_rows;
        let mut a = self.clone();
        let mut v = DenseMatrix::identity(n);
        let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
        let vals = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vecs = DenseMatrix::zeros(n, n);
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                vecs[(k, new)] = v[(k, old)];
            }
        }
        (vals, vecs)
    }
}

pub struct Svd {
    /// Left singular vectors as columns (n_rows x n_cols).
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    /// Right singular vectors as columns (n_cols x n_cols).
    pub v: DenseMatrix,
}

fn one_sided_jacobi(a: &DenseMatrix) -> Svd {
    // Work on columns of A (transposed storage for cache locality).
    let m = a.n_rows();
    let n = a.n_cols();
    let mut cols: Vec<Vec<f64>> = a.columns();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| a * b).sum() };
    // Columns collapsed to roundoff carry no rank; rotating them never converges.
    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt()
                    || gamma == 0.0
                    || alpha.min(beta) <= negligible
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                let (lo, hi) = v.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sig: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sig[j].partial_cmp(&sig[i]).unwrap());
    let mut u = DenseMatrix::zeros(m, n);
    let mut vm = DenseMatrix::zeros(n, n);
    let mut svals = Vec::with_capacity(n);
    for (new, &old) in order.iter().enumerate() {
        let s = sig[old];
        svals.push(s);
        for i in 0..m {
            u[(i, new)] = if s > 0.0 { cols[old][i] / s } else { 0.0 };
        }
        for i in 0..n {
            vm[(i, new)] = v[old][i];
        }
    }
    Svd {
        u,
        singular_values: svals,
        v: vm,
    }
}

/// LU factorisation with partial pivoting.
pub struct Lu {
    n: usize,
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &DenseMatrix) -> Result<Lu> {
        Self::factor_with_context(m, None)
    }

    pub fn factor_with_context(m: &DenseMatrix, context: Option<&str>) -> Result<Lu> {
        assert_eq!(m.n_rows(), m.n_cols(), "LU of non-square matrix");
        let n = m.n_rows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tol = 1e-14 * m.frobenius_norm();
        for k in 0..n {
            let (mut piv, mut best) = (k, lu[(k, k)].abs());
            for i in k + 1..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    piv = i;
                }
            }
            if best <= tol || best == 0.0 {
                return Err(Error::SingularLocalSystem {
                    context: context.map(str::to_string),
                });
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    lu.data.swap(k * n + j, piv * n + j);
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = (0..b.n_cols()).map(|j| self.solve(&b.column(j))).collect();
        DenseMatrix::from_columns(self.n, &cols)
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve_matrix(&DenseMatrix::identity(self.n))
    }
}

pub fn dense_solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if m.n_rows() != m.n_cols() || b.len() != m.n_rows() {
        return Err(Error::DimensionMismatch("dense_solve".into()));
    }
    Ok(Lu::factor(m)?.solve(b))
}

/// Orthonormal basis of `span(V)` with `span(W)` deflated (Euclidean inner
/// product). Directions whose singular value falls below `tol * sigma_max(V)`
/// are discarded.
pub fn svd_orthonormal_complement(v: &DenseMatrix, w: &DenseMatrix, tol: f64) -> DenseMatrix {
    let m = v.n_rows();
    if v.n_cols() == 0 {
        return DenseMatrix::zeros(m, 0);
    }
    let sigma_max = v.svd().singular_values.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return DenseMatrix::zeros(m, 0);
    }
    // Orthonormal basis of span(W).
    let mut wbasis: Vec<Vec<f64>> = Vec::new();
    if w.n_cols() > 0 {
        let ws = w.svd();
        let wmax = ws.singular_values.first().copied().unwrap_or(0.0);
        for (j, &s) in ws.singular_values.iter().enumerate() {
            if s > 1e-14 * wmax && s > 0.0 {
                wbasis.push(ws.u.column(j));
            }
        }
    }
    let mut cols = v.columns();
    // Two passes of classical Gram-Schmidt against the deflation basis.
    for _ in 0..2 {
        for c in cols.iter_mut() {
            for q in &wbasis {
                let d: f64 = c.iter().zip(q).map(|(a, b)| a * b).sum();
                c.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
            }
        }
    }
    let r = DenseMatrix::from_columns(m, &cols).svd();
    let kept: Vec<Vec<f64>> = r
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * sigma_max)
        .map(|(j, _)| r.u.column(j))
        .collect();
    DenseMatrix::from_columns(m, &kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_examples() {
        assert_eq!(
            dense_solve(&DenseMatrix::identity(2), &[4.0, 5.0]).unwrap(),
            vec![4.0, 5.0]
        );
        let d = DenseMatrix::from_row_major(2, 2, vec![2.0, 0.0, 0.0, 4.0]);
        assert_eq!(dense_solve(&d, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        let s = DenseMatrix::from_row_major(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            dense_solve(&s, &[1.0, 1.0]),
            Err(Error::SingularLocalSystem { .. })
        ));
    }

    #[test]
    fn complement_examples() {
        let one = DenseMatrix::from_columns(2, &[vec![1.0, 0.0]]);
        assert_eq!(svd_orthonormal_complement(&one, &one, 1e-10).n_cols(), 0);
        let eye = DenseMatrix::identity(2);
        let c = svd_orthonormal_complement(&eye, &one, 1e-10);
        assert_eq!(c.n_cols(), 1);
        assert!(c[(0, 0)].abs() < 1e-14);
        assert!((c[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(m.cholesky().is_err());
    }

    #[test]
    fn symmetric_eigen_of_diagonal_plus_coupling() {
        let m = DenseMatrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let ev = m.symmetric_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
