use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::la::DenseMatrix;

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing inside each row, so every product
/// below sums in ascending column order and is bitwise reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 || col_indices.len() != values.len() {
            return Err(Error::DimensionMismatch("csr array lengths".into()));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != col_indices.len() {
            return Err(Error::DimensionMismatch("csr offsets".into()));
        }
        for r in 0..n_rows {
            if row_offsets[r] > row_offsets[r + 1] {
                return Err(Error::DimensionMismatch("offsets decreasing".into()));
            }
            let cols = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::DimensionMismatch(format!(
                    "row {r} columns not sorted/in range"
                )));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and exact
    /// zeros left after summation are dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
            rows[r].push((c, v));
        }
        Self::from_rows(n_cols, rows)
    }

    /// Builds from per-row (col, value) lists; each row is sorted and merged.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let rows = (0..d.n_rows())
            .map(|r| (0..d.n_cols()).map(|c| (c, d[(r, c)])).collect())
            .collect();
        Self::from_rows(d.n_cols(), rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }
    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_cols(&self, r: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[r]..self.row_offsets[r + 1]]
    }

    pub fn row_values(&self, r: usize) -> &[f64] {
        &self.values[self.row_offsets[r]..self.row_offsets[r + 1]]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = self.row_cols(r);
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_offsets[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "spmv: matrix has {} columns, vector has {}",
                self.n_cols,
                x.len()
            )));
        }
        Ok(self.mul_vec(x))
    }

    /// Unchecked product; panics on length mismatch in debug builds.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `A^T x` without forming the transpose.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let k = next[c];
                cols[k] = r;
                vals[k] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices: cols,
            values: vals,
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut acc = vec![0.0; other.n_cols];
        let mut mark = vec![usize::MAX; other.n_cols];
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut pattern = Vec::new();
        for r in 0..self.n_rows {
            pattern.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                if acc[c] != 0.0 {
                    col_indices.push(c);
                    values.push(acc[c]);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn add(&self, other: &CsrMatrix, alpha: f64) -> Result<CsrMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch("add".into()));
        }
        let rows = (0..self.n_rows)
            .map(|r| {
                self.row(r)
                    .chain(other.row(r).map(|(c, v)| (c, alpha * v)))
                    .collect()
            })
            .collect();
        Ok(CsrMatrix::from_rows(self.n_cols, rows))
    }

    pub fn scale(&self, alpha: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Scales row `r` by `left[r]` and column `c` by `right[c]`.
    pub fn scale_rows_cols(&self, left: Option<&[f64]>, right: Option<&[f64]>) -> CsrMatrix {
        let rows = (0..self.n_rows)
            .map(|r| {
                let lr = left.map_or(1.0, |l| l[r]);
                self.row(r)
                    .map(|(c, v)| (c, lr * v * right.map_or(1.0, |rt| rt[c])))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(self.n_cols, rows)
    }

    /// Dense submatrix on the given row and column index lists.
    pub fn submatrix_dense(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        let pos: HashMap<usize, usize> = cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut out = DenseMatrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if let Some(&j) = pos.get(&c) {
                    out[(i, j)] = v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[(r, c)] = v;
            }
        }
        out
    }

    /// Rows (and matching columns) that hold no entry get a unit diagonal.
    pub fn with_unit_diagonal_on_empty_rows(&self) -> CsrMatrix {
        let rows = (0..self.n_rows)
            .map(|r| {
                let row: Vec<(usize, f64)> = self.row(r).collect();
                if row.iter().all(|&(_, v)| v == 0.0) && r < self.n_cols {
                    vec![(r, 1.0)]
                } else {
                    row
                }
            })
            .collect();
        CsrMatrix::from_rows(self.n_cols, rows)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let t = self.transpose();
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        match self.add(&t, -1.0) {
            Ok(d) => d.values.iter().all(|v| v.abs() <= tol * scale),
            Err(_) => false,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Galerkin triple product `R * A * P`.
pub fn triple_product(r: &CsrMatrix, a: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    if r.n_cols() != a.n_rows() || a.n_cols() != p.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "triple product {}x{} * {}x{} * {}x{}",
            r.n_rows(),
            r.n_cols(),
            a.n_rows(),
            a.n_cols(),
            p.n_rows(),
            p.n_cols()
        )));
    }
    r.matmul(&a.matmul(p)?)
}
