use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::la::CsrMatrix;

/// Envelope (skyline) Cholesky factorisation under a reverse Cuthill-McKee
/// ordering. Adequate for the moderate sizes met on coarse levels and in
/// reference solves.
pub struct SkylineCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// First stored column of each (permuted) row.
    first: Vec<usize>,
    /// Offsets of each row segment in `values`.
    offsets: Vec<usize>,
    values: Vec<f64>,
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern of `a`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let degree: Vec<usize> = (0..n).map(|i| a.row_cols(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| (degree[i], i));
    for &s in &starts {
        if visited[s] {
            continue;
        }
        // Pseudo-peripheral start: farthest node of a BFS from the min-degree node.
        let mut start = s;
        for _ in 0..2 {
            let (_, last) = bfs_levels(a, start, &visited);
            start = last;
        }
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a
                .row_cols(v)
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &CsrMatrix, start: usize, blocked: &[bool]) -> (usize, usize) {
    let n = a.n_rows();
    let mut dist = vec![usize::MAX; n];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &w in a.row_cols(v) {
            if !blocked[w] && dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (dist[last], last)
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch(
                "cholesky of non-square matrix".into(),
            ));
        }
        let n = a.n_rows();
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for &c in a.row_cols(old) {
                let j = inv[c];
                if j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; offsets[n]];
        for old in 0..n {
            let i = inv[old];
            for (c, v) in a.row(old) {
                let j = inv[c];
                if j <= i {
                    values[offsets[i] + (j - first[i])] = v;
                }
            }
        }
        // Row-oriented envelope Cholesky.
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[offsets[i] + (j - fi)];
                let ri = &values[offsets[i] + (k0 - fi)..offsets[i] + (j - fi)];
                let rj = &values[offsets[j] + (k0 - fj)..offsets[j] + (j - fj)];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                let djj = values[offsets[j + 1] - 1];
                values[offsets[i] + (j - fi)] = s / djj;
            }
            let row = &values[offsets[i]..offsets[i + 1] - 1];
            let d = values[offsets[i + 1] - 1] - row.iter().map(|x| x * x).sum::<f64>();
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    row: perm[i],
                    pivot: d,
                });
            }
            values[offsets[i + 1] - 1] = d.sqrt();
        }
        Ok(Self {
            n,
            perm,
            first,
            offsets,
            values,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1] - 1];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / self.values[self.offsets[i + 1] - 1];
        }
        for i in (0..n).rev() {
            y[i] /= self.values[self.offsets[i + 1] - 1];
            let yi = y[i];
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1] - 1];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

pub fn sparse_direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n_rows() {
        return Err(Error::DimensionMismatch("sparse_direct_solve".into()));
    }
    Ok(SkylineCholesky::factor(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_system() {
        let a = CsrMatrix::diagonal(&[1.0, 2.0, 3.0]);
        let x = sparse_direct_solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_1d() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        );
        let x = sparse_direct_solve(&a, &[0.0, 1.0, 0.0]).unwrap();
        let want = [0.5, 1.0, 0.5];
        for (a, b) in x.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a =
            CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            sparse_direct_solve(&a, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
