//! Minimal sparse kernels: CSR storage, reverse Cuthill-McKee ordering and an
//! envelope (skyline) Cholesky factorization used for the per-region bulk
//! solves and the monolithic reference solves.

use crate::{Error, Result};

/// Triplet accumulator for assembly.
#[derive(Debug, Clone, Default)]
pub struct Coo {
    pub n_rows: usize,
    pub n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Coo { n_rows, n_cols, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, val));
    }

    /// Compress into CSR, summing duplicates. The stable sort keeps the
    /// accumulation order of equal-position entries identical to insertion
    /// order, so symmetric assembly produces bitwise-symmetric matrices.
    pub fn to_csr(mut self) -> Csr {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col = Vec::new();
        let mut val = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(c);
                val.push(v);
                last = Some((r, c));
            }
            row_ptr[r + 1] = col.len();
        }
        // rows with no entries inherit the previous offset
        for r in 1..=self.n_rows {
            if row_ptr[r] < row_ptr[r - 1] {
                row_ptr[r] = row_ptr[r - 1];
            }
        }
        Csr { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col, val }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Csr { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col: Vec::new(), val: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn transpose(&self) -> Csr {
        let mut coo = Coo::new(self.n_cols, self.n_rows);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                coo.push(c, r, v);
            }
        }
        coo.to_csr()
    }

    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col[range.clone()].iter().copied().zip(self.val[range].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    /// y += alpha * A^T x
    pub fn matvec_transpose_add(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.n_rows);
        assert_eq!(y.len(), self.n_cols);
        for r in 0..self.n_rows {
            let xr = alpha * x[r];
            if xr != 0.0 {
                for (c, v) in self.row(r) {
                    y[c] += v * xr;
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// x^T A y for a square matrix.
    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.n_rows {
            let mut row_acc = 0.0;
            for (c, v) in self.row(r) {
                row_acc += v * y[c];
            }
            acc += x[r] * row_acc;
        }
        acc
    }

    /// Largest |a_ij - a_ji| for a square matrix (symmetry diagnostic).
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.n_rows, self.n_cols);
        let mut map = std::collections::HashMap::new();
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                map.insert((r, c), v);
            }
        }
        let mut worst = 0.0f64;
        for (&(r, c), &v) in &map {
            let w = map.get(&(c, r)).copied().unwrap_or(0.0);
            worst = worst.max((v - w).abs());
        }
        worst
    }

    /// Extract the square submatrix on `idx` (global indices, arbitrary order).
    pub fn submatrix(&self, idx: &[usize]) -> Csr {
        let mut local = vec![usize::MAX; self.n_cols];
        for (l, &g) in idx.iter().enumerate() {
            local[g] = l;
        }
        let mut coo = Coo::new(idx.len(), idx.len());
        for (l, &g) in idx.iter().enumerate() {
            for (c, v) in self.row(g) {
                if local[c] != usize::MAX {
                    coo.push(l, local[c], v);
                }
            }
        }
        coo.to_csr()
    }
}

/// Reverse Cuthill-McKee ordering. Returns `perm` with `perm[new] = old`.
/// Handles disconnected matrices by restarting from the lowest-degree
/// unvisited node.
pub fn rcm_order(a: &Csr) -> Vec<usize> {
    let n = a.n_rows;
    let degree: Vec<usize> = (0..n).map(|r| a.row_ptr[r + 1] - a.row_ptr[r]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&v| (degree[v], v));
    for &s in &starts {
        if visited[s] {
            continue;
        }
        visited[s] = true;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> =
                a.row(v).map(|(c, _)| c).filter(|&c| c != v && !visited[c]).collect();
            nbrs.sort_by_key(|&c| (degree[c], c));
            for c in nbrs {
                if !visited[c] {
                    visited[c] = true;
                    queue.push_back(c);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky factorization of a symmetric positive definite matrix,
/// stored row by row from the first nonzero column of each (permuted) row.
#[derive(Debug, Clone)]
pub struct SkylineChol {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineChol {
    /// Factor `a` (symmetric, only structure+values of the full matrix are
    /// read) with an RCM fill-reducing permutation.
    pub fn factor(a: &Csr) -> Result<Self> {
        Self::factor_with(a, rcm_order(a))
    }

    pub fn factor_with(a: &Csr, perm: Vec<usize>) -> Result<Self> {
        let n = a.n_rows;
        assert_eq!(a.n_cols, n);
        let mut inv_perm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        // envelope: first nonzero column per permuted row
        let mut first: Vec<usize> = (0..n).collect();
        for r_old in 0..n {
            let r = inv_perm[r_old];
            for (c_old, _) in a.row(r_old) {
                let c = inv_perm[c_old];
                if c < first[r] {
                    first[r] = c;
                }
                if r < first[c] {
                    first[c] = r;
                }
            }
        }
        let mut row_start = vec![0usize; n + 1];
        for i in 0..n {
            row_start[i + 1] = row_start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0f64; row_start[n]];
        for r_old in 0..n {
            let r = inv_perm[r_old];
            for (c_old, v) in a.row(r_old) {
                let c = inv_perm[c_old];
                if c <= r {
                    data[row_start[r] + (c - first[r])] = v;
                }
            }
        }
        // in-place envelope Cholesky
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut sum = data[row_start[i] + (j - fi)];
                for k in lo..j {
                    sum -= data[row_start[i] + (k - fi)] * data[row_start[j] + (k - fj)];
                }
                let djj = data[row_start[j] + (j - fj)];
                data[row_start[i] + (j - fi)] = sum / djj;
            }
            let mut diag = data[row_start[i] + (i - fi)];
            for k in fi..i {
                let l = data[row_start[i] + (k - fi)];
                diag -= l * l;
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotSpd(format!("nonpositive pivot {} at row {}", diag, i)));
            }
            data[row_start[i] + (i - fi)] = diag.sqrt();
        }
        Ok(SkylineChol { n, perm, first, row_start, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            y[i] = b[self.perm[i]];
        }
        // forward: L y' = Pb
        for i in 0..n {
            let fi = self.first[i];
            let mut sum = y[i];
            for k in fi..i {
                sum -= self.data[self.row_start[i] + (k - fi)] * y[k];
            }
            y[i] = sum / self.data[self.row_start[i] + (i - fi)];
        }
        // backward: L^T x' = y'
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i] / self.data[self.row_start[i] + (i - fi)];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.data[self.row_start[i] + (k - fi)] * xi;
            }
        }
        let mut x = vec![0.0f64; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_csr(m: &[&[f64]]) -> Csr {
        let n = m.len();
        let mut coo = Coo::new(n, n);
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    coo.push(i, j, v);
                }
            }
        }
        coo.to_csr()
    }

    #[test]
    fn coo_sums_duplicates() {
        let mut coo = Coo::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(0, 0, 2.0);
        coo.push(1, 0, -1.0);
        let a = coo.to_csr();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.apply(&[1.0, 0.0]), vec![3.0, -1.0]);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = dense_to_csr(&[
            &[4.0, 1.0, 0.0, 0.0],
            &[1.0, 3.0, 1.0, 0.0],
            &[0.0, 1.0, 2.0, 0.5],
            &[0.0, 0.0, 0.5, 1.0],
        ]);
        let chol = SkylineChol::factor(&a).unwrap();
        let x_true = vec![1.0, -2.0, 3.0, 0.5];
        let b = a.apply(&x_true);
        let x = chol.solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = dense_to_csr(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(SkylineChol::factor(&a).is_err());
    }

    #[test]
    fn handles_disconnected_blocks() {
        let a = dense_to_csr(&[
            &[2.0, 0.0, 0.0],
            &[0.0, 3.0, 0.0],
            &[0.0, 0.0, 5.0],
        ]);
        let chol = SkylineChol::factor(&a).unwrap();
        let x = chol.solve(&[2.0, 3.0, 5.0]);
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-14);
        }
    }
}
