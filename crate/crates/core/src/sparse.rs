//! Compressed sparse row storage for the symmetric operators assembled on a grid.
//!
//! The sparsity pattern of a structured grid never changes, so it is computed
//! once per grid ([`Pattern`]) and every assembled matrix shares it.

use std::sync::Arc;

/// Row pointers and column indices of a CSR matrix. Columns are sorted within a row.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) col_idx: Vec<usize>,
}

impl Pattern {
    /// Builds the pattern from per-row neighbour lists (duplicates allowed).
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        Self { row_ptr, col_idx }
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Storage slot of entry `(row, col)`, if it is part of the pattern.
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi].binary_search(&col).ok().map(|k| lo + k)
    }
}

/// Square sparse matrix over a shared pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n_rows()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.slot(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    /// Iterates the stored entries of one row as `(col, value)`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.pattern.row_ptr[row];
        let hi = self.pattern.row_ptr[row + 1];
        self.pattern.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n());
        debug_assert_eq!(y.len(), self.n());
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                acc += self.values[k] * x[p.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Largest `|A_ij - A_ji|` over the pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            for (j, a) in self.row(i) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Dense copy, row-major. Only meant for small problems and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut dense = vec![vec![0.0; n]; n];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, a) in self.row(i) {
                row[j] = a;
            }
        }
        dense
    }

    /// Builds a matrix from a dense symmetric array, keeping only nonzero entries.
    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let rows: Vec<Vec<usize>> = dense
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .filter(|&(j, a)| *a != 0.0 || i == j)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let pattern = Arc::new(Pattern::from_rows(rows));
        let mut m = Self::zeros(pattern);
        for (i, r) in dense.iter().enumerate() {
            for (j, &a) in r.iter().enumerate() {
                if let Some(k) = m.pattern.slot(i, j) {
                    m.values[k] = a;
                }
            }
        }
        m
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
