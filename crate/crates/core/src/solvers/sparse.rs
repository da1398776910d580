use nalgebra::DMatrix;

use super::SolverError;

/// Compressed sparse row matrix of `f64` with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SolverError> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(SolverError::Dimension(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(SolverError::NonFinite(format!("entry ({i}, {j}) = {v}")));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..nrows {
            let (lo, hi) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&k| cols[k]);
            for &k in &order {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == cols[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values, symmetric: false })
    }

    /// Marks the matrix symmetric after checking it exactly.
    pub fn into_symmetric(mut self) -> Result<Self, SolverError> {
        if !self.is_symmetric_exact() {
            return Err(SolverError::NotSymmetric);
        }
        self.symmetric = true;
        Ok(self)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self, SolverError> {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn is_symmetric_exact(&self) -> bool {
        self.is_square()
            && (0..self.nrows).all(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v)
            })
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `diag(left) * A * diag(right)`; symmetry is kept when `left == right`.
    pub fn scaled(&self, left: &[f64], right: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.values[k] = left[i] * self.values[k] * right[self.col_idx[k]];
            }
        }
        out.symmetric = self.symmetric && left == right;
        out
    }

    /// `alpha * A + diag(d)`; the diagonal is added to the pattern where missing.
    pub fn scale_add_diagonal(&self, alpha: f64, d: &[f64]) -> Self {
        assert!(self.is_square() && d.len() == self.nrows);
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + self.nrows);
        let mut values = Vec::with_capacity(self.nnz() + self.nrows);
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut placed = false;
            for (&j, &v) in cols.iter().zip(vals) {
                if !placed && j > i {
                    col_idx.push(i);
                    values.push(d[i]);
                    placed = true;
                }
                if j == i {
                    col_idx.push(i);
                    // stay bit-exact with alpha*v + d for symmetric duplicates
                    values.push(alpha * v + d[i]);
                    placed = true;
                } else {
                    col_idx.push(j);
                    values.push(alpha * v);
                }
            }
            if !placed {
                col_idx.push(i);
                values.push(d[i]);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    /// Infinity norm, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                a[(i, j)] = v;
            }
        }
        a
    }
}
