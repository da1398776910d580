use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{CsrMatrix, SolverError};

/// Minimum-degree elimination order on the graph of a symmetric pattern.
///
/// Plain (non-approximate) minimum degree on an explicit elimination graph;
/// ties go to the lowest index so the order is deterministic.
pub fn minimum_degree_order(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).0.iter().copied().filter(|&j| j != i).collect())
        .collect();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|i| Reverse((adj[i].len(), i))).collect();
    let mut order = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let clique = std::mem::take(&mut adj[v]);
        for &u in &clique {
            merged.clear();
            let (mut p, mut q) = (0, 0);
            let cur = &adj[u];
            while p < cur.len() || q < clique.len() {
                let next = match (cur.get(p), clique.get(q)) {
                    (Some(&x), Some(&y)) if x == y => {
                        p += 1;
                        q += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        p += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        q += 1;
                        y
                    }
                    (Some(&x), None) => {
                        p += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        q += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

/// Sparse `P A P^T = L D L^T` factorization of a symmetric matrix.
///
/// No pivoting: this is exact for definite matrices (both signs) and fails
/// with [`SolverError::SingularPivot`] when a zero pivot appears. Immutable
/// after construction; solves only read the factors.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    lvals: Vec<f64>,
    diag: Vec<f64>,
}

/// Factorizes a square symmetric matrix with a minimum-degree ordering.
pub fn factorize(a: &CsrMatrix) -> Result<Factorization, SolverError> {
    if !a.is_square() {
        return Err(SolverError::Dimension(format!(
            "cannot factorize a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if !a.is_symmetric() && !a.is_symmetric_exact() {
        return Err(SolverError::NotSymmetric);
    }
    let perm = minimum_degree_order(a);
    Factorization::with_order(a, perm)
}

impl Factorization {
    /// Factorizes with a caller-supplied elimination order.
    pub fn with_order(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self, SolverError> {
        let n = a.nrows();
        if perm.len() != n {
            return Err(SolverError::Dimension("permutation length mismatch".into()));
        }
        let mut pinv = vec![usize::MAX; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }

        // elimination tree and column counts
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut counts = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &ja in a.row(perm[k]).0 {
                let mut i = pinv[ja];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == usize::MAX {
                            parent[i] = k;
                        }
                        counts[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + counts[k];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut lvals = vec![0.0; nnz];
        let mut diag = vec![0.0; n];

        let scale = a.norm_inf().max(f64::MIN_POSITIVE);
        let pivot_tol = (n as f64) * f64::EPSILON * scale;
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut filled = vec![0usize; n];
        flag.fill(usize::MAX);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = a.row(perm[k]);
            for (&ja, &v) in cols.iter().zip(vals) {
                let mut i = pinv[ja];
                if i <= k {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = col_ptr[i];
                let end = start + filled[i];
                for p in start..end {
                    y[row_idx[p]] -= lvals[p] * yi;
                }
                let l_ki = yi / diag[i];
                dk -= l_ki * yi;
                row_idx[end] = k;
                lvals[end] = l_ki;
                filled[i] += 1;
            }
            if !dk.is_finite() || dk.abs() <= pivot_tol {
                return Err(SolverError::SingularPivot { column: perm[k] });
            }
            diag[k] = dk;
        }
        Ok(Self { n, perm, col_ptr, row_idx, lvals, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Non-zeros in the strictly lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Number of negative pivots (the matrix inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|&&d| d < 0.0).count()
    }

    /// Solves `A x = b` in place; `work` must have length `dim()`.
    pub fn solve_in_place(&self, x: &mut [f64], work: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(work.len(), self.n);
        for (k, &p) in self.perm.iter().enumerate() {
            work[k] = x[p];
        }
        for j in 0..self.n {
            let wj = work[j];
            if wj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    work[self.row_idx[p]] -= self.lvals[p] * wj;
                }
            }
        }
        for (w, d) in work.iter_mut().zip(&self.diag) {
            *w /= d;
        }
        for j in (0..self.n).rev() {
            let mut s = work[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s -= self.lvals[p] * work[self.row_idx[p]];
            }
            work[j] = s;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = work[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let mut work = vec![0.0; self.n];
        self.solve_in_place(&mut x, &mut work);
        x
    }
}
