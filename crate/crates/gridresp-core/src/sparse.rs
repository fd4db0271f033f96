//! Minimal sparse linear solver used for Kron elimination and power-flow
//! Jacobians.
//!
//! This is plain Gaussian elimination with diagonal pivoting over a
//! minimum-degree ordering: pick the active variable with the fewest active
//! row entries, eliminate it, apply its row to every active row that couples
//! to it, record the multipliers. Grid matrices (grounded Laplacians,
//! structurally symmetric Jacobians) stay sparse under this ordering, and
//! the factorization doubles as an LU pair for repeated solves.
//!
//! Everything iterates over B-tree structures, so the elimination sequence
//! and therefore every floating-point result is deterministic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use nalgebra::DMatrix;

#[derive(Debug, thiserror::Error)]
pub enum SparseError {
    #[error("matrix is singular at variable {var} (pivot {pivot:.3e})")]
    Singular { var: usize, pivot: f64 },
    #[error("triplet ({row}, {col}) outside {n}x{n} matrix")]
    OutOfBounds { row: usize, col: usize, n: usize },
}

/// Square sparse matrix in row-major adjacency form.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, rows: alloc::vec![BTreeMap::new(); n] }
    }

    /// Builds from (row, col, value) triplets; duplicates accumulate.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self, SparseError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut m = Self::zeros(n);
        for (r, c, v) in triplets {
            m.add(r, c, v)?;
        }
        Ok(m)
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) -> Result<(), SparseError> {
        if row >= self.n || col >= self.n {
            return Err(SparseError::OutOfBounds { row, col, n: self.n });
        }
        *self.rows[row].entry(col).or_insert(0.0) += value;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for (&c, &v) in row {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// y = A·x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.n];
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for (&c, &v) in row {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        y
    }

    /// Minimum-degree ordered LU factorization with diagonal pivots.
    pub fn factorize(&self) -> Result<SparseLu, SparseError> {
        let n = self.n;
        let mut rows = self.rows.clone();
        // cols[c] = set of active rows holding an entry in column c.
        let mut cols: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); n];
        for (r, row) in rows.iter().enumerate() {
            for &c in row.keys() {
                cols[c].insert(r);
            }
        }
        // (degree, var) pairs drive the pivot choice; ties resolve by index.
        let mut degrees: BTreeSet<(usize, usize)> = (0..n).map(|r| (rows[r].len(), r)).collect();
        let mut active = alloc::vec![true; n];

        let mut order = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        let mut lower: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut upper: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);

        for _ in 0..n {
            let &(_, k) = degrees.iter().next().expect("all variables eliminated");
            degrees.remove(&(rows[k].len(), k));
            active[k] = false;

            let pivot_row: Vec<(usize, f64)> = core::mem::take(&mut rows[k]).into_iter().collect();
            let pivot = pivot_row
                .iter()
                .find(|&&(c, _)| c == k)
                .map(|&(_, v)| v)
                .unwrap_or(0.0);
            let scale = pivot_row.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs())).max(1.0);
            if pivot.abs() <= 1e-12 * scale {
                return Err(SparseError::Singular { var: k, pivot });
            }

            // Rows still coupled to variable k receive the update.
            let victims: Vec<usize> = cols[k].iter().copied().filter(|&r| active[r]).collect();
            let mut l_entries = Vec::with_capacity(victims.len());
            for &i in &victims {
                let old_deg = rows[i].len();
                let f = rows[i].remove(&k).expect("column set out of sync") / pivot;
                for &(c, v) in &pivot_row {
                    if c == k {
                        continue;
                    }
                    match rows[i].entry(c) {
                        alloc::collections::btree_map::Entry::Occupied(mut e) => {
                            *e.get_mut() -= f * v;
                        }
                        alloc::collections::btree_map::Entry::Vacant(e) => {
                            e.insert(-f * v);
                            cols[c].insert(i);
                        }
                    }
                }
                l_entries.push((i, f));
                let new_deg = rows[i].len();
                if new_deg != old_deg {
                    degrees.remove(&(old_deg, i));
                    degrees.insert((new_deg, i));
                }
            }

            for &(c, _) in &pivot_row {
                cols[c].remove(&k);
            }

            order.push(k);
            diag.push(pivot);
            lower.push(l_entries);
            upper.push(pivot_row.into_iter().filter(|&(c, _)| c != k).collect());
        }

        Ok(SparseLu { n, order, diag, lower, upper })
    }
}

/// LU factors in elimination order; indices refer to the original matrix.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    order: Vec<usize>,
    diag: Vec<f64>,
    lower: Vec<Vec<(usize, f64)>>,
    upper: Vec<Vec<(usize, f64)>>,
}

impl SparseLu {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves A·x = b, overwriting `b` with x.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "right-hand side length mismatch");
        for (s, &k) in self.order.iter().enumerate() {
            let bk = b[k];
            if bk != 0.0 {
                for &(i, f) in &self.lower[s] {
                    b[i] -= f * bk;
                }
            }
        }
        for (s, &k) in self.order.iter().enumerate().rev() {
            let mut acc = b[k];
            for &(c, v) in &self.upper[s] {
                acc -= v * b[c];
            }
            b[k] = acc / self.diag[s];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves A·X = B column by column.
    pub fn solve_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.n, "right-hand side row count mismatch");
        let mut x = b.clone();
        let mut col = alloc::vec![0.0; self.n];
        for j in 0..b.ncols() {
            for i in 0..self.n {
                col[i] = b[(i, j)];
            }
            self.solve_in_place(&mut col);
            for i in 0..self.n {
                x[(i, j)] = col[i];
            }
        }
        x
    }
}
