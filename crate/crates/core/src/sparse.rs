//! Compressed-row sparse matrices.
//!
//! This is the storage format for adjacency and Laplacian operators and for
//! high-dimensional feature matrices. Only the kernels the rest of the crate
//! needs are provided: construction from COO triples, sparse×dense products,
//! diagonal column scaling, and transposition. Values are immutable after
//! construction, so matrices can be shared freely across threads.

use ndarray::Array2;
use rayon::prelude::*;

use crate::{DenseMatrix, Error, Result};

/// CSR matrix over `f64`.
///
/// Invariants: `row_offsets` is non-decreasing with `row_offsets[0] == 0` and
/// `row_offsets[n_rows] == values.len()`; within each row the column indices
/// are strictly increasing; no explicit zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from (row, col, value) triples.
    ///
    /// Duplicate coordinates are summed; entries that are (or sum to) exactly
    /// zero are dropped, so the result is in canonical form and structural
    /// equality coincides with numeric equality.
    pub fn from_coo(
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = entries.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= n_rows || c >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
        }
        // Values participate in the sort key so duplicate coordinates are
        // summed in a canonical order: construction is exactly invariant
        // under permutation of the input.
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut i = 0;
        while i < entries.len() {
            let (r, c, mut v) = entries[i];
            i += 1;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                v += entries[i].2;
                i += 1;
            }
            if v != 0.0 {
                row_offsets[r + 1] += 1;
                col_indices.push(c);
                values.push(v);
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// CSR view of a dense matrix, dropping zeros.
    pub fn from_dense(d: &DenseMatrix) -> Self {
        let (n, m) = d.dim();
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..m {
                let v = d[[i, j]];
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            n_rows: n,
            n_cols: m,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
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

    /// Iterates the stored `(col, value)` pairs of one row in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rebuilds the matrix with one value per stored entry, keeping the
    /// sparsity pattern. `f` receives `(row, col, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                out.values[k] = f(r, self.col_indices[k], self.values[k]);
            }
        }
        out
    }

    /// Sparse × dense product.
    ///
    /// Parallelized across output rows; each row is accumulated in stored
    /// column order, so the result is bit-identical to the sequential loop.
    pub fn spmm(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != d.nrows() {
            return Err(Error::DimMismatch {
                context: "spmm",
                expected: format!("{} rows", self.n_cols),
                got: format!("{} rows", d.nrows()),
            });
        }
        let m = d.ncols();
        let d_owned;
        let d_slice = match d.as_slice() {
            Some(s) => s,
            None => {
                d_owned = d.as_standard_layout().into_owned();
                d_owned.as_slice().expect("standard layout")
            }
        };
        let mut out = Array2::zeros((self.n_rows, m));
        let out_slice = out.as_slice_mut().expect("freshly allocated");
        out_slice
            .par_chunks_mut(m.max(1))
            .enumerate()
            .for_each(|(r, out_row)| {
                for (c, v) in self.row(r) {
                    let src = &d_slice[c * m..(c + 1) * m];
                    for (o, s) in out_row.iter_mut().zip(src) {
                        *o += v * s;
                    }
                }
            });
        Ok(out)
    }

    /// Sparse × vector product.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.n_cols != x.len() {
            return Err(Error::DimMismatch {
                context: "spmv",
                expected: format!("length {}", self.n_cols),
                got: format!("length {}", x.len()),
            });
        }
        Ok((0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect())
    }

    /// Right-multiplication by `diag(d)`: column `j` scaled by `d[j]`.
    pub fn diag_right_mul(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n_cols {
            return Err(Error::DimMismatch {
                context: "diag_right_mul",
                expected: format!("length {}", self.n_cols),
                got: format!("length {}", d.len()),
            });
        }
        let mut out = self.clone();
        for (val, &c) in out.values.iter_mut().zip(&out.col_indices) {
            *val *= d[c];
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut row_offsets = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            row_offsets[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            row_offsets[i + 1] += row_offsets[i];
        }
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = row_offsets.clone();
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let at = cursor[c];
                col_indices[at] = r;
                values[at] = v;
                cursor[c] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Exact structural symmetry check (pattern and values).
    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && *self == self.transpose()
    }
}
