//! CSR sparse matrices and the matrix-vector kernels every solver sits on.
//!
//! Summation order inside `matvec`/`transpose_matvec` is fixed (row-major,
//! index order) so a given build produces bit-identical results run to run.

use crate::error::{Result, SolverError};
use crate::vecops;

/// Sparse matrix in compressed sparse row format.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Build from raw CSR arrays, validating the structural invariants:
    /// monotone row offsets, in-range strictly increasing column indices
    /// per row, finite values.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(SolverError::InvalidMatrix(format!(
                "row_ptr length {} != nrows + 1 = {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if *row_ptr.last().unwrap() != col_idx.len() || col_idx.len() != values.len() {
            return Err(SolverError::InvalidMatrix(
                "final row offset must equal the number of stored entries".into(),
            ));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(SolverError::InvalidMatrix(format!(
                    "row offsets not monotone at row {i}"
                )));
            }
            let mut prev: Option<usize> = None;
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[k];
                if j >= ncols {
                    return Err(SolverError::InvalidMatrix(format!(
                        "column index {j} out of range in row {i}"
                    )));
                }
                if let Some(p) = prev {
                    if j <= p {
                        return Err(SolverError::InvalidMatrix(format!(
                            "column indices not strictly increasing in row {i}"
                        )));
                    }
                }
                prev = Some(j);
                if !values[k].is_finite() {
                    return Err(SolverError::NonFinite(format!("entry ({i}, {j})")));
                }
            }
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            if let Some(last) = merged.last_mut() {
                if last.0 == i && last.1 == j {
                    last.2 += v;
                    continue;
                }
            }
            merged.push((i, j, v));
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for &(i, _, _) in &merged {
            if i >= nrows {
                return Err(SolverError::InvalidMatrix(format!("row index {i} out of range")));
            }
            row_ptr[i + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|e| e.1).collect();
        let values = merged.iter().map(|e| e.2).collect();
        Self::from_csr(nrows, ncols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::from_csr(n, n, (0..=n).collect(), (0..n).collect(), d.to_vec())
            .expect("diagonal matrix is always valid CSR");
        m.symmetric = true;
        m
    }

    /// Dense row-major input; zero entries are dropped.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        let mut triplets = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let v = data[i * ncols + j];
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &triplets)
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

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    /// Mark the matrix symmetric. For dense-representable sizes the claim is
    /// checked entrywise; larger matrices are trusted (use
    /// [`SparseMatrix::validate_symmetry`] when the header came from a file).
    pub fn set_symmetric(&mut self) -> Result<()> {
        if self.nrows != self.ncols {
            return Err(SolverError::InvalidMatrix(
                "symmetry flag requires a square matrix".into(),
            ));
        }
        if self.nrows <= 2000 {
            self.validate_symmetry()?;
        }
        self.symmetric = true;
        Ok(())
    }

    /// Trust the symmetry claim without the entrywise check (file headers).
    pub fn set_symmetric_unchecked(&mut self) -> Result<()> {
        if self.nrows != self.ncols {
            return Err(SolverError::InvalidMatrix(
                "symmetry flag requires a square matrix".into(),
            ));
        }
        self.symmetric = true;
        Ok(())
    }

    /// Entrywise check that A equals its transpose.
    pub fn validate_symmetry(&self) -> Result<()> {
        if self.nrows != self.ncols {
            return Err(SolverError::InvalidMatrix("not square".into()));
        }
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if self.values[k] != self.get(j, i) {
                    return Err(SolverError::InvalidMatrix(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// y = A v, deterministic row-major summation.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.ncols {
            return Err(SolverError::DimensionMismatch {
                expected: self.ncols,
                got: v.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * v[self.col_idx[k]];
            }
            y[i] = s;
        }
        Ok(y)
    }

    /// y = Aᵀ v without materializing the transpose.
    pub fn transpose_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.nrows {
            return Err(SolverError::DimensionMismatch {
                expected: self.nrows,
                got: v.len(),
            });
        }
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let vi = v[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * vi;
            }
        }
        Ok(y)
    }

    /// Stored entries in row-major order as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        vecops::dot(&self.values, &self.values).sqrt()
    }

    /// Dense row-major copy; intended for oracles and small instances.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i * self.ncols + self.col_idx[k]] = self.values[k];
            }
        }
        d
    }
}

/// Symmetric diagonal scaling D^{-1/2} A D^{-1/2}; returns the scaled matrix
/// (unit diagonal) and the original diagonal d.
pub fn jacobi_scale(a: &SparseMatrix) -> Result<(SparseMatrix, Vec<f64>)> {
    if a.nrows != a.ncols {
        return Err(SolverError::InvalidMatrix("jacobi_scale requires a square matrix".into()));
    }
    let n = a.nrows;
    let mut d = vec![0.0; n];
    for i in 0..n {
        let di = a.get(i, i);
        if di <= 0.0 {
            return Err(SolverError::InvalidMatrix(format!(
                "nonpositive diagonal entry {di} at row {i}"
            )));
        }
        d[i] = di;
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|&x| 1.0 / x.sqrt()).collect();
    let mut values = a.values.clone();
    for i in 0..n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[k];
            if i == j {
                values[k] = 1.0; // exact unit diagonal
            } else {
                values[k] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    let mut scaled = SparseMatrix::from_csr(n, n, a.row_ptr.clone(), a.col_idx.clone(), values)?;
    scaled.symmetric = a.symmetric;
    Ok((scaled, d))
}
