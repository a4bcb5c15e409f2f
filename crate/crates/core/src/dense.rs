//! Small dense decompositions: cyclic Jacobi eigendecomposition for symmetric
//! matrices and a one-sided Jacobi SVD. These back the auxiliary-system
//! solve, the spectral oracle, and the pseudoinverse oracles in tests.

use crate::error::{Result, SolverError};

/// Dense row-major matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        DenseMatrix { nrows, ncols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let mut s = 0.0;
            for j in 0..self.ncols {
                s += self.get(i, j) * v[j];
            }
            y[i] = s;
        }
        y
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order with matching eigenvector columns.
pub fn jacobi_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if a.nrows != a.ncols {
        return Err(SolverError::InvalidMatrix("jacobi_eigen requires a square matrix".into()));
    }
    let n = a.nrows;
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        let scale: f64 = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max).max(1e-300);
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rows/cols p,q rotation
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut eig: Vec<(f64, usize)> = (0..n).map(|i| (m.get(i, i), i)).collect();
    eig.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let values: Vec<f64> = eig.iter().map(|e| e.0).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (newcol, &(_, oldcol)) in eig.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, newcol, v.get(k, oldcol));
        }
    }
    Ok((values, vectors))
}

/// One-sided Jacobi SVD: A = U Σ Vᵀ with singular values in descending
/// order. Intended for small oracle matrices.
pub fn svd(a: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    // work on the tall orientation, transpose back at the end
    if a.nrows < a.ncols {
        let (u, s, v) = svd(&a.transpose())?;
        return Ok((v, s, u));
    }
    let m = a.nrows;
    let n = a.ncols;
    let mut w = a.clone(); // columns rotate toward orthogonality
    let mut v = DenseMatrix::identity(n);
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for k in 0..m {
                    let wp = w.get(k, p);
                    let wq = w.get(k, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma.abs() <= 1e-30 * (alpha * beta).sqrt().max(1e-300) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let wp = w.get(k, p);
                    let wq = w.get(k, q);
                    w.set(k, p, c * wp - s * wq);
                    w.set(k, q, s * wp + c * wq);
                }
                for k in 0..n {
                    let vp = v.get(k, p);
                    let vq = v.get(k, q);
                    v.set(k, p, c * vp - s * vq);
                    v.set(k, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    // column norms are the singular values
    let mut sv: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let mut s = 0.0;
            for k in 0..m {
                s += w.get(k, j) * w.get(k, j);
            }
            (s.sqrt(), j)
        })
        .collect();
    sv.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut u = DenseMatrix::zeros(m, n);
    let mut vout = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (newcol, &(s, oldcol)) in sv.iter().enumerate() {
        sigma.push(s);
        if s > 0.0 {
            for k in 0..m {
                u.set(k, newcol, w.get(k, oldcol) / s);
            }
        }
        for k in 0..n {
            vout.set(k, newcol, v.get(k, oldcol));
        }
    }
    Ok((u, sigma, vout))
}

/// Minimum-norm least-squares solution A⁺b via the one-sided Jacobi SVD.
pub fn pinv_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows {
        return Err(SolverError::DimensionMismatch {
            expected: a.nrows,
            got: b.len(),
        });
    }
    let (u, sigma, v) = svd(a)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cutoff = smax * 1e-12 * (a.nrows.max(a.ncols) as f64);
    let mut x = vec![0.0; a.ncols];
    for (j, &s) in sigma.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let mut ub = 0.0;
        for k in 0..a.nrows {
            ub += u.get(k, j) * b[k];
        }
        let coef = ub / s;
        for k in 0..a.ncols {
            x[k] += coef * v.get(k, j);
        }
    }
    Ok(x)
}

/// Residual of projecting x onto range(Aᵀ), relative to ‖x‖. Used to check
/// the row-space invariant on dense-representable instances.
pub fn rowspace_projection_residual(a: &DenseMatrix, x: &[f64]) -> Result<f64> {
    let (_, sigma, v) = svd(a)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cutoff = smax * 1e-12 * (a.nrows.max(a.ncols) as f64);
    // projection of x onto span of right singular vectors with s > cutoff
    let mut proj = vec![0.0; x.len()];
    for (j, &s) in sigma.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let mut c = 0.0;
        for k in 0..x.len() {
            c += v.get(k, j) * x[k];
        }
        for k in 0..x.len() {
            proj[k] += c * v.get(k, j);
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..x.len() {
        num += (x[k] - proj[k]) * (x[k] - proj[k]);
        den += x[k] * x[k];
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}
