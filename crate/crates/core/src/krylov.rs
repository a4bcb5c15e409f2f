//! Krylov column/moment cache: columns r, Hr, …, H^{2t}r and the scalar
//! moments φ_j(r) = rᵀH^j r, grown incrementally and never recomputed.

use crate::error::{Result, SolverError};
use crate::operator::OperatorH;
use crate::vecops;

#[derive(Debug, Clone)]
pub struct KrylovCache {
    columns: Vec<Vec<f64>>,
    moments: Vec<f64>,
    order: usize,
}

impl KrylovCache {
    /// Order-0 cache anchored at residual r: columns = [r], moments = [φ₀].
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if !vecops::all_finite(&r) {
            return Err(SolverError::NonFinite("anchor residual".into()));
        }
        let phi0 = vecops::dot(&r, &r);
        Ok(KrylovCache {
            columns: vec![r],
            moments: vec![phi0],
            order: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn anchor(&self) -> &[f64] {
        &self.columns[0]
    }

    /// H^j r, available for j ≤ 2·order.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// φ_j = rᵀH^j r, available for j ≤ 2·order.
    pub fn moment(&self, j: usize) -> f64 {
        self.moments[j]
    }

    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    /// Grow to `target_t`; appends exactly 2 columns and 2 moments per order
    /// step. Returns the number of H applications performed.
    pub fn extend(&mut self, h: &OperatorH<'_>, target_t: usize) -> Result<usize> {
        if target_t < self.order {
            return Err(SolverError::InvalidOption(format!(
                "cannot shrink cache from order {} to {target_t}",
                self.order
            )));
        }
        let mut applies = 0;
        while self.order < target_t {
            for _ in 0..2 {
                let last = self.columns.last().unwrap();
                let next = h.apply(last)?;
                applies += 1;
                if !vecops::all_finite(&next) {
                    return Err(SolverError::CacheOverflow { order: self.order + 1 });
                }
                self.moments.push(vecops::dot(self.anchor(), &next));
                self.columns.push(next);
            }
            self.order += 1;
        }
        Ok(applies)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::HMode;
    use crate::sparse::SparseMatrix;

    #[test]
    fn extend_noop_at_current_order() {
        let a = SparseMatrix::from_diag(&[1.0, 2.0]);
        let h = OperatorH::new(&a, HMode::SymmetricPsd).unwrap();
        let mut c = KrylovCache::new(vec![1.0, 1.0]).unwrap();
        c.extend(&h, 2).unwrap();
        let applies = c.extend(&h, 2).unwrap();
        assert_eq!(applies, 0);
        assert_eq!(c.num_columns(), 5);
    }

    #[test]
    fn diag_moments_closed_form() {
        // H = diag(1,2), r = (1,1): φ_j = 1 + 2^j
        let a = SparseMatrix::from_diag(&[1.0, 2.0]);
        let h = OperatorH::new(&a, HMode::SymmetricPsd).unwrap();
        let mut c = KrylovCache::new(vec![1.0, 1.0]).unwrap();
        c.extend(&h, 2).unwrap();
        for j in 0..=4usize {
            let want = 1.0 + (2.0f64).powi(j as i32);
            assert!((c.moment(j) - want).abs() <= 1e-12 * want, "phi_{j}");
        }
    }

    #[test]
    fn even_moment_consistency() {
        // φ₂ = dot(Hr, Hr) on a PSD 8x8
        let d: Vec<f64> = (1..=8).map(|i| 0.5 + i as f64).collect();
        let a = SparseMatrix::from_diag(&d);
        let h = OperatorH::new(&a, HMode::SymmetricPsd).unwrap();
        let r: Vec<f64> = (0..8).map(|i| 1.0 - 0.2 * i as f64).collect();
        let mut c = KrylovCache::new(r).unwrap();
        c.extend(&h, 1).unwrap();
        let phi2 = c.moment(2);
        let hr = c.column(1);
        let direct = vecops::dot(hr, hr);
        assert!((phi2 - direct).abs() <= 1e-13 * direct);
    }

    #[test]
    fn columns_chain_under_h() {
        let a = SparseMatrix::from_diag(&[1.0, 3.0, 5.0]);
        let h = OperatorH::new(&a, HMode::SymmetricPsd).unwrap();
        let mut c = KrylovCache::new(vec![1.0, 1.0, 1.0]).unwrap();
        c.extend(&h, 2).unwrap();
        for j in 0..4 {
            let want = h.apply(c.column(j)).unwrap();
            for (x, y) in c.column(j + 1).iter().zip(&want) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn overflow_detected() {
        // huge diagonal drives columns out of range quickly
        let a = SparseMatrix::from_diag(&[1e200, 1e200]);
        let h = OperatorH::new(&a, HMode::SymmetricPsd).unwrap();
        let mut c = KrylovCache::new(vec![1.0, 1.0]).unwrap();
        let err = c.extend(&h, 3).unwrap_err();
        assert!(matches!(err, SolverError::CacheOverflow { .. }));
    }
}
