//! The implicit operator H ∈ {A, AAᵀ, AᵀA}.
//!
//! Gram and NormalGram applications never materialize the product matrix;
//! they chain the two CSR kernels.

use crate::error::{Result, SolverError};
use crate::sparse::SparseMatrix;
use crate::vecops;

/// Which symmetric PSD operator the CTA formulas run their moments over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMode {
    /// H = A; requires the symmetry flag, PSD-ness is the caller's assertion.
    SymmetricPsd,
    /// H = AAᵀ applied as A(Aᵀv).
    Gram,
    /// H = AᵀA applied as Aᵀ(Av).
    NormalGram,
}

impl HMode {
    /// A-matvecs consumed per H application.
    pub fn matvec_cost(self) -> usize {
        match self {
            HMode::SymmetricPsd => 1,
            HMode::Gram | HMode::NormalGram => 2,
        }
    }
}

/// Implicit symmetric PSD operator over a borrowed base matrix.
#[derive(Debug, Clone, Copy)]
pub struct OperatorH<'a> {
    a: &'a SparseMatrix,
    mode: HMode,
}

impl<'a> OperatorH<'a> {
    pub fn new(a: &'a SparseMatrix, mode: HMode) -> Result<Self> {
        if mode == HMode::SymmetricPsd && !a.is_symmetric() {
            return Err(SolverError::PsdViolation(
                "SymmetricPSD mode requires the symmetry flag".into(),
            ));
        }
        Ok(OperatorH { a, mode })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        self.a
    }

    pub fn mode(&self) -> HMode {
        self.mode
    }

    /// Square dimension of H: m for SymmetricPsd/Gram, n for NormalGram.
    pub fn dim(&self) -> usize {
        match self.mode {
            HMode::SymmetricPsd | HMode::Gram => self.a.nrows(),
            HMode::NormalGram => self.a.ncols(),
        }
    }

    /// Hv per mode; one A-matvec in SymmetricPsd, two otherwise.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(SolverError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        match self.mode {
            HMode::SymmetricPsd => self.a.matvec(v),
            HMode::Gram => {
                let t = self.a.transpose_matvec(v)?;
                self.a.matvec(&t)
            }
            HMode::NormalGram => {
                let t = self.a.matvec(v)?;
                self.a.transpose_matvec(&t)
            }
        }
    }

    /// ‖H‖₂ estimate by power iteration; deterministic start vector.
    pub fn norm_estimate(&self, steps: usize) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        // mildly uneven start so eigencomponents are not missed by symmetry
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i % 7) as f64)).collect();
        let nv = vecops::norm(&v);
        vecops::scale(1.0 / nv, &mut v);
        let mut lambda = 0.0;
        for _ in 0..steps {
            let hv = match self.apply(&v) {
                Ok(hv) => hv,
                Err(_) => return f64::NAN,
            };
            let n_hv = vecops::norm(&hv);
            if n_hv == 0.0 || !n_hv.is_finite() {
                return n_hv;
            }
            lambda = n_hv;
            v = hv;
            vecops::scale(1.0 / n_hv, &mut v);
        }
        lambda
    }
}
