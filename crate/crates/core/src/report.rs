//! Solve reports shared by every solver and the CLI.

use serde::{Deserialize, Serialize};

use crate::sparse::SparseMatrix;
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    SystemSolved,
    NormalSolved,
    MinNormSolved,
    #[serde(rename = "NC")]
    NotConverged,
    Error,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::SystemSolved | Verdict::MinNormSolved => 0,
            Verdict::NormalSolved => 2,
            Verdict::NotConverged => 3,
            Verdict::Error => 1,
        }
    }
}

/// How ε is interpreted by the solver guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToleranceMode {
    /// Literal guards: ‖r‖ ≤ ε, rᵀHr ≤ ε.
    Absolute,
    /// Guards scaled by the problem: ‖r‖ ≤ ε‖b‖, rᵀHr ≤ ε‖b‖²‖H‖est.
    Relative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub verdict: Verdict,
    pub iterations: usize,
    pub matvecs: usize,
    /// ‖b − Ax‖ at exit, absolute and relative to ‖b‖.
    pub residual_norm: f64,
    pub residual_norm_rel: f64,
    /// ‖Aᵀ(b − Ax)‖ at exit, absolute and relative to ‖Aᵀb‖.
    pub normal_residual_norm: f64,
    pub normal_residual_norm_rel: f64,
    /// ‖Ax − b‖ recorded at a normal-verdict exit (distance of b to the
    /// range of A at the least-squares solution).
    pub delta_star: Option<f64>,
    pub solution: Vec<f64>,
    /// (iteration, ‖r‖/‖b‖) checkpoints.
    pub residual_history: Vec<(usize, f64)>,
    pub seconds: f64,
    /// Witness updates, hybrid switches, tolerance halvings, warnings.
    pub events: Vec<String>,
}

impl SolveReport {
    pub fn new(solver: &str) -> Self {
        SolveReport {
            solver: solver.to_string(),
            verdict: Verdict::NotConverged,
            iterations: 0,
            matvecs: 0,
            residual_norm: f64::NAN,
            residual_norm_rel: f64::NAN,
            normal_residual_norm: f64::NAN,
            normal_residual_norm_rel: f64::NAN,
            delta_star: None,
            solution: Vec::new(),
            residual_history: Vec::new(),
            seconds: 0.0,
            events: Vec::new(),
        }
    }

    /// Fill the exit norms from a final solution. Costs two matvecs that
    /// are not counted against the solver.
    pub fn finalize_norms(&mut self, a: &SparseMatrix, b: &[f64], x: &[f64]) {
        let ax = a.matvec(x).expect("dimension checked by solver");
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let atr = a.transpose_matvec(&r).expect("dimension checked by solver");
        let atb = a.transpose_matvec(b).expect("dimension checked by solver");
        let bnorm = vecops::norm(b).max(f64::MIN_POSITIVE);
        let atbnorm = vecops::norm(&atb).max(f64::MIN_POSITIVE);
        self.residual_norm = vecops::norm(&r);
        self.residual_norm_rel = self.residual_norm / bnorm;
        self.normal_residual_norm = vecops::norm(&atr);
        self.normal_residual_norm_rel = self.normal_residual_norm / atbnorm;
        if self.verdict == Verdict::NormalSolved {
            self.delta_star = Some(self.residual_norm);
        }
        self.solution = x.to_vec();
    }
}
