//! Centering iterations on the residual: the first-order map
//! F₁(r) = r − (rᵀHr / rᵀH²r)·Hr, its high-order family
//! F_t(r) = r − Σ α_{t,i} H^i r with norm-minimizing coefficients from the
//! moment system, point-wise orbits for minimal-polynomial detection,
//! normal-equation iterates, and a stagnation-switching hybrid driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::auxsolve::{solve_aux, solve_aux_ls};
use crate::error::{Result, SolverError};
use crate::krylov::KrylovCache;
use crate::operator::{HMode, OperatorH};
use crate::report::{SolveReport, ToleranceMode, Verdict};
use crate::sparse::SparseMatrix;
use crate::vecops;

pub const MAX_T: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    FixedT,
    /// Apply F₁, F₂, …, F_{t_max} to successive residuals, then repeat.
    Cycle(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct HybridOptions {
    pub enabled: bool,
    pub window: usize,
    /// Switch to the normal equation when ‖r_k‖/‖r_{k−W}‖ > η.
    pub eta: f64,
}

impl Default for HybridOptions {
    fn default() -> Self {
        HybridOptions {
            enabled: false,
            window: 25,
            eta: 0.99,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CtaOptions {
    pub t: usize,
    pub eps: f64,
    /// Separate tolerance for the quadratic-form (gradient) guards;
    /// defaults equal to eps.
    pub eps_grad: f64,
    pub tolerance: ToleranceMode,
    pub max_iter: usize,
    pub mode: HMode,
    pub schedule: Schedule,
    pub hybrid: HybridOptions,
}

impl Default for CtaOptions {
    fn default() -> Self {
        CtaOptions {
            t: 1,
            eps: 1e-10,
            eps_grad: 1e-10,
            tolerance: ToleranceMode::Relative,
            max_iter: 100_000,
            mode: HMode::Gram,
            schedule: Schedule::FixedT,
            hybrid: HybridOptions::default(),
        }
    }
}

impl CtaOptions {
    fn validate(&self) -> Result<()> {
        if self.t == 0 || self.t > MAX_T {
            return Err(SolverError::InvalidOption(format!(
                "t must be in 1..={MAX_T}, got {}",
                self.t
            )));
        }
        if let Schedule::Cycle(tm) = self.schedule {
            if tm == 0 || tm > MAX_T {
                return Err(SolverError::InvalidOption(format!(
                    "cycle t_max must be in 1..={MAX_T}, got {tm}"
                )));
            }
        }
        if !(self.hybrid.eta > 0.0 && self.hybrid.eta < 1.0) {
            return Err(SolverError::InvalidOption("hybrid eta must be in (0,1)".into()));
        }
        if self.hybrid.window == 0 {
            return Err(SolverError::InvalidOption("hybrid window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Guard thresholds in absolute form: (‖r‖ bound, rᵀHr bound).
fn guard_scales(opts: &CtaOptions, b: &[f64], h_norm_est: f64) -> (f64, f64) {
    match opts.tolerance {
        ToleranceMode::Absolute => (opts.eps, opts.eps_grad),
        ToleranceMode::Relative => {
            let bn = vecops::norm(b);
            (opts.eps * bn, opts.eps_grad * bn * bn * h_norm_est.max(f64::MIN_POSITIVE))
        }
    }
}

/// One application of F₁. Returns (F₁(r), α₁₁).
pub fn f1_apply(h: &OperatorH<'_>, r: &[f64]) -> Result<(Vec<f64>, f64)> {
    let hr = h.apply(r)?;
    let phi1 = vecops::dot(r, &hr);
    let phi2 = vecops::dot(&hr, &hr);
    if phi2 <= f64::MIN_POSITIVE {
        return Err(SolverError::HAnnihilatedResidual);
    }
    let alpha = phi1 / phi2;
    let next: Vec<f64> = r.iter().zip(&hr).map(|(ri, hi)| ri - alpha * hi).collect();
    Ok((next, alpha))
}

/// One level of the composed-F₁ sequence.
#[derive(Debug, Clone)]
pub struct FoldEntry {
    /// F₁^{∘j}(r).
    pub v: Vec<f64>,
    /// vᵀHv.
    pub qform: f64,
    /// α₁₁(v) = vᵀHv / vᵀH²v.
    pub alpha: f64,
}

/// Composed-F₁ prefix: entries for j = 0..=j_max, stopping early when H
/// annihilates the current vector (breakdown returns the prefix).
pub fn f1_fold(h: &OperatorH<'_>, r: &[f64], j_max: usize) -> Result<Vec<FoldEntry>> {
    let mut out = Vec::with_capacity(j_max + 1);
    let mut v = r.to_vec();
    for _ in 0..=j_max {
        let hv = h.apply(&v)?;
        let phi1 = vecops::dot(&v, &hv);
        let phi2 = vecops::dot(&hv, &hv);
        if phi2 <= f64::MIN_POSITIVE {
            out.push(FoldEntry {
                v,
                qform: phi1,
                alpha: 0.0,
            });
            return Ok(out);
        }
        let alpha = phi1 / phi2;
        let next: Vec<f64> = v.iter().zip(&hv).map(|(vi, hi)| vi - alpha * hi).collect();
        out.push(FoldEntry { v, qform: phi1, alpha });
        v = next;
    }
    Ok(out)
}

/// First-order iteration on Ax=b.
pub fn f1_iterate(a: &SparseMatrix, b: &[f64], opts: &CtaOptions) -> Result<SolveReport> {
    let mut o = opts.clone();
    o.t = 1;
    o.schedule = Schedule::FixedT;
    let mut report = cta_solve_from(a, b, &vec![0.0; a.ncols()], &o)?;
    report.solver = "cta-f1".into();
    Ok(report)
}

/// One F_t step from an extended cache: (F_t(r), α, Δx).
/// Δx already includes the Aᵀ factor in Gram mode.
pub fn ft_apply(
    cache: &KrylovCache,
    t: usize,
    h: &OperatorH<'_>,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let sol = solve_aux(cache, t, 0)?;
    let r = cache.anchor();
    let mut f = r.to_vec();
    let mut dsum = vec![0.0; r.len()];
    for i in 1..=t {
        let ai = sol.alpha[i - 1];
        vecops::axpy(-ai, cache.column(i), &mut f);
        vecops::axpy(ai, cache.column(i - 1), &mut dsum);
    }
    let dx = match h.mode() {
        HMode::SymmetricPsd => dsum,
        HMode::Gram => h.matrix().transpose_matvec(&dsum)?,
        HMode::NormalGram => {
            return Err(SolverError::InvalidOption(
                "ft_apply drives Ax=b; use normal_equation_iterate for the normal system".into(),
            ))
        }
    };
    Ok((f, sol.alpha, dx))
}

struct Driver<'a> {
    a: &'a SparseMatrix,
    b: &'a [f64],
    h: OperatorH<'a>,
    x: Vec<f64>,
    r: Vec<f64>,
    matvecs: usize,
    since_recompute: usize,
}

enum StepResult {
    Updated,
    /// rᵀHr fell under the gradient threshold before the step; the state
    /// is unchanged.
    GradientGuard,
    Breakdown,
}

impl<'a> Driver<'a> {
    fn new(a: &'a SparseMatrix, b: &'a [f64], x0: &[f64], mode: HMode) -> Result<Self> {
        if vecops::norm(b) == 0.0 {
            return Err(SolverError::InvalidOption("b must be nonzero".into()));
        }
        let h = OperatorH::new(a, mode)?;
        let ax = a.matvec(x0)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        Ok(Driver {
            a,
            b,
            h,
            x: x0.to_vec(),
            r,
            matvecs: 1,
            since_recompute: 0,
        })
    }

    /// Apply F_t once at the current residual, guarding on rᵀHr first.
    fn step(&mut self, t: usize, eps_q: f64) -> Result<StepResult> {
        let mut cache = KrylovCache::new(self.r.clone())?;
        let applies = match cache.extend(&self.h, t) {
            Ok(n) => n,
            Err(SolverError::CacheOverflow { .. }) => return Ok(StepResult::Breakdown),
            Err(e) => return Err(e),
        };
        self.matvecs += applies * self.h.mode().matvec_cost();
        if cache.moment(1) <= eps_q {
            return Ok(StepResult::GradientGuard);
        }
        let (f, _alpha, dx) = match ft_apply(&cache, t, &self.h) {
            Ok(v) => v,
            Err(SolverError::HAnnihilatedResidual) => return Ok(StepResult::Breakdown),
            Err(e) => return Err(e),
        };
        if self.h.mode() == HMode::Gram {
            self.matvecs += 1; // the Aᵀ factor inside dx
        }
        for i in 0..self.x.len() {
            self.x[i] += dx[i];
        }
        self.r = f;
        self.since_recompute += 1;
        if self.since_recompute >= 256 {
            let ax = self.a.matvec(&self.x)?;
            self.matvecs += 1;
            self.r = self.b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            self.since_recompute = 0;
        }
        Ok(StepResult::Updated)
    }
}

/// Schedule-driven CTA on Ax=b from a caller-supplied start.
pub fn cta_solve_from(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    opts: &CtaOptions,
) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    opts.validate()?;
    let mut d = Driver::new(a, b, x0, opts.mode)?;
    let h_norm = d.h.norm_estimate(20);
    let (eps_res, mut eps_q) = guard_scales(opts, b, h_norm);
    let bnorm = vecops::norm(b).max(f64::MIN_POSITIVE);
    let mut report = SolveReport::new("cta");
    let mut k = 0usize;
    let mut halvings = 0usize;
    loop {
        let rnorm = vecops::norm(&d.r);
        if report.residual_history.last().map(|&(i, _)| i) != Some(k) {
            report.residual_history.push((k, rnorm / bnorm));
        }
        if rnorm <= eps_res {
            report.verdict = Verdict::SystemSolved;
            break;
        }
        if k >= opts.max_iter {
            report.verdict = Verdict::NotConverged;
            report.events.push(format!("max_iter {} reached", opts.max_iter));
            break;
        }
        let t = match opts.schedule {
            Schedule::FixedT => opts.t,
            Schedule::Cycle(tm) => (k % tm) + 1,
        };
        match d.step(t, eps_q)? {
            StepResult::Updated => k += 1,
            StepResult::GradientGuard => {
                // premature for a system solve: tighten the gradient
                // tolerance and keep going, up to a cap
                if halvings < 60 {
                    eps_q *= 0.5;
                    halvings += 1;
                    report.events.push(format!(
                        "gradient guard fired early; halved gradient tolerance to {eps_q:.3e}"
                    ));
                    continue;
                }
                report.verdict = Verdict::NormalSolved;
                report.events.push("gradient guard fired (rᵀHr ≤ ε)".into());
                break;
            }
            StepResult::Breakdown => {
                report.verdict = Verdict::NormalSolved;
                report.events.push("H annihilated the residual".into());
                break;
            }
        }
    }
    report.iterations = k;
    report.matvecs = d.matvecs;
    report.finalize_norms(a, b, &d.x);
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Fixed-t iteration with the full composed-F₁ guard. When a fold clause
/// halts the loop, the returned solution is augmented along the fold
/// prefix, which tightens the normal-equation error to the √ε class.
pub fn ft_iterate(a: &SparseMatrix, b: &[f64], opts: &CtaOptions) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    opts.validate()?;
    let t = opts.t;
    let mut d = Driver::new(a, b, &vec![0.0; a.ncols()], opts.mode)?;
    let h_norm = d.h.norm_estimate(20);
    let (eps_res, mut eps_q) = guard_scales(opts, b, h_norm);
    let bnorm = vecops::norm(b).max(f64::MIN_POSITIVE);
    let mut report = SolveReport::new("cta-ft");
    let mut k = 0usize;
    let mut halvings = 0usize;
    loop {
        let rnorm = vecops::norm(&d.r);
        if report.residual_history.last().map(|&(i, _)| i) != Some(k) {
            report.residual_history.push((k, rnorm / bnorm));
        }
        if rnorm <= eps_res {
            report.verdict = Verdict::SystemSolved;
            report.events.push("residual guard: error class eps".into());
            break;
        }
        // fold entries j = 0..t-1 carry the quadratic forms of the guard
        let fold = f1_fold(&d.h, &d.r, t.saturating_sub(1))?;
        d.matvecs += fold.len() * d.h.mode().matvec_cost();
        while halvings < 60 && fold.iter().any(|e| e.qform <= eps_q) {
            eps_q *= 0.5;
            halvings += 1;
            report.events.push(format!(
                "gradient guard fired early; halved gradient tolerance to {eps_q:.3e}"
            ));
        }
        if fold[0].qform <= eps_q {
            report.verdict = Verdict::NormalSolved;
            report.events.push(match opts.mode {
                HMode::SymmetricPsd => "gradient guard at j=0: error class sqrt(eps)*sqrt(norm(A))".into(),
                _ => "gradient guard at j=0: error class sqrt(eps)".into(),
            });
            break;
        }
        if let Some(j) = (1..fold.len()).find(|&j| fold[j].qform <= eps_q) {
            // augmented solution along the fold prefix
            let mut acc = vec![0.0; d.r.len()];
            for entry in fold.iter().take(j) {
                vecops::axpy(entry.alpha, &entry.v, &mut acc);
            }
            let add = match opts.mode {
                HMode::SymmetricPsd => acc,
                _ => {
                    d.matvecs += 1;
                    a.transpose_matvec(&acc)?
                }
            };
            for i in 0..d.x.len() {
                d.x[i] += add[i];
            }
            report.verdict = Verdict::NormalSolved;
            report.events.push(format!(
                "fold guard at j={j}: augmented solution, error class sqrt(eps)"
            ));
            break;
        }
        if k >= opts.max_iter {
            report.verdict = Verdict::NotConverged;
            report.events.push(format!("max_iter {} reached", opts.max_iter));
            break;
        }
        match d.step(t, eps_q)? {
            StepResult::Updated => k += 1,
            StepResult::GradientGuard | StepResult::Breakdown => {
                report.verdict = Verdict::NormalSolved;
                report.events.push("H annihilated the residual".into());
                break;
            }
        }
    }
    report.iterations = k;
    report.matvecs = d.matvecs;
    report.finalize_norms(a, b, &d.x);
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitVerdict {
    SystemSolved,
    NormalSolved,
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct OrbitResult {
    /// ‖F_t(r₀)‖ for t = 1, 2, ….
    pub residual_norms: Vec<f64>,
    /// ‖AᵀF_t(r₀)‖ (computed as √(F_tᵀHF_t) in Gram mode).
    pub normal_residual_norms: Vec<f64>,
    /// Detected minimal-polynomial-driven termination order.
    pub degree: Option<usize>,
    pub verdict: OrbitVerdict,
    pub solution: Vec<f64>,
    /// Monic annihilating polynomial of r₀ with respect to H, ascending
    /// coefficients (constant first, leading 1 last). Empty if exhausted.
    pub minimal_poly: Vec<f64>,
    pub matvecs: usize,
}

/// Point-wise orbit F₁(r₀), F₂(r₀), … on one growing Krylov cache.
pub fn pointwise_orbit(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    eps: f64,
    t_cap: usize,
    mode: HMode,
) -> Result<OrbitResult> {
    let h = OperatorH::new(a, mode)?;
    let ax = a.matvec(x0)?;
    let r0: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let r0norm = vecops::norm(&r0);
    if r0norm == 0.0 {
        return Err(SolverError::InvalidOption("r0 = b - Ax0 must be nonzero".into()));
    }
    let h_norm = h.norm_estimate(20);
    let eps_res = eps * r0norm;
    let eps_q = eps * eps * r0norm * r0norm * h_norm.max(f64::MIN_POSITIVE);
    let t_cap = t_cap.min(h.dim()).min(MAX_T).max(1);

    let mut cache = KrylovCache::new(r0.clone())?;
    let mut matvecs = 1; // r0
    let mut residual_norms = Vec::new();
    let mut normal_residual_norms = Vec::new();
    let result = |verdict, degree, solution, poly, residual_norms: Vec<f64>, normal_residual_norms: Vec<f64>, matvecs| OrbitResult {
        residual_norms,
        normal_residual_norms,
        degree,
        verdict,
        solution,
        minimal_poly: poly,
        matvecs,
    };
    for t in 1..=t_cap {
        match cache.extend(&h, t) {
            Ok(applies) => matvecs += applies * mode.matvec_cost(),
            Err(SolverError::CacheOverflow { .. }) => {
                return Ok(result(
                    OrbitVerdict::Exhausted,
                    None,
                    x0.to_vec(),
                    Vec::new(),
                    residual_norms,
                    normal_residual_norms,
                    matvecs,
                ));
            }
            Err(e) => return Err(e),
        }
        // least-squares form of the auxiliary solve: near the terminating
        // order the moment system is too ill-conditioned to expose the
        // annihilation, the QR solve on the raw Krylov columns is not
        let sol = match solve_aux_ls(&cache, t) {
            Ok(s) => s,
            Err(SolverError::HAnnihilatedResidual) => {
                // Hr0 = 0: r0 lies in the kernel, the normal equation is
                // already satisfied at x0 and the annihilating polynomial
                // of r0 is just lambda
                residual_norms.push(r0norm);
                normal_residual_norms.push(0.0);
                return Ok(result(
                    OrbitVerdict::NormalSolved,
                    Some(t),
                    x0.to_vec(),
                    vec![0.0, 1.0],
                    residual_norms,
                    normal_residual_norms,
                    matvecs,
                ));
            }
            Err(e) => return Err(e),
        };
        let mut f = r0.clone();
        let mut hf = cache.column(1).to_vec();
        for i in 1..=t {
            vecops::axpy(-sol.alpha[i - 1], cache.column(i), &mut f);
            vecops::axpy(-sol.alpha[i - 1], cache.column(i + 1), &mut hf);
        }
        let fnorm = vecops::norm(&f);
        let qform = vecops::dot(&f, &hf).max(0.0);
        residual_norms.push(fnorm);
        normal_residual_norms.push(qform.sqrt());
        let system = fnorm <= eps_res;
        let normal = !system && qform <= eps_q;
        if system || normal {
            let mut dsum = vec![0.0; r0.len()];
            for i in 1..=t {
                vecops::axpy(sol.alpha[i - 1], cache.column(i - 1), &mut dsum);
            }
            let dx = match mode {
                HMode::SymmetricPsd => dsum,
                _ => {
                    matvecs += 1;
                    a.transpose_matvec(&dsum)?
                }
            };
            let x: Vec<f64> = x0.iter().zip(&dx).map(|(x0i, di)| x0i + di).collect();
            let poly = minimal_poly_from_alpha(&sol.alpha, !system);
            return Ok(result(
                if system {
                    OrbitVerdict::SystemSolved
                } else {
                    OrbitVerdict::NormalSolved
                },
                Some(t),
                x,
                poly,
                residual_norms,
                normal_residual_norms,
                matvecs,
            ));
        }
    }
    Ok(result(
        OrbitVerdict::Exhausted,
        None,
        x0.to_vec(),
        Vec::new(),
        residual_norms,
        normal_residual_norms,
        matvecs,
    ))
}

/// Monic annihilating polynomial of r₀ from the terminating coefficients:
/// F_s(r₀) = 0 gives λ^s + Σ_{i<s} (αᵢ/α_s)λ^i − 1/α_s; when only HF_s(r₀)
/// vanishes the polynomial gains a factor of λ.
fn minimal_poly_from_alpha(alpha: &[f64], multiply_by_lambda: bool) -> Vec<f64> {
    let s = alpha.len();
    let a_s = alpha[s - 1];
    if a_s == 0.0 {
        return Vec::new();
    }
    let mut coeffs = vec![0.0; s + 1];
    coeffs[0] = -1.0 / a_s;
    for i in 1..s {
        coeffs[i] = alpha[i - 1] / a_s;
    }
    coeffs[s] = 1.0;
    if multiply_by_lambda {
        let mut shifted = vec![0.0; s + 2];
        shifted[1..].copy_from_slice(&coeffs);
        shifted
    } else {
        coeffs
    }
}

/// CTA applied to the normal equation AᵀAx = Aᵀb through the shifted
/// moment system over H = AAᵀ, from a caller-supplied start.
pub fn normal_equation_iterate_from(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    opts: &CtaOptions,
) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    opts.validate()?;
    let t = opts.t;
    let h = OperatorH::new(a, HMode::Gram)?;
    let mut x = x0.to_vec();
    let ax = a.matvec(&x)?;
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut matvecs = 1usize;
    let atb = a.transpose_matvec(b)?;
    let eps_normal = match opts.tolerance {
        ToleranceMode::Absolute => opts.eps,
        ToleranceMode::Relative => opts.eps * vecops::norm(&atb).max(f64::MIN_POSITIVE),
    };
    let bnorm = vecops::norm(b).max(f64::MIN_POSITIVE);
    let mut report = SolveReport::new("cta-normal");
    let mut k = 0usize;
    let mut since_recompute = 0usize;
    loop {
        let atr = a.transpose_matvec(&r)?;
        matvecs += 1;
        report.residual_history.push((k, vecops::norm(&r) / bnorm));
        if vecops::norm(&atr) <= eps_normal {
            report.verdict = Verdict::NormalSolved;
            break;
        }
        if k >= opts.max_iter {
            report.verdict = Verdict::NotConverged;
            report.events.push(format!("max_iter {} reached", opts.max_iter));
            break;
        }
        let mut cache = KrylovCache::new(r.clone())?;
        // shifted moments reach index 2t+1, one order past the plain system
        let applies = cache.extend(&h, t + 1)?;
        matvecs += applies * HMode::Gram.matvec_cost();
        let sol = match solve_aux(&cache, t, 1) {
            Ok(s) => s,
            Err(SolverError::HAnnihilatedResidual) => {
                report.verdict = Verdict::NormalSolved;
                report.events.push("H annihilated the residual: exact normal solution".into());
                break;
            }
            Err(e) => return Err(e),
        };
        let mut f = r.clone();
        let mut dsum = vec![0.0; r.len()];
        for i in 1..=t {
            vecops::axpy(-sol.alpha[i - 1], cache.column(i), &mut f);
            vecops::axpy(sol.alpha[i - 1], cache.column(i - 1), &mut dsum);
        }
        let dx = a.transpose_matvec(&dsum)?;
        matvecs += 1;
        for i in 0..x.len() {
            x[i] += dx[i];
        }
        r = f;
        since_recompute += 1;
        if since_recompute >= 256 {
            let ax = a.matvec(&x)?;
            matvecs += 1;
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            since_recompute = 0;
        }
        k += 1;
    }
    report.iterations = k;
    report.matvecs = matvecs;
    report.finalize_norms(a, b, &x);
    if report.verdict == Verdict::NormalSolved {
        let (eps_res, _) = guard_scales(opts, b, 1.0);
        if report.residual_norm <= eps_res {
            report.verdict = Verdict::SystemSolved;
        }
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn normal_equation_iterate(
    a: &SparseMatrix,
    b: &[f64],
    opts: &CtaOptions,
) -> Result<SolveReport> {
    normal_equation_iterate_from(a, b, &vec![0.0; a.ncols()], opts)
}

/// Runs CTA on Ax=b and switches to the normal equation when the residual
/// stops improving: the switch fires when ‖r_k‖/‖r_{k−W}‖ > η.
pub fn hybrid_solve(a: &SparseMatrix, b: &[f64], opts: &CtaOptions) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    opts.validate()?;
    if !opts.hybrid.enabled {
        return Err(SolverError::InvalidOption("hybrid_solve requires hybrid.enabled".into()));
    }
    let w = opts.hybrid.window;
    let eta = opts.hybrid.eta;
    let mut d = Driver::new(a, b, &vec![0.0; a.ncols()], opts.mode)?;
    let h_norm = d.h.norm_estimate(20);
    let (eps_res, mut eps_q) = guard_scales(opts, b, h_norm);
    let bnorm = vecops::norm(b).max(f64::MIN_POSITIVE);
    let mut report = SolveReport::new("cta-hybrid");
    let mut norms: Vec<f64> = vec![vecops::norm(&d.r)];
    let mut k = 0usize;
    let mut halvings = 0usize;
    let mut switched = false;
    loop {
        let rnorm = *norms.last().unwrap();
        if report.residual_history.last().map(|&(i, _)| i) != Some(k) {
            report.residual_history.push((k, rnorm / bnorm));
        }
        if rnorm <= eps_res {
            report.verdict = Verdict::SystemSolved;
            break;
        }
        if k >= opts.max_iter {
            report.verdict = Verdict::NotConverged;
            break;
        }
        if k >= w && norms[k] / norms[k - w] > eta {
            switched = true;
            report.events.push(format!("switched to normal equation at iteration {k}"));
            break;
        }
        let t = match opts.schedule {
            Schedule::FixedT => opts.t,
            Schedule::Cycle(tm) => (k % tm) + 1,
        };
        match d.step(t, eps_q)? {
            StepResult::Updated => {
                norms.push(vecops::norm(&d.r));
                k += 1;
            }
            StepResult::GradientGuard => {
                if halvings < 60 {
                    eps_q *= 0.5;
                    halvings += 1;
                    continue;
                }
                report.verdict = Verdict::NormalSolved;
                break;
            }
            StepResult::Breakdown => {
                report.verdict = Verdict::NormalSolved;
                break;
            }
        }
    }
    if switched {
        let mut inner_opts = opts.clone();
        inner_opts.max_iter = opts.max_iter.saturating_sub(k);
        let mut inner = normal_equation_iterate_from(a, b, &d.x, &inner_opts)?;
        inner.solver = "cta-hybrid".into();
        inner.iterations += k;
        inner.matvecs += d.matvecs;
        inner.events = report
            .events
            .into_iter()
            .chain(inner.events.into_iter())
            .collect();
        let offset_hist: Vec<(usize, f64)> = report
            .residual_history
            .into_iter()
            .chain(inner.residual_history.iter().map(|&(i, v)| (i + k, v)))
            .collect();
        inner.residual_history = offset_hist;
        inner.seconds = start.elapsed().as_secs_f64();
        return Ok(inner);
    }
    report.iterations = k;
    report.matvecs = d.matvecs;
    report.finalize_norms(a, b, &d.x);
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// A factor of the minimal polynomial of a symmetric PSD matrix, found by
/// orbiting on Hx = b with a seeded b in range(H).
pub fn minimal_poly_factor(h_matrix: &SparseMatrix, seed: u64) -> Result<Vec<f64>> {
    if !h_matrix.is_symmetric() {
        return Err(SolverError::InvalidMatrix(
            "minimal_poly_factor requires a symmetric matrix".into(),
        ));
    }
    let n = h_matrix.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = h_matrix.matvec(&z)?;
    if vecops::norm(&b) == 0.0 {
        return Err(SolverError::InvalidMatrix("seeded right-hand side vanished".into()));
    }
    let orbit = pointwise_orbit(h_matrix, &b, &vec![0.0; n], 1e-12, n.min(MAX_T), HMode::SymmetricPsd)?;
    if orbit.verdict == OrbitVerdict::Exhausted || orbit.minimal_poly.is_empty() {
        return Err(SolverError::InvalidOption(
            "orbit exhausted without detecting an annihilating polynomial".into(),
        ));
    }
    Ok(orbit.minimal_poly)
}

/// Dense spectral diagnostics of the realized H operator.
#[derive(Debug, Clone)]
pub struct SpectralStats {
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    /// Ratio of the largest to the smallest positive eigenvalue.
    pub kappa_plus: f64,
    /// c(H) = 1 / (κ⁺ λ_max).
    pub c_h: f64,
}
