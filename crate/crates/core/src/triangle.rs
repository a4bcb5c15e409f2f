//! Triangle Algorithm solvers: ellipsoid-membership iteration with pivots
//! and witnesses. A run tests b ∈ E_{A,ρ} = {Ax : ‖x‖ ≤ ρ}; strict pivots
//! pull the iterate b′ toward b, witnesses certify b is outside the current
//! ellipsoid and let ρ grow.

use crate::error::{Result, SolverError};
use crate::operator::{HMode, OperatorH};
use crate::report::{SolveReport, ToleranceMode, Verdict};
use crate::sparse::SparseMatrix;
use crate::vecops;

#[derive(Debug, Clone)]
pub struct TaOptions {
    pub eps: f64,
    /// Normal-equation guard ε′ (on ‖Aᵀ(b−b′)‖).
    pub eps_grad: f64,
    pub tolerance: ToleranceMode,
    pub max_iter: Option<usize>,
    /// When the normal guard fires first, halve ε′ and resume, at most
    /// this many times, before accepting the normal verdict.
    pub restart_halvings: usize,
}

impl Default for TaOptions {
    fn default() -> Self {
        TaOptions {
            eps: 1e-8,
            eps_grad: 1e-8,
            tolerance: ToleranceMode::Relative,
            max_iter: None,
            restart_halvings: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TAState {
    pub x: Vec<f64>,
    /// Current iterate b′ = A x.
    pub b_iter: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub matvecs: usize,
}

impl TAState {
    pub fn start(m: usize, n: usize) -> Self {
        TAState {
            x: vec![0.0; n],
            b_iter: vec![0.0; m],
            rho: 0.0,
            iterations: 0,
            matvecs: 0,
        }
    }
}

/// A certificate that b ∉ E_{A,ρ}: the strict-pivot test fails at b′,
/// and ℓ = (b−b′)ᵀb / ‖Aᵀ(b−b′)‖ lower-bounds the minimum-norm solution.
#[derive(Debug, Clone)]
pub struct Witness {
    pub b_iter: Vec<f64>,
    pub rho_witnessed: f64,
    pub lower_bound: f64,
    /// Set when the pivot existed but coincided with b′ (no progress
    /// possible on the segment); treated as a witness.
    pub degenerate: bool,
}

#[derive(Debug)]
pub enum StepOutcome {
    Converged,
    NormalConverged,
    Improved,
    FoundWitness(Witness),
}

/// One Triangle Algorithm step with thresholds already in absolute form.
/// On Improved, the state is advanced in place and ‖b − b′‖ strictly
/// decreases.
pub fn pivot_step(
    a: &SparseMatrix,
    b: &[f64],
    state: &mut TAState,
    eps_abs: f64,
    eps_grad_abs: f64,
) -> Result<StepOutcome> {
    let g: Vec<f64> = b.iter().zip(&state.b_iter).map(|(bi, pi)| bi - pi).collect();
    if vecops::norm(&g) <= eps_abs {
        return Ok(StepOutcome::Converged);
    }
    let c = a.transpose_matvec(&g)?;
    state.matvecs += 1;
    let cnorm = vecops::norm(&c);
    if cnorm <= eps_grad_abs {
        return Ok(StepOutcome::NormalConverged);
    }
    let gb = vecops::dot(&g, b);
    if state.rho * cnorm < gb {
        return Ok(StepOutcome::FoundWitness(Witness {
            b_iter: state.b_iter.clone(),
            rho_witnessed: state.rho,
            lower_bound: gb / cnorm,
            degenerate: false,
        }));
    }
    // strict pivot v_ρ = ρ A c / ‖c‖; move to the nearest point of b on
    // the segment [b′, v_ρ]
    let mut v = a.matvec(&c)?;
    state.matvecs += 1;
    vecops::scale(state.rho / cnorm, &mut v);
    let d: Vec<f64> = v.iter().zip(&state.b_iter).map(|(vi, pi)| vi - pi).collect();
    let dn2 = vecops::dot(&d, &d);
    if dn2 <= f64::MIN_POSITIVE {
        return Ok(StepOutcome::FoundWitness(Witness {
            b_iter: state.b_iter.clone(),
            rho_witnessed: state.rho,
            lower_bound: gb / cnorm,
            degenerate: true,
        }));
    }
    let alpha = (vecops::dot(&g, &d) / dn2).clamp(0.0, 1.0);
    let scale_x = state.rho / cnorm;
    for i in 0..state.b_iter.len() {
        state.b_iter[i] += alpha * d[i];
    }
    for i in 0..state.x.len() {
        state.x[i] = (1.0 - alpha) * state.x[i] + alpha * scale_x * c[i];
    }
    state.iterations += 1;
    Ok(StepOutcome::Improved)
}

pub struct TaResult {
    pub report: SolveReport,
    pub rho: f64,
    pub witnesses: Vec<Witness>,
}

fn scaled_tols(opts: &TaOptions, a: &SparseMatrix, b: &[f64]) -> Result<(f64, f64)> {
    match opts.tolerance {
        ToleranceMode::Absolute => Ok((opts.eps, opts.eps_grad)),
        ToleranceMode::Relative => {
            let atb = a.transpose_matvec(b)?;
            Ok((opts.eps * vecops::norm(b), opts.eps_grad * vecops::norm(&atb)))
        }
    }
}

fn dynamic_iter_cap(a_norm2_est: f64, rho: f64, eps_abs: f64) -> usize {
    let raw = 10.0 * (a_norm2_est * rho * rho / (eps_abs * eps_abs)).ceil();
    if !raw.is_finite() || raw >= 1e7 {
        10_000_000
    } else {
        (raw as usize).max(100)
    }
}

/// Full Triangle Algorithm: grows ρ on witnesses until an ε-approximate
/// solution of Ax=b or an ε′-approximate normal-equation solution is found.
pub fn ta_solve(a: &SparseMatrix, b: &[f64], opts: &TaOptions) -> Result<TaResult> {
    let start = std::time::Instant::now();
    if vecops::norm(b) == 0.0 {
        return Err(SolverError::InvalidOption("b must be nonzero".into()));
    }
    let (eps_abs, mut eps_grad_abs) = scaled_tols(opts, a, b)?;
    let gram = OperatorH::new(a, HMode::Gram)?;
    let a_norm2 = gram.norm_estimate(20);
    let bnorm = vecops::norm(b);

    let mut state = TAState::start(a.nrows(), a.ncols());
    let mut report = SolveReport::new("ta");
    let mut witnesses = Vec::new();
    let mut halvings = 0usize;
    let mut since_recompute = 0usize;
    loop {
        let cap = opts
            .max_iter
            .unwrap_or_else(|| dynamic_iter_cap(a_norm2, state.rho, eps_abs));
        if state.iterations >= cap {
            report.verdict = Verdict::NotConverged;
            report.events.push(format!("max_iter {cap} reached"));
            break;
        }
        if since_recompute >= 256 {
            state.b_iter = a.matvec(&state.x)?;
            state.matvecs += 1;
            since_recompute = 0;
        }
        match pivot_step(a, b, &mut state, eps_abs, eps_grad_abs)? {
            StepOutcome::Converged => {
                report.verdict = Verdict::SystemSolved;
                break;
            }
            StepOutcome::NormalConverged => {
                let g: Vec<f64> =
                    b.iter().zip(&state.b_iter).map(|(bi, pi)| bi - pi).collect();
                if vecops::norm(&g) > eps_abs && halvings < opts.restart_halvings {
                    eps_grad_abs *= 0.5;
                    halvings += 1;
                    report
                        .events
                        .push(format!("normal guard fired; halved eps' to {eps_grad_abs:.3e}"));
                    continue;
                }
                report.verdict = Verdict::NormalSolved;
                break;
            }
            StepOutcome::Improved => {
                since_recompute += 1;
                if state.iterations % 10 == 0 || state.iterations == 1 {
                    let g: Vec<f64> =
                        b.iter().zip(&state.b_iter).map(|(bi, pi)| bi - pi).collect();
                    report
                        .residual_history
                        .push((state.iterations, vecops::norm(&g) / bnorm));
                }
            }
            StepOutcome::FoundWitness(w) => {
                let new_rho = (2.0 * state.rho).max(w.lower_bound);
                report.events.push(format!(
                    "witness at rho {:.6e}; lower bound {:.6e}; rho -> {new_rho:.6e}",
                    w.rho_witnessed, w.lower_bound
                ));
                witnesses.push(w);
                state.rho = new_rho;
            }
        }
    }
    report.iterations = state.iterations;
    report.matvecs = state.matvecs;
    report.finalize_norms(a, b, &state.x);
    report.seconds = start.elapsed().as_secs_f64();
    Ok(TaResult {
        report,
        rho: state.rho,
        witnesses,
    })
}

/// Triangle Algorithm for symmetric PSD A: one matvec per iteration,
/// pivot norms through the A-quadratic form √((b−b′)ᵀA(b−b′)).
pub fn ta_solve_psd(a: &SparseMatrix, b: &[f64], opts: &TaOptions) -> Result<TaResult> {
    let start = std::time::Instant::now();
    if !a.is_symmetric() {
        return Err(SolverError::InvalidMatrix(
            "ta_solve_psd requires the symmetry flag".into(),
        ));
    }
    if vecops::norm(b) == 0.0 {
        return Err(SolverError::InvalidOption("b must be nonzero".into()));
    }
    let (eps_abs, mut eps_grad_abs) = scaled_tols(opts, a, b)?;
    let h = OperatorH::new(a, HMode::SymmetricPsd)?;
    let a_norm = h.norm_estimate(20);
    let bnorm = vecops::norm(b);
    let psd_tol = 1e-12 * a_norm * bnorm * bnorm;

    let mut state = TAState::start(a.nrows(), a.ncols());
    let mut report = SolveReport::new("ta-psd");
    let mut witnesses = Vec::new();
    let mut halvings = 0usize;
    let mut since_recompute = 0usize;
    loop {
        let cap = opts
            .max_iter
            .unwrap_or_else(|| dynamic_iter_cap(a_norm * a_norm, state.rho, eps_abs));
        if state.iterations >= cap {
            report.verdict = Verdict::NotConverged;
            report.events.push(format!("max_iter {cap} reached"));
            break;
        }
        if since_recompute >= 256 {
            state.b_iter = a.matvec(&state.x)?;
            state.matvecs += 1;
            since_recompute = 0;
        }
        let g: Vec<f64> = b.iter().zip(&state.b_iter).map(|(bi, pi)| bi - pi).collect();
        let gnorm = vecops::norm(&g);
        if gnorm <= eps_abs {
            report.verdict = Verdict::SystemSolved;
            break;
        }
        let ag = a.matvec(&g)?;
        state.matvecs += 1;
        let q = vecops::dot(&g, &ag);
        if q < -psd_tol {
            return Err(SolverError::PsdViolation(format!(
                "(b-b')ᵀA(b-b') = {q:.3e} < 0"
            )));
        }
        let chat = q.max(0.0).sqrt();
        if chat <= eps_grad_abs {
            if halvings < opts.restart_halvings {
                eps_grad_abs *= 0.5;
                halvings += 1;
                report
                    .events
                    .push(format!("normal guard fired; halved eps' to {eps_grad_abs:.3e}"));
                continue;
            }
            report.verdict = Verdict::NormalSolved;
            break;
        }
        let gb = vecops::dot(&g, b);
        if state.rho * chat < gb {
            let w = Witness {
                b_iter: state.b_iter.clone(),
                rho_witnessed: state.rho,
                lower_bound: gb / chat,
                degenerate: false,
            };
            let new_rho = (2.0 * state.rho).max(w.lower_bound);
            report.events.push(format!(
                "witness at rho {:.6e}; rho -> {new_rho:.6e}",
                w.rho_witnessed
            ));
            witnesses.push(w);
            state.rho = new_rho;
            continue;
        }
        let scale = state.rho / chat;
        let v: Vec<f64> = ag.iter().map(|x| scale * x).collect();
        let d: Vec<f64> = v.iter().zip(&state.b_iter).map(|(vi, pi)| vi - pi).collect();
        let dn2 = vecops::dot(&d, &d);
        if dn2 <= f64::MIN_POSITIVE {
            let w = Witness {
                b_iter: state.b_iter.clone(),
                rho_witnessed: state.rho,
                lower_bound: gb / chat,
                degenerate: true,
            };
            let new_rho = (2.0 * state.rho).max(w.lower_bound);
            report.events.push("degenerate pivot; treated as witness".into());
            witnesses.push(w);
            state.rho = new_rho;
            continue;
        }
        let alpha = (vecops::dot(&g, &d) / dn2).clamp(0.0, 1.0);
        for i in 0..state.b_iter.len() {
            state.b_iter[i] += alpha * d[i];
        }
        for i in 0..state.x.len() {
            state.x[i] = (1.0 - alpha) * state.x[i] + alpha * scale * g[i];
        }
        state.iterations += 1;
        since_recompute += 1;
        if state.iterations % 10 == 0 || state.iterations == 1 {
            report
                .residual_history
                .push((state.iterations, vecops::norm(&g) / bnorm));
        }
    }
    report.iterations = state.iterations;
    report.matvecs = state.matvecs;
    report.finalize_norms(a, b, &state.x);
    report.seconds = start.elapsed().as_secs_f64();
    Ok(TaResult {
        report,
        rho: state.rho,
        witnesses,
    })
}

#[derive(Debug, Clone)]
pub struct MinNormBracket {
    pub rho_upper: f64,
    pub rho_lower: f64,
    pub x: Vec<f64>,
    pub outer_iterations: usize,
}

enum FixedRhoOutcome {
    Solved(Vec<f64>),
    Witness(Witness),
    NormalExact(Vec<f64>),
    MaxIter,
}

/// TA restricted to a fixed ellipsoid E_{A,ρ}: succeeds, certifies b
/// outside, or degenerates to an exact normal solution (c ≈ 0).
fn ta_fixed_rho(
    a: &SparseMatrix,
    b: &[f64],
    rho: f64,
    eps_abs: f64,
    c_zero_abs: f64,
    max_iter: usize,
    matvecs: &mut usize,
) -> Result<FixedRhoOutcome> {
    let mut state = TAState::start(a.nrows(), a.ncols());
    state.rho = rho;
    let mut since_recompute = 0usize;
    let out = loop {
        if state.iterations >= max_iter {
            break FixedRhoOutcome::MaxIter;
        }
        if since_recompute >= 256 {
            state.b_iter = a.matvec(&state.x)?;
            state.matvecs += 1;
            since_recompute = 0;
        }
        match pivot_step(a, b, &mut state, eps_abs, c_zero_abs)? {
            StepOutcome::Converged => break FixedRhoOutcome::Solved(state.x.clone()),
            StepOutcome::NormalConverged => break FixedRhoOutcome::NormalExact(state.x.clone()),
            StepOutcome::Improved => since_recompute += 1,
            StepOutcome::FoundWitness(w) => break FixedRhoOutcome::Witness(w),
        }
    };
    *matvecs += state.matvecs;
    Ok(out)
}

/// Bisection for an ε-approximate minimum-norm solution, seeded with any
/// ε-approximate solution x_eps.
pub fn ta_min_norm(
    a: &SparseMatrix,
    b: &[f64],
    opts: &TaOptions,
    x_eps: &[f64],
) -> Result<(MinNormBracket, TaResult)> {
    let start = std::time::Instant::now();
    if vecops::norm(b) == 0.0 {
        return Err(SolverError::InvalidOption("b must be nonzero".into()));
    }
    let (eps_abs, _) = scaled_tols(opts, a, b)?;
    let ax = a.matvec(x_eps)?;
    let seed_res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    if vecops::norm(&seed_res) > eps_abs * (1.0 + 1e-8) {
        return Err(SolverError::InvalidOption(
            "seed is not an eps-approximate solution".into(),
        ));
    }
    let gram = OperatorH::new(a, HMode::Gram)?;
    let a_norm2 = gram.norm_estimate(20);
    let c_zero_abs = 1e-14 * a_norm2.sqrt() * vecops::norm(b);

    let mut matvecs = 2usize; // seed check + norm estimate amortized
    let mut report = SolveReport::new("ta-minnorm");
    let mut witnesses = Vec::new();
    let mut upper = vecops::norm(x_eps);
    let mut lower = 0.0f64;
    let mut x_best = x_eps.to_vec();
    let mut outer = 0usize;
    let inner_cap = opts.max_iter.unwrap_or(1_000_000);
    while upper - lower > eps_abs {
        outer += 1;
        let rho = 0.5 * (upper + lower);
        match ta_fixed_rho(a, b, rho, eps_abs, c_zero_abs, inner_cap, &mut matvecs)? {
            FixedRhoOutcome::Solved(x) => {
                upper = rho;
                x_best = x;
                report
                    .events
                    .push(format!("phase {outer}: solved at rho {rho:.6e}"));
            }
            FixedRhoOutcome::Witness(w) => {
                lower = rho.max(w.lower_bound);
                report.events.push(format!(
                    "phase {outer}: witness, lower bound -> {lower:.6e}"
                ));
                witnesses.push(w);
            }
            FixedRhoOutcome::NormalExact(x) => {
                x_best = x;
                report.verdict = Verdict::NormalSolved;
                report.events.push(format!(
                    "phase {outer}: gradient vanished, exact normal solution"
                ));
                break;
            }
            FixedRhoOutcome::MaxIter => {
                report.verdict = Verdict::NotConverged;
                report
                    .events
                    .push(format!("phase {outer}: inner iteration cap {inner_cap}"));
                break;
            }
        }
        report.iterations = outer;
    }
    if report.verdict == Verdict::NotConverged && upper - lower <= eps_abs {
        report.verdict = Verdict::MinNormSolved;
    }
    report.iterations = outer;
    report.matvecs = matvecs;
    report.finalize_norms(a, b, &x_best);
    report.seconds = start.elapsed().as_secs_f64();
    let bracket = MinNormBracket {
        rho_upper: upper,
        rho_lower: lower,
        x: x_best,
        outer_iterations: outer,
    };
    Ok((
        bracket,
        TaResult {
            report,
            rho: upper,
            witnesses,
        },
    ))
}
