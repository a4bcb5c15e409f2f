//! `cta`: solve single systems, run benchmark suites, probe point-wise
//! orbits. Reports are JSON and round-trip through the library's own
//! serde definitions; exit codes encode the verdict.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cta_core::bench;
use cta_core::cta::{self, CtaOptions, HybridOptions, Schedule};
use cta_core::mm;
use cta_core::triangle::{self, TaOptions};
use cta_core::{HMode, Result, SolveReport, SolverError, SparseMatrix, ToleranceMode, Verdict};

#[derive(Parser)]
#[command(name = "cta", version, about = "Sparse iterative solvers: TA/CTA with CG and GMRES baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single system from a Matrix Market file.
    Solve(SolveArgs),
    /// Run a benchmark grid from a config file.
    Bench(BenchArgs),
    /// Print the point-wise orbit table ‖F_t(r0)‖, ‖AᵀF_t(r0)‖.
    Orbit(OrbitArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ta,
    TaPsd,
    TaMinnorm,
    Cta,
    CtaOrbit,
    CtaNormal,
    Hybrid,
    Cg,
    Gmres,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Auto,
    Psd,
    Gram,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Precond {
    None,
    Jacobi,
    Ilu0,
}

#[derive(Args)]
struct SolveArgs {
    /// Matrix Market coordinate or array file.
    #[arg(long)]
    matrix: PathBuf,
    /// Right-hand side: a vector file path, `ones`, or `seeded`.
    #[arg(long, default_value = "ones")]
    rhs: String,
    #[arg(long, value_enum)]
    method: Method,
    /// Order of the CTA operator F_t.
    #[arg(long, default_value_t = 1)]
    t: usize,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    /// Gradient-guard tolerance; defaults to eps.
    #[arg(long)]
    eps_grad: Option<f64>,
    /// H realization: auto picks psd for symmetric inputs with
    /// --assume-psd, gram otherwise.
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    mode: Mode,
    /// Assert that a symmetric input is positive semidefinite.
    #[arg(long, default_value_t = false)]
    assume_psd: bool,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Precond::None)]
    precond: Precond,
    /// GMRES restart length.
    #[arg(long, default_value_t = 5)]
    restart: usize,
    /// Seed for `--rhs seeded`.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the solution vector, one value per line.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output_dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OrbitArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value = "ones")]
    rhs: String,
    #[arg(long, default_value_t = 30)]
    max_degree: usize,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    mode: Mode,
    #[arg(long, default_value_t = false)]
    assume_psd: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Orbit(args) => cmd_orbit(&args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_rhs(spec: &str, a: &SparseMatrix, seed: u64) -> Result<Vec<f64>> {
    match spec {
        "ones" => Ok(vec![1.0; a.nrows()]),
        "seeded" => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            Ok((0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        }
        path => {
            let v = mm::read_vector(path)?;
            if v.len() != a.nrows() {
                return Err(SolverError::DimensionMismatch { expected: a.nrows(), got: v.len() });
            }
            Ok(v)
        }
    }
}

fn pick_mode(mode: Mode, a: &SparseMatrix, assume_psd: bool) -> Result<HMode> {
    match mode {
        Mode::Gram => Ok(HMode::Gram),
        Mode::Psd => {
            if !a.is_symmetric() {
                return Err(SolverError::InvalidOption(
                    "--mode psd requires a symmetric matrix file".into(),
                ));
            }
            Ok(HMode::SymmetricPsd)
        }
        Mode::Auto => {
            if a.is_symmetric() && assume_psd {
                Ok(HMode::SymmetricPsd)
            } else {
                Ok(HMode::Gram)
            }
        }
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let a = mm::read_matrix_market(&args.matrix)?;
    let b = load_rhs(&args.rhs, &a, args.seed)?;
    let eps_grad = args.eps_grad.unwrap_or(args.eps);
    let hmode = pick_mode(args.mode, &a, args.assume_psd)?;

    let ta_opts = TaOptions {
        eps: args.eps,
        eps_grad,
        tolerance: ToleranceMode::Relative,
        max_iter: Some(args.max_iter),
        ..Default::default()
    };
    let cta_opts = CtaOptions {
        t: args.t.max(1),
        eps: args.eps,
        eps_grad,
        tolerance: ToleranceMode::Relative,
        max_iter: args.max_iter,
        mode: hmode,
        schedule: Schedule::FixedT,
        hybrid: HybridOptions::default(),
    };

    let report: SolveReport = match args.method {
        Method::Ta => triangle::ta_solve(&a, &b, &ta_opts)?.report,
        Method::TaPsd => triangle::ta_solve_psd(&a, &b, &ta_opts)?.report,
        Method::TaMinnorm => {
            // Seed the bisection with an eps-approximate solution.
            let seed_report = cta::hybrid_solve(
                &a,
                &b,
                &CtaOptions {
                    hybrid: HybridOptions { enabled: true, ..Default::default() },
                    mode: HMode::Gram,
                    ..cta_opts.clone()
                },
            )?;
            if seed_report.verdict != Verdict::SystemSolved {
                let mut r = seed_report;
                r.events.push("min-norm seed solve did not reach eps; system may be inconsistent".into());
                r
            } else {
                let (_, result) = triangle::ta_min_norm(&a, &b, &ta_opts, &seed_report.solution)?;
                result.report
            }
        }
        Method::Cta => cta::ft_iterate(&a, &b, &cta_opts)?,
        Method::CtaOrbit => {
            let t_cap = if args.t > 1 { args.t } else { 30 };
            let orbit = cta::pointwise_orbit(&a, &b, &vec![0.0; a.ncols()], args.eps, t_cap, hmode)?;
            orbit_report(&a, &b, &orbit)
        }
        Method::CtaNormal => cta::normal_equation_iterate(&a, &b, &cta_opts)?,
        Method::Hybrid => cta::hybrid_solve(
            &a,
            &b,
            &CtaOptions {
                hybrid: HybridOptions { enabled: true, ..Default::default() },
                ..cta_opts.clone()
            },
        )?,
        Method::Cg | Method::Gmres => {
            use cta_core::baselines::{BaselineMethod, BaselineOptions, Preconditioner};
            let opts = BaselineOptions {
                method: if args.method == Method::Cg { BaselineMethod::Cg } else { BaselineMethod::Gmres },
                restart: args.restart,
                eps: args.eps,
                max_iter: args.max_iter,
                preconditioner: match args.precond {
                    Precond::None => Preconditioner::None,
                    Precond::Jacobi => Preconditioner::Jacobi,
                    Precond::Ilu0 => Preconditioner::Ilu0,
                },
            };
            cta_core::baselines::baseline_solve(&a, &b, &opts)?
        }
    };

    println!(
        "{}: {:?}  iterations={} matvecs={} relres={:.3e} normalrel={:.3e} time={:.3}s",
        report.solver,
        report.verdict,
        report.iterations,
        report.matvecs,
        report.residual_norm_rel,
        report.normal_residual_norm_rel,
        report.seconds
    );
    for ev in &report.events {
        println!("event: {ev}");
    }
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| SolverError::InvalidOption(format!("report serialization: {e}")))?;
        std::fs::write(path, json)?;
    }
    if let Some(path) = &args.solution {
        mm::write_vector(&report.solution, path)?;
    }
    Ok(report.verdict.exit_code() as u8)
}

/// Wrap an orbit probe into the common report shape so `solve
/// --method cta-orbit` serializes like every other method.
fn orbit_report(a: &SparseMatrix, b: &[f64], orbit: &cta::OrbitResult) -> SolveReport {
    let mut report = SolveReport::new("cta-orbit");
    report.verdict = match orbit.verdict {
        cta::OrbitVerdict::SystemSolved => Verdict::SystemSolved,
        cta::OrbitVerdict::NormalSolved => Verdict::NormalSolved,
        cta::OrbitVerdict::Exhausted => Verdict::NotConverged,
    };
    report.iterations = orbit.degree.unwrap_or(orbit.residual_norms.len());
    report.matvecs = orbit.matvecs;
    let bnorm = cta_core::vecops::norm(b).max(f64::MIN_POSITIVE);
    report.residual_history = orbit
        .residual_norms
        .iter()
        .enumerate()
        .map(|(i, &r)| (i + 1, r / bnorm))
        .collect();
    if let Some(deg) = orbit.degree {
        report.events.push(format!("orbit terminated at degree {deg}"));
    }
    if !orbit.minimal_poly.is_empty() {
        report.events.push(format!(
            "minimal polynomial coefficients (ascending powers): {:?}",
            orbit.minimal_poly
        ));
    }
    report.finalize_norms(a, b, &orbit.solution);
    report
}

fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = bench::parse_config(&text)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    let records = bench::run_experiment(&cfg)?;
    println!(
        "ran {} cells; results in {}",
        records.len(),
        cfg.output_dir.join("results.csv").display()
    );
    Ok(0)
}

fn cmd_orbit(args: &OrbitArgs) -> Result<u8> {
    let a = mm::read_matrix_market(&args.matrix)?;
    let b = load_rhs(&args.rhs, &a, args.seed)?;
    let hmode = pick_mode(args.mode, &a, args.assume_psd)?;
    let orbit = cta::pointwise_orbit(&a, &b, &vec![0.0; a.ncols()], args.eps, args.max_degree, hmode)?;
    println!("{:>4}  {:>24}  {:>24}", "t", "||F_t(r0)||", "||A'F_t(r0)||");
    for (i, (r, nr)) in orbit
        .residual_norms
        .iter()
        .zip(&orbit.normal_residual_norms)
        .enumerate()
    {
        println!("{:>4}  {:>24.16e}  {:>24.16e}", i + 1, r, nr);
    }
    match orbit.degree {
        Some(deg) => println!("verdict: {:?} at degree {deg}", orbit.verdict),
        None => println!("verdict: {:?}", orbit.verdict),
    }
    if !orbit.minimal_poly.is_empty() {
        let coeffs: Vec<String> = orbit.minimal_poly.iter().map(|c| format!("{c:.16e}")).collect();
        println!("minimal polynomial (ascending powers): [{}]", coeffs.join(", "));
    }
    let code = match orbit.verdict {
        cta::OrbitVerdict::SystemSolved => 0,
        cta::OrbitVerdict::NormalSolved => 2,
        cta::OrbitVerdict::Exhausted => 3,
    };
    Ok(code)
}
