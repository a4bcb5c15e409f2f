//! Matrix generators, spectral oracle, and the benchmark harness: runs a
//! recipes × solvers × tolerances grid, writes results.csv and per-cell
//! residual-history files for plotting.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{self, BaselineMethod, BaselineOptions, Preconditioner};
use crate::cta::{self, CtaOptions, Schedule, SpectralStats};
use crate::dense::{self, DenseMatrix};
use crate::error::{Result, SolverError};
use crate::mm;
use crate::operator::HMode;
use crate::report::{SolveReport, ToleranceMode, Verdict};
use crate::sparse::SparseMatrix;
use crate::triangle::{self, TaOptions};
use crate::vecops;

#[derive(Debug, Clone, PartialEq)]
pub enum RecipeKind {
    /// diag(1, 2, …, m)
    DiagRange(usize),
    /// diag(1², 2², …, m²)
    DiagSquares(usize),
    /// QΛQᵀ with seeded orthonormal Q and log-uniform Λ in [1, kappa].
    RandomSpd { n: usize, kappa: f64 },
    /// Rank-deficient QΛQᵀ: `rank` positive eigenvalues log-uniform in
    /// [1, kappa_plus], the rest exactly zero.
    RandomPsd { n: usize, rank: usize, kappa_plus: f64 },
    /// First row all ones, a_ij = 1/(i+j−1) elsewhere (1-based).
    Lotkin(usize),
    /// Tridiagonal diagonally dominant M-matrix.
    Dorr { n: usize, theta: f64 },
    FromFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRecipe {
    pub kind: RecipeKind,
    pub seed: u64,
}

impl fmt::Display for MatrixRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RecipeKind::DiagRange(m) => write!(f, "diagrange-{m}"),
            RecipeKind::DiagSquares(m) => write!(f, "diagsquares-{m}"),
            RecipeKind::RandomSpd { n, kappa } => {
                write!(f, "randomspd-{n}-k{kappa:e}-s{}", self.seed)
            }
            RecipeKind::RandomPsd { n, rank, kappa_plus } => {
                write!(f, "randompsd-{n}-r{rank}-k{kappa_plus:e}-s{}", self.seed)
            }
            RecipeKind::Lotkin(n) => write!(f, "lotkin-{n}"),
            RecipeKind::Dorr { n, theta } => write!(f, "dorr-{n}-t{theta:e}"),
            RecipeKind::FromFile(p) => {
                let stem = p.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
                write!(f, "file-{stem}")
            }
        }
    }
}

impl MatrixRecipe {
    /// Parse "DiagRange(5)", "RandomSPD(100,1e4)", "Dorr(10,0.01)",
    /// "FromFile(path)" and friends, case-insensitive on the name.
    pub fn parse(s: &str, seed: u64) -> Result<MatrixRecipe> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(p) if s.ends_with(')') => (&s[..p], &s[p + 1..s.len() - 1]),
            _ => (s, ""),
        };
        let parts: Vec<&str> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',').map(str::trim).collect()
        };
        let want = |k: usize| -> Result<()> {
            if parts.len() == k {
                Ok(())
            } else {
                Err(SolverError::InvalidConfig(format!(
                    "recipe {name} expects {k} argument(s), got {}",
                    parts.len()
                )))
            }
        };
        let num = |i: usize| -> Result<f64> {
            parts[i].parse::<f64>().map_err(|_| {
                SolverError::InvalidConfig(format!("recipe {name}: bad number '{}'", parts[i]))
            })
        };
        let int = |i: usize| -> Result<usize> {
            let v = num(i)?;
            if v < 1.0 || v.fract() != 0.0 {
                return Err(SolverError::InvalidConfig(format!(
                    "recipe {name}: expected positive integer, got '{}'",
                    parts[i]
                )));
            }
            Ok(v as usize)
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "diagrange" => {
                want(1)?;
                RecipeKind::DiagRange(int(0)?)
            }
            "diagsquares" => {
                want(1)?;
                RecipeKind::DiagSquares(int(0)?)
            }
            "randomspd" => {
                want(2)?;
                let kappa = num(1)?;
                if kappa < 1.0 {
                    return Err(SolverError::InvalidConfig("randomspd: kappa must be >= 1".into()));
                }
                RecipeKind::RandomSpd { n: int(0)?, kappa }
            }
            "randompsd" => {
                want(3)?;
                let n = int(0)?;
                let rank = int(1)?;
                let kp = num(2)?;
                if rank > n {
                    return Err(SolverError::InvalidConfig("randompsd: rank must be <= n".into()));
                }
                if kp < 1.0 {
                    return Err(SolverError::InvalidConfig("randompsd: kappa+ must be >= 1".into()));
                }
                RecipeKind::RandomPsd { n, rank, kappa_plus: kp }
            }
            "lotkin" => {
                want(1)?;
                RecipeKind::Lotkin(int(0)?)
            }
            "dorr" => {
                want(2)?;
                RecipeKind::Dorr { n: int(0)?, theta: num(1)? }
            }
            "fromfile" => {
                want(1)?;
                RecipeKind::FromFile(PathBuf::from(parts[0]))
            }
            other => {
                return Err(SolverError::InvalidConfig(format!("unknown recipe '{other}'")))
            }
        };
        Ok(MatrixRecipe { kind, seed })
    }
}

pub struct Generated {
    pub a: SparseMatrix,
    /// Known solution when the instance is constructed as b = A·x_true.
    pub x_true: Option<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Seeded random orthonormal basis via Gram-Schmidt on Gaussian-ish columns.
fn seeded_orthonormal(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    for i in 0..n {
        for pass in 0..2 {
            for j in 0..i {
                let proj = vecops::dot(&q[i], &q[j]);
                let qj = q[j].clone();
                vecops::axpy(-proj, &qj, &mut q[i]);
            }
            let _ = pass;
        }
        let nn = vecops::norm(&q[i]);
        vecops::scale(1.0 / nn, &mut q[i]);
    }
    q
}

/// Log-uniform spectrum in [1, kappa] with both endpoints pinned so the
/// realized condition number equals the target exactly.
fn log_uniform_spectrum(count: usize, kappa: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut lam = Vec::with_capacity(count);
    for i in 0..count {
        if i == 0 {
            lam.push(1.0);
        } else if i == count - 1 {
            lam.push(kappa);
        } else {
            lam.push((rng.gen_range(0.0..1.0) * kappa.ln()).exp());
        }
    }
    lam
}

fn spd_from_spectrum(n: usize, lam: &[f64], rng: &mut ChaCha8Rng) -> Result<SparseMatrix> {
    let q = seeded_orthonormal(n, rng);
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for (k, qk) in q.iter().enumerate() {
                s += qk[i] * lam[k] * qk[j];
            }
            d.set(i, j, s);
            d.set(j, i, s);
        }
    }
    let mut a = SparseMatrix::from_dense(n, n, &d.data)?;
    a.set_symmetric_unchecked()?;
    Ok(a)
}

pub fn generate(recipe: &MatrixRecipe) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let a = match &recipe.kind {
        RecipeKind::DiagRange(m) => {
            let d: Vec<f64> = (1..=*m).map(|i| i as f64).collect();
            let mut a = SparseMatrix::from_diag(&d);
            a.set_symmetric_unchecked()?;
            a
        }
        RecipeKind::DiagSquares(m) => {
            let d: Vec<f64> = (1..=*m).map(|i| (i * i) as f64).collect();
            let mut a = SparseMatrix::from_diag(&d);
            a.set_symmetric_unchecked()?;
            a
        }
        RecipeKind::RandomSpd { n, kappa } => {
            let lam = log_uniform_spectrum(*n, *kappa, &mut rng);
            spd_from_spectrum(*n, &lam, &mut rng)?
        }
        RecipeKind::RandomPsd { n, rank, kappa_plus } => {
            let mut lam = log_uniform_spectrum(*rank, *kappa_plus, &mut rng);
            lam.resize(*n, 0.0);
            spd_from_spectrum(*n, &lam, &mut rng)?
        }
        RecipeKind::Lotkin(n) => {
            let n = *n;
            let mut data = vec![0.0; n * n];
            for j in 0..n {
                data[j] = 1.0;
            }
            for i in 1..n {
                for j in 0..n {
                    data[i * n + j] = 1.0 / ((i + 1 + j + 1 - 1) as f64);
                }
            }
            SparseMatrix::from_dense(n, n, &data)?
        }
        RecipeKind::Dorr { n, theta } => dorr_matrix(*n, *theta)?,
        RecipeKind::FromFile(path) => mm::read_matrix_market(path)?,
    };
    // Consistent instance: draw x_true from the seeded stream and define
    // b = A x_true, exact by construction.
    let mut xr = ChaCha8Rng::seed_from_u64(recipe.seed ^ 0x9e37_79b9_7f4a_7c15);
    let x_true: Vec<f64> = (0..a.ncols()).map(|_| xr.gen_range(-1.0..1.0)).collect();
    let b = a.matvec(&x_true)?;
    Ok(Generated { a, x_true: Some(x_true), b })
}

/// Standard tridiagonal Dorr construction: convection-diffusion discretized
/// on a grid of spacing 1/(n+1) with parameter theta.
fn dorr_matrix(n: usize, theta: f64) -> Result<SparseMatrix> {
    if n < 2 {
        return Err(SolverError::InvalidConfig("dorr: n must be >= 2".into()));
    }
    if theta <= 0.0 {
        return Err(SolverError::InvalidConfig("dorr: theta must be positive".into()));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let term = theta / (h * h);
    let half = (n + 1) / 2;
    let mut c = vec![0.0; n]; // subdiagonal, row i column i-1
    let mut e = vec![0.0; n]; // superdiagonal, row i column i+1
    for i in 1..=n {
        let conv = (0.5 - i as f64 * h) / h;
        if i <= half {
            c[i - 1] = -term;
            e[i - 1] = -term - conv;
        } else {
            e[i - 1] = -term;
            c[i - 1] = -term + conv;
        }
    }
    let mut trips = Vec::with_capacity(3 * n);
    for i in 0..n {
        trips.push((i, i, -(c[i] + e[i])));
        if i > 0 {
            trips.push((i, i - 1, c[i]));
        }
        if i + 1 < n {
            trips.push((i, i + 1, e[i]));
        }
    }
    SparseMatrix::from_triplets(n, n, &trips)
}

/// Dense eigendecomposition of the realized H operator. Positive part of
/// the spectrum is everything above lambda_max * 1e-10.
pub fn spectral_oracle(a: &SparseMatrix, mode: HMode) -> Result<SpectralStats> {
    let n = match mode {
        HMode::SymmetricPsd | HMode::NormalGram => a.ncols(),
        HMode::Gram => a.nrows(),
    };
    if n > 2000 {
        return Err(SolverError::InvalidOption(format!(
            "spectral oracle is capped at n = 2000, got {n}"
        )));
    }
    let mut h = DenseMatrix::zeros(n, n);
    match mode {
        HMode::SymmetricPsd => {
            if !a.is_symmetric() {
                return Err(SolverError::InvalidMatrix(
                    "spectral oracle in PSD mode requires the symmetric flag".into(),
                ));
            }
            for (i, j, v) in a.iter() {
                h.set(i, j, v);
            }
        }
        HMode::Gram => {
            // H = AAᵀ: entry (i, j) is the dot product of rows i and j.
            let rows: Vec<Vec<(usize, f64)>> = (0..a.nrows())
                .map(|i| {
                    let lo = a.row_ptr()[i];
                    let hi = a.row_ptr()[i + 1];
                    (lo..hi).map(|p| (a.col_idx()[p], a.values()[p])).collect()
                })
                .collect();
            for i in 0..n {
                for j in 0..=i {
                    let mut s = 0.0;
                    let (mut pi, mut pj) = (0, 0);
                    while pi < rows[i].len() && pj < rows[j].len() {
                        match rows[i][pi].0.cmp(&rows[j][pj].0) {
                            std::cmp::Ordering::Less => pi += 1,
                            std::cmp::Ordering::Greater => pj += 1,
                            std::cmp::Ordering::Equal => {
                                s += rows[i][pi].1 * rows[j][pj].1;
                                pi += 1;
                                pj += 1;
                            }
                        }
                    }
                    h.set(i, j, s);
                    h.set(j, i, s);
                }
            }
        }
        HMode::NormalGram => {
            // H = AᵀA accumulated row by row: each stored row contributes
            // the outer product of its entries.
            let mut dense = vec![0.0; n * n];
            for i in 0..a.nrows() {
                let lo = a.row_ptr()[i];
                let hi = a.row_ptr()[i + 1];
                for p in lo..hi {
                    for q in lo..hi {
                        dense[a.col_idx()[p] * n + a.col_idx()[q]] +=
                            a.values()[p] * a.values()[q];
                    }
                }
            }
            h = DenseMatrix::from_rows(n, n, dense);
        }
    }
    let (eigenvalues, _) = dense::jacobi_eigen(&h)?;
    let lambda_max = *eigenvalues.last().unwrap_or(&0.0);
    let threshold = lambda_max * 1e-10;
    let lambda_min_pos = eigenvalues
        .iter()
        .copied()
        .find(|&l| l > threshold)
        .unwrap_or(lambda_max);
    let kappa_plus = if lambda_min_pos > 0.0 { lambda_max / lambda_min_pos } else { f64::INFINITY };
    let c_h = if lambda_max > 0.0 { 1.0 / (kappa_plus * lambda_max) } else { 0.0 };
    Ok(SpectralStats { eigenvalues, lambda_max, kappa_plus, c_h })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverSpec {
    Ta,
    TaPsd,
    CtaFixed { t: usize },
    CtaCycle { t_max: usize },
    CtaNormal { t: usize },
    Hybrid { t: usize },
    Cg { precond: Preconditioner },
    Gmres { restart: usize, precond: Preconditioner },
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = |pc: &Preconditioner| match pc {
            Preconditioner::None => "",
            Preconditioner::Jacobi => "-jacobi",
            Preconditioner::Ilu0 => "-ilu0",
        };
        match self {
            SolverSpec::Ta => write!(f, "ta"),
            SolverSpec::TaPsd => write!(f, "ta-psd"),
            SolverSpec::CtaFixed { t } => write!(f, "cta-t{t}"),
            SolverSpec::CtaCycle { t_max } => write!(f, "cta-cyc{t_max}"),
            SolverSpec::CtaNormal { t } => write!(f, "cta-normal-t{t}"),
            SolverSpec::Hybrid { t } => write!(f, "hybrid-t{t}"),
            SolverSpec::Cg { precond } => write!(f, "cg{}", p(precond)),
            SolverSpec::Gmres { restart, precond } => write!(f, "gmres{restart}{}", p(precond)),
        }
    }
}

impl SolverSpec {
    /// Parse "cta(t=3)", "cta-cycle(5)", "gmres(restart=5,precond=ilu0)",
    /// "cg", "ta", "hybrid(t=2)", "cta-normal(t=1)".
    pub fn parse(s: &str) -> Result<SolverSpec> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(p) if s.ends_with(')') => (&s[..p], &s[p + 1..s.len() - 1]),
            _ => (s, ""),
        };
        let mut t = None;
        let mut restart = None;
        let mut precond = Preconditioner::None;
        let mut bare = None;
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((k, v)) = part.split_once('=') {
                match k.trim() {
                    "t" => {
                        t = Some(v.trim().parse::<usize>().map_err(|_| {
                            SolverError::InvalidConfig(format!("solver {name}: bad t '{v}'"))
                        })?)
                    }
                    "restart" => {
                        restart = Some(v.trim().parse::<usize>().map_err(|_| {
                            SolverError::InvalidConfig(format!("solver {name}: bad restart '{v}'"))
                        })?)
                    }
                    "precond" => {
                        precond = match v.trim().to_ascii_lowercase().as_str() {
                            "none" => Preconditioner::None,
                            "jacobi" => Preconditioner::Jacobi,
                            "ilu0" => Preconditioner::Ilu0,
                            other => {
                                return Err(SolverError::InvalidConfig(format!(
                                    "unknown preconditioner '{other}'"
                                )))
                            }
                        }
                    }
                    other => {
                        return Err(SolverError::InvalidConfig(format!(
                            "solver {name}: unknown key '{other}'"
                        )))
                    }
                }
            } else {
                bare = Some(part.parse::<usize>().map_err(|_| {
                    SolverError::InvalidConfig(format!("solver {name}: bad argument '{part}'"))
                })?);
            }
        }
        let spec = match name.to_ascii_lowercase().as_str() {
            "ta" => SolverSpec::Ta,
            "ta-psd" => SolverSpec::TaPsd,
            "cta" => SolverSpec::CtaFixed { t: t.or(bare).unwrap_or(1) },
            "cta-cycle" => SolverSpec::CtaCycle { t_max: t.or(bare).unwrap_or(5) },
            "cta-normal" => SolverSpec::CtaNormal { t: t.or(bare).unwrap_or(1) },
            "hybrid" => SolverSpec::Hybrid { t: t.or(bare).unwrap_or(1) },
            "cg" => SolverSpec::Cg { precond },
            "gmres" => SolverSpec::Gmres { restart: restart.or(bare).unwrap_or(5), precond },
            other => return Err(SolverError::InvalidConfig(format!("unknown solver '{other}'"))),
        };
        Ok(spec)
    }
}

/// Pick the H realization the way the CLI's auto mode does: H = A when the
/// symmetric flag is set, AAᵀ otherwise.
fn auto_mode(a: &SparseMatrix) -> HMode {
    if a.is_symmetric() && a.nrows() == a.ncols() {
        HMode::SymmetricPsd
    } else {
        HMode::Gram
    }
}

pub fn run_solver(
    a: &SparseMatrix,
    b: &[f64],
    spec: &SolverSpec,
    eps: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    match spec {
        SolverSpec::Ta => {
            let opts = TaOptions {
                eps,
                eps_grad: eps,
                tolerance: ToleranceMode::Relative,
                max_iter: Some(max_iter),
                ..Default::default()
            };
            Ok(triangle::ta_solve(a, b, &opts)?.report)
        }
        SolverSpec::TaPsd => {
            let opts = TaOptions {
                eps,
                eps_grad: eps,
                tolerance: ToleranceMode::Relative,
                max_iter: Some(max_iter),
                ..Default::default()
            };
            Ok(triangle::ta_solve_psd(a, b, &opts)?.report)
        }
        SolverSpec::CtaFixed { t } => {
            let opts = CtaOptions {
                t: *t,
                eps,
                eps_grad: eps,
                max_iter,
                mode: auto_mode(a),
                schedule: Schedule::FixedT,
                ..Default::default()
            };
            cta::ft_iterate(a, b, &opts)
        }
        SolverSpec::CtaCycle { t_max } => {
            let opts = CtaOptions {
                t: 1,
                eps,
                eps_grad: eps,
                max_iter,
                mode: auto_mode(a),
                schedule: Schedule::Cycle(*t_max),
                ..Default::default()
            };
            cta::cta_solve_from(a, b, &vec![0.0; a.ncols()], &opts)
        }
        SolverSpec::CtaNormal { t } => {
            let opts = CtaOptions {
                t: *t,
                eps,
                eps_grad: eps,
                max_iter,
                mode: HMode::Gram,
                ..Default::default()
            };
            cta::normal_equation_iterate(a, b, &opts)
        }
        SolverSpec::Hybrid { t } => {
            let opts = CtaOptions {
                t: *t,
                eps,
                eps_grad: eps,
                max_iter,
                mode: auto_mode(a),
                hybrid: cta::HybridOptions { enabled: true, ..Default::default() },
                ..Default::default()
            };
            cta::hybrid_solve(a, b, &opts)
        }
        SolverSpec::Cg { precond } => {
            let opts = BaselineOptions {
                method: BaselineMethod::Cg,
                eps,
                max_iter,
                preconditioner: *precond,
                ..Default::default()
            };
            baselines::cg_solve(a, b, &opts)
        }
        SolverSpec::Gmres { restart, precond } => {
            let opts = BaselineOptions {
                method: BaselineMethod::Gmres,
                restart: *restart,
                eps,
                max_iter,
                preconditioner: *precond,
                ..Default::default()
            };
            baselines::gmres_solve(a, b, &opts)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub recipe: String,
    pub solver: String,
    pub n: usize,
    pub eps: f64,
    pub iters: usize,
    pub matvecs: usize,
    pub relres: f64,
    pub verdict: Verdict,
    pub seconds: f64,
    pub history: Vec<(usize, f64)>,
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::SystemSolved => "SystemSolved",
        Verdict::NormalSolved => "NormalSolved",
        Verdict::MinNormSolved => "MinNormSolved",
        Verdict::NotConverged => "NC",
        Verdict::Error => "Error",
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub recipes: Vec<MatrixRecipe>,
    pub solvers: Vec<SolverSpec>,
    pub tolerances: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub max_iter: usize,
}

/// Key-value config, one `key = value` per line, `#` comments. Required
/// keys: recipes, solvers, tolerances, seed, output_dir. Lists are
/// semicolon-separated. Optional: max_iter (default 100000).
pub fn parse_config(text: &str) -> Result<BenchConfig> {
    let mut map = std::collections::BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            SolverError::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let required = ["recipes", "solvers", "tolerances", "seed", "output_dir"];
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|k| !map.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(SolverError::InvalidConfig(format!(
            "missing required key(s): {}",
            missing.join(", ")
        )));
    }
    let seed: u64 = map["seed"]
        .parse()
        .map_err(|_| SolverError::InvalidConfig(format!("bad seed '{}'", map["seed"])))?;
    let recipes = map["recipes"]
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| MatrixRecipe::parse(s, seed))
        .collect::<Result<Vec<_>>>()?;
    let solvers = map["solvers"]
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(SolverSpec::parse)
        .collect::<Result<Vec<_>>>()?;
    let tolerances = map["tolerances"]
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v = s
                .parse::<f64>()
                .map_err(|_| SolverError::InvalidConfig(format!("bad tolerance '{s}'")))?;
            if !(v > 0.0 && v < 1.0) {
                return Err(SolverError::InvalidConfig(format!(
                    "tolerances: each value must be in (0, 1), got '{s}'"
                )));
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;
    if recipes.is_empty() || solvers.is_empty() || tolerances.is_empty() {
        return Err(SolverError::InvalidConfig(
            "recipes, solvers and tolerances must be non-empty".into(),
        ));
    }
    let max_iter = match map.get("max_iter") {
        Some(v) => v
            .parse()
            .map_err(|_| SolverError::InvalidConfig(format!("bad max_iter '{v}'")))?,
        None => 100_000,
    };
    Ok(BenchConfig {
        recipes,
        solvers,
        tolerances,
        seed,
        output_dir: PathBuf::from(&map["output_dir"]),
        max_iter,
    })
}

/// Run the full grid. Cells execute in parallel and independently; a cell
/// failure is recorded as a verdict=Error row and the run continues.
/// Emits results.csv and one <recipe>_<solver>.dat history file per
/// (recipe, solver) pair, taken from that pair's tightest-tolerance cell.
pub fn run_experiment(cfg: &BenchConfig) -> Result<Vec<RunRecord>> {
    fs::create_dir_all(&cfg.output_dir)?;
    let mut cells = Vec::new();
    for recipe in &cfg.recipes {
        let gen = generate(recipe)?;
        let rid = recipe.to_string();
        let gen = std::sync::Arc::new(gen);
        for solver in &cfg.solvers {
            for &eps in &cfg.tolerances {
                cells.push((rid.clone(), gen.clone(), solver.clone(), eps));
            }
        }
    }
    let mut records: Vec<RunRecord> = cells
        .par_iter()
        .map(|(rid, gen, solver, eps)| {
            let sid = solver.to_string();
            match run_solver(&gen.a, &gen.b, solver, *eps, cfg.max_iter) {
                Ok(report) => RunRecord {
                    recipe: rid.clone(),
                    solver: sid,
                    n: gen.a.ncols(),
                    eps: *eps,
                    iters: report.iterations,
                    matvecs: report.matvecs,
                    relres: report.residual_norm_rel,
                    verdict: report.verdict,
                    seconds: report.seconds,
                    history: report.residual_history,
                },
                Err(_) => RunRecord {
                    recipe: rid.clone(),
                    solver: sid,
                    n: gen.a.ncols(),
                    eps: *eps,
                    iters: 0,
                    matvecs: 0,
                    relres: f64::NAN,
                    verdict: Verdict::Error,
                    seconds: 0.0,
                    history: Vec::new(),
                },
            }
        })
        .collect();
    records.sort_by(|a, b| {
        (&a.recipe, &a.solver)
            .cmp(&(&b.recipe, &b.solver))
            .then(a.eps.partial_cmp(&b.eps).unwrap_or(std::cmp::Ordering::Equal))
    });
    write_outputs(&cfg.output_dir, &records)?;
    Ok(records)
}

fn write_outputs(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let mut csv = String::from("recipe,solver,n,eps,iters,matvecs,relres,verdict,seconds\n");
    for r in records {
        csv.push_str(&format!(
            "{},{},{},{:e},{},{},{:.6e},{},{:.6}\n",
            r.recipe,
            r.solver,
            r.n,
            r.eps,
            r.iters,
            r.matvecs,
            r.relres,
            verdict_str(r.verdict),
            r.seconds
        ));
    }
    fs::write(dir.join("results.csv"), csv)?;

    // One history per (recipe, solver): the tightest tolerance carries the
    // longest curve.
    let mut best: std::collections::BTreeMap<(String, String), &RunRecord> =
        std::collections::BTreeMap::new();
    for r in records {
        best.entry((r.recipe.clone(), r.solver.clone()))
            .and_modify(|cur| {
                if r.eps < cur.eps {
                    *cur = r;
                }
            })
            .or_insert(r);
    }
    for ((recipe, solver), r) in best {
        let mut dat = String::new();
        for (k, res) in &r.history {
            dat.push_str(&format!("{k} {res:.6e}\n"));
        }
        fs::write(dir.join(format!("{recipe}_{solver}.dat")), dat)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_range_five() {
        let g = generate(&MatrixRecipe { kind: RecipeKind::DiagRange(5), seed: 1 }).unwrap();
        for i in 0..5 {
            assert_eq!(g.a.get(i, i), (i + 1) as f64);
        }
        assert_eq!(g.a.nnz(), 5);
        // b = A x_true exactly
        let ax = g.a.matvec(g.x_true.as_ref().unwrap()).unwrap();
        assert_eq!(ax, g.b);
    }

    #[test]
    fn lotkin_three_rows() {
        let g = generate(&MatrixRecipe { kind: RecipeKind::Lotkin(3), seed: 1 }).unwrap();
        let expect = [
            [1.0, 1.0, 1.0],
            [0.5, 1.0 / 3.0, 0.25],
            [1.0 / 3.0, 0.25, 0.2],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((g.a.get(i, j) - expect[i][j]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn dorr_m_matrix_shape() {
        let g = generate(&MatrixRecipe {
            kind: RecipeKind::Dorr { n: 10, theta: 0.01 },
            seed: 1,
        })
        .unwrap();
        let a = &g.a;
        for i in 0..10 {
            let d = a.get(i, i);
            assert!(d > 0.0);
            let mut off = 0.0;
            for j in 0..10 {
                if j != i {
                    let v = a.get(i, j);
                    assert!(v <= 0.0, "positive off-diagonal at ({i},{j})");
                    off += v.abs();
                }
            }
            // Dominance: weak in the interior (row sums cancel exactly),
            // strict at the boundary rows where a neighbor is dropped.
            assert!(d >= off * (1.0 - 1e-12), "row {i}: d={d} off={off}");
            if i == 0 || i == 9 {
                assert!(d > off, "boundary row {i} should be strictly dominant");
            }
        }
    }

    #[test]
    fn spectral_oracle_diag_range() {
        let g = generate(&MatrixRecipe { kind: RecipeKind::DiagRange(7), seed: 1 }).unwrap();
        let s = spectral_oracle(&g.a, HMode::SymmetricPsd).unwrap();
        assert!((s.lambda_max - 7.0).abs() <= 1e-10);
        assert!((s.kappa_plus - 7.0).abs() <= 1e-9);
        assert!((s.c_h - 1.0 / 49.0).abs() <= 1e-12);
    }

    #[test]
    fn spectral_oracle_gram_of_diag_range() {
        let g = generate(&MatrixRecipe { kind: RecipeKind::DiagRange(6), seed: 1 }).unwrap();
        let s = spectral_oracle(&g.a, HMode::NormalGram).unwrap();
        assert!((s.kappa_plus - 36.0).abs() <= 1e-8);
    }

    #[test]
    fn spectral_oracle_recovers_random_psd_target() {
        let g = generate(&MatrixRecipe {
            kind: RecipeKind::RandomPsd { n: 20, rank: 12, kappa_plus: 50.0 },
            seed: 3,
        })
        .unwrap();
        let s = spectral_oracle(&g.a, HMode::SymmetricPsd).unwrap();
        assert!((s.kappa_plus - 50.0).abs() <= 0.5, "kappa+ = {}", s.kappa_plus);
        // rank deficiency shows up as eigenvalues at numerical zero
        let zeros = s
            .eigenvalues
            .iter()
            .filter(|&&l| l <= s.lambda_max * 1e-10)
            .count();
        assert_eq!(zeros, 8);
    }

    #[test]
    fn random_spd_hits_condition_target() {
        let g = generate(&MatrixRecipe {
            kind: RecipeKind::RandomSpd { n: 15, kappa: 100.0 },
            seed: 5,
        })
        .unwrap();
        assert!(g.a.is_symmetric());
        let s = spectral_oracle(&g.a, HMode::SymmetricPsd).unwrap();
        assert!((s.kappa_plus - 100.0).abs() <= 1.0, "kappa = {}", s.kappa_plus);
    }

    #[test]
    fn recipe_and_solver_parsing() {
        let r = MatrixRecipe::parse("RandomSPD(100, 1e4)", 9).unwrap();
        assert_eq!(r.kind, RecipeKind::RandomSpd { n: 100, kappa: 1e4 });
        let r = MatrixRecipe::parse("dorr(10,0.01)", 9).unwrap();
        assert_eq!(r.kind, RecipeKind::Dorr { n: 10, theta: 0.01 });
        assert!(MatrixRecipe::parse("randompsd(5,9,10)", 0).is_err());
        assert!(MatrixRecipe::parse("mystery(3)", 0).is_err());

        assert_eq!(SolverSpec::parse("cg").unwrap(), SolverSpec::Cg { precond: Preconditioner::None });
        assert_eq!(
            SolverSpec::parse("gmres(restart=7,precond=ilu0)").unwrap(),
            SolverSpec::Gmres { restart: 7, precond: Preconditioner::Ilu0 }
        );
        assert_eq!(SolverSpec::parse("cta(t=3)").unwrap(), SolverSpec::CtaFixed { t: 3 });
        assert_eq!(SolverSpec::parse("cta-cycle(5)").unwrap(), SolverSpec::CtaCycle { t_max: 5 });
        assert!(SolverSpec::parse("simplex").is_err());
    }

    #[test]
    fn config_missing_keys_listed_exhaustively() {
        let err = parse_config("solvers = cg\n").unwrap_err();
        let msg = err.to_string();
        for k in ["recipes", "tolerances", "seed", "output_dir"] {
            assert!(msg.contains(k), "{msg} should mention {k}");
        }
        assert!(!msg.contains("solvers,"), "{msg}");
    }

    #[test]
    fn single_cell_experiment_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(&format!(
            "recipes = DiagRange(6)\nsolvers = cg\ntolerances = 1e-10\nseed = 4\noutput_dir = {}\n",
            dir.path().display()
        ))
        .unwrap();
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].verdict, Verdict::SystemSolved);
        let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "recipe,solver,n,eps,iters,matvecs,relres,verdict,seconds");
        assert!(lines[1].starts_with("diagrange-6,cg,6,1e-10,"));
        assert!(dir.path().join("diagrange-6_cg.dat").exists());
    }

    #[test]
    fn experiment_is_deterministic_modulo_timing() {
        let strip_seconds = |csv: &str| -> String {
            csv.lines()
                .map(|l| l.rsplitn(2, ',').nth(1).unwrap_or(l).to_string())
                .collect::<Vec<_>>()
                .join("\n")
        };
        let mut outs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let cfg = parse_config(&format!(
                "recipes = RandomSPD(12,100); Dorr(8,0.05)\nsolvers = cta(t=2); gmres(restart=5)\ntolerances = 1e-6; 1e-10\nseed = 77\noutput_dir = {}\n",
                dir.path().display()
            ))
            .unwrap();
            run_experiment(&cfg).unwrap();
            outs.push(strip_seconds(&fs::read_to_string(dir.path().join("results.csv")).unwrap()));
        }
        assert_eq!(outs[0], outs[1]);
    }

    #[test]
    fn cell_failure_recorded_as_error() {
        let dir = tempfile::tempdir().unwrap();
        // ta-psd on a nonsymmetric matrix errors; the run continues.
        let cfg = parse_config(&format!(
            "recipes = Dorr(8,0.05)\nsolvers = ta-psd; gmres(restart=8)\ntolerances = 1e-8\nseed = 1\noutput_dir = {}\n",
            dir.path().display()
        ))
        .unwrap();
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 2);
        let ta = records.iter().find(|r| r.solver == "ta-psd").unwrap();
        assert_eq!(ta.verdict, Verdict::Error);
        let gm = records.iter().find(|r| r.solver == "gmres8").unwrap();
        assert_eq!(gm.verdict, Verdict::SystemSolved);
    }
}
