use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::divergence::i_div_raw;
use crate::error::{FaError, Result};
use crate::factory::{exact_fa_check, exact_fa_realization, generate_sigma, stationary_structure_check, GeneratorSpec};
use crate::kernel::{l2_diff, BlockSplit, CovMatrix};
use crate::params::FactorParams;
use crate::solvers::{default_init, run, stationarity_residuals, Engine, SingularPattern, SolverConfig, SolverTrace};

use super::io::{fmt_f64, read_matrix, write_comparison, write_matrix, write_trace, write_vector};
use super::manifest::{manifest_path_for, sidecar, Artifact, ManifestConfig, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MAX_ITERS: i32 = 3;
pub const EXIT_BAD_INPUT: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "fa-idiv", version, about = "Factor-analysis approximation by I-divergence minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic target A A^T + c diag(d) and its ground truth.
    Generate(GenerateArgs),
    /// Fit one engine and write its convergence trace.
    Fit(FitArgs),
    /// Run several engines from the same start and write their traces side by side.
    Compare(CompareArgs),
    /// Exactness and stationarity reports.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    k: usize,
    /// Number of trailing noise variances fixed at zero (singular engine).
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    div_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    residual_tol: f64,
    /// Seed of the random initial loadings.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start from these loadings instead of a random draw (needs --init-d).
    #[arg(long, requires = "init_d")]
    init_h: Option<PathBuf>,
    #[arg(long, requires = "init_h")]
    init_d: Option<PathBuf>,
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value = "alt")]
    engine: String,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "alt,em")]
    engines: Vec<String>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    sigma: PathBuf,
    /// Size of the trailing block for the exactness check.
    #[arg(long)]
    n2: Option<usize>,
    /// With --n2: write an exact realization with this many factors.
    #[arg(long, requires = "n2", requires = "out")]
    k: Option<usize>,
    /// Prefix for realization files (`<out>.H.csv`, `<out>.D.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Loadings to evaluate.
    #[arg(long, requires = "d")]
    h: Option<PathBuf>,
    #[arg(long, requires = "h")]
    d: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    BadInput(String),
    Infeasible(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::BadInput(_) => EXIT_BAD_INPUT,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Other(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::BadInput(m) | CliError::Infeasible(m) | CliError::Other(m) => m,
        }
    }
}

impl From<FaError> for CliError {
    fn from(e: FaError) -> Self {
        match e {
            FaError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            FaError::InfeasiblePattern { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn bad_input(path: &Path, e: FaError) -> CliError {
    CliError::BadInput(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name), runs the command and returns its exit code.
///
/// Exit codes: 0 ok, 1 numerical failure, 2 usage, 3 max iterations reached,
/// 4 bad input matrix, 5 infeasible singular pattern.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Check(a) => cmd_check(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn path_arg(p: &Path) -> String {
    absolute(p).display().to_string()
}

fn eig_range(m: &CovMatrix) -> (f64, f64) {
    let e = m.eigenvalues();
    (e.min(), e.max())
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<i32> {
    let spec = GeneratorSpec {
        n: a.n,
        m: a.m,
        c: a.c,
        seed: a.seed,
    };
    let problem = generate_sigma(&spec)?;
    std::fs::create_dir_all(&a.out).map_err(FaError::from)?;
    let sigma_path = a.out.join("sigma.csv");
    let a_path = a.out.join("A.csv");
    let d_path = a.out.join("d.csv");
    write_matrix(problem.sigma.matrix(), &sigma_path)?;
    write_matrix(&problem.a, &a_path)?;
    write_vector(&(&problem.d * problem.c), &d_path)?;

    let manifest = RunManifest {
        command: "generate".into(),
        args: vec![
            "generate".into(),
            "--n".into(),
            a.n.to_string(),
            "--m".into(),
            a.m.to_string(),
            "--c".into(),
            a.c.to_string(),
            "--seed".into(),
            a.seed.to_string(),
            "--out".into(),
            path_arg(&a.out),
        ],
        seed: a.seed,
        engines: vec![],
        k: None,
        n2: None,
        config: None,
        inputs: vec![],
        outputs: vec![
            Artifact::of(absolute(&sigma_path))?,
            Artifact::of(absolute(&a_path))?,
            Artifact::of(absolute(&d_path))?,
        ],
    };
    manifest.save(a.out.join("manifest.toml"))?;

    let (lo, hi) = eig_range(&problem.sigma);
    let kind = if problem.positive_definite {
        "positive definite"
    } else {
        "positive semidefinite (singular)"
    };
    println!("sigma_hat {n}x{n} is {kind}; eigenvalues in [{lo:.6e}, {hi:.6e}]", n = a.n);
    println!("wrote {}", a.out.display());
    Ok(EXIT_OK)
}

/// Loads the target; anything but a symmetric positive definite matrix is bad input.
fn load_sigma(path: &Path) -> CliResult<CovMatrix> {
    let raw = read_matrix(path).map_err(|e| bad_input(path, e))?;
    let sigma = CovMatrix::new(raw).map_err(|e| bad_input(path, e))?;
    if !sigma.is_positive_definite() {
        let (lo, hi) = eig_range(&sigma);
        return Err(CliError::BadInput(format!(
            "{}: input matrix is not positive definite; eigenvalues in [{lo:.6e}, {hi:.6e}]",
            path.display()
        )));
    }
    Ok(sigma)
}

fn load_params(h: &Path, d: &Path) -> CliResult<FactorParams> {
    let hm = read_matrix(h).map_err(|e| bad_input(h, e))?;
    let dm = read_matrix(d).map_err(|e| bad_input(d, e))?;
    if dm.ncols() != 1 {
        return Err(CliError::BadInput(format!("{}: expected a single column", d.display())));
    }
    FactorParams::new(hm, dm.column(0).into_owned()).map_err(|e| bad_input(h, e))
}

struct Prepared {
    sigma: CovMatrix,
    init: FactorParams,
    config: SolverConfig,
}

fn prepare(r: &RunArgs, engines: &[Engine]) -> CliResult<Prepared> {
    let sigma = load_sigma(&r.sigma)?;
    let n = sigma.dim();
    if r.k == 0 || r.k >= n {
        return Err(CliError::Usage(format!("need 1 <= k < n, got k = {}, n = {n}", r.k)));
    }
    for e in engines {
        if let Engine::Singular { n2 } = e {
            SingularPattern::new(n, *n2, r.k)?;
        }
    }
    let config = SolverConfig {
        max_iters: r.max_iters,
        div_tol: r.div_tol,
        residual_tol: r.residual_tol,
        record_every: 1,
    };
    config.validate()?;
    let init = match (&r.init_h, &r.init_d) {
        (Some(h), Some(d)) => {
            let p = load_params(h, d)?;
            if p.n() != n || p.k() != r.k {
                return Err(CliError::Usage(format!(
                    "initial loadings are {}x{}, expected {n}x{}",
                    p.n(),
                    p.k(),
                    r.k
                )));
            }
            p
        }
        _ => default_init(&sigma, r.k, r.seed)?,
    };
    Ok(Prepared { sigma, init, config })
}

fn run_args(r: &RunArgs) -> Vec<String> {
    let mut args = vec![
        "--sigma".into(),
        path_arg(&r.sigma),
        "--k".into(),
        r.k.to_string(),
        "--max-iters".into(),
        r.max_iters.to_string(),
        "--div-tol".into(),
        r.div_tol.to_string(),
        "--residual-tol".into(),
        r.residual_tol.to_string(),
        "--seed".into(),
        r.seed.to_string(),
        "--trace".into(),
        path_arg(&r.trace),
    ];
    if let Some(n2) = r.n2 {
        args.extend(["--n2".into(), n2.to_string()]);
    }
    if let (Some(h), Some(d)) = (&r.init_h, &r.init_d) {
        args.extend(["--init-h".into(), path_arg(h), "--init-d".into(), path_arg(d)]);
    }
    args
}

fn run_manifest(r: &RunArgs, command: &str, engines: &[Engine], extra: Vec<String>, outputs: &[PathBuf]) -> Result<RunManifest> {
    let mut args = vec![command.to_string()];
    args.extend(run_args(r));
    args.extend(extra);
    let mut inputs = vec![Artifact::of(absolute(&r.sigma))?];
    if let (Some(h), Some(d)) = (&r.init_h, &r.init_d) {
        inputs.push(Artifact::of(absolute(h))?);
        inputs.push(Artifact::of(absolute(d))?);
    }
    Ok(RunManifest {
        command: command.into(),
        args,
        seed: r.seed,
        engines: engines.iter().map(|e| e.name().to_string()).collect(),
        k: Some(r.k),
        n2: r.n2,
        config: Some(ManifestConfig {
            max_iters: r.max_iters,
            div_tol: r.div_tol,
            residual_tol: r.residual_tol,
        }),
        inputs,
        outputs: outputs.iter().map(|p| Artifact::of(absolute(p))).collect::<Result<_>>()?,
    })
}

fn summarize(trace: &SolverTrace) {
    let last = trace.final_record();
    println!(
        "{}: {} iterations ({}); divergence {} l2 {} r_H {} r_D {} min_D {}",
        trace.engine,
        trace.iterations,
        trace.termination,
        fmt_f64(last.divergence.max(0.0)),
        fmt_f64(last.l2),
        fmt_f64(last.r_h2),
        fmt_f64(last.r_d),
        fmt_f64(last.min_d)
    );
    if let Some(b) = &trace.boundary {
        println!(
            "warning: {} noise variances reached the boundary at iteration {} (indices {:?}); \
             consider the singular engine with n2 = {} after permuting them last",
            b.indices.len(),
            b.iter,
            b.indices,
            b.suggested_n2()
        );
    }
}

fn cmd_fit(a: &FitArgs) -> CliResult<i32> {
    let engine = Engine::parse(&a.engine, a.run.n2)?;
    let p = prepare(&a.run, &[engine])?;
    let trace = run(engine, &p.sigma, &p.init, &p.config)?;

    let h_path = sidecar(&a.run.trace, "H.csv");
    let d_path = sidecar(&a.run.trace, "D.csv");
    write_trace(&trace, &a.run.trace)?;
    write_matrix(trace.final_params.h(), &h_path)?;
    write_vector(trace.final_params.d(), &d_path)?;
    let manifest = run_manifest(
        &a.run,
        "fit",
        &[engine],
        vec!["--engine".into(), a.engine.clone()],
        &[a.run.trace.clone(), h_path, d_path],
    )?;
    manifest.save(manifest_path_for(&a.run.trace))?;

    summarize(&trace);
    Ok(if trace.termination.converged() { EXIT_OK } else { EXIT_MAX_ITERS })
}

fn cmd_compare(a: &CompareArgs) -> CliResult<i32> {
    if a.engines.is_empty() {
        return Err(CliError::Usage("no engines given".into()));
    }
    let engines = a
        .engines
        .iter()
        .map(|name| Engine::parse(name.trim(), a.run.n2))
        .collect::<Result<Vec<_>>>()?;
    let p = prepare(&a.run, &engines)?;

    let results: Vec<Result<SolverTrace>> = std::thread::scope(|scope| {
        let handles: Vec<_> = engines
            .iter()
            .map(|&engine| {
                let p = &p;
                scope.spawn(move || run(engine, &p.sigma, &p.init, &p.config))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("engine thread panicked"))
            .collect()
    });
    let traces = results.into_iter().collect::<Result<Vec<_>>>()?;

    write_comparison(&traces, &a.run.trace)?;
    let manifest = run_manifest(
        &a.run,
        "compare",
        &engines,
        vec!["--engines".into(), a.engines.join(",")],
        std::slice::from_ref(&a.run.trace),
    )?;
    manifest.save(manifest_path_for(&a.run.trace))?;

    for t in &traces {
        summarize(t);
    }
    let base = traces[0].final_record();
    for t in &traces[1..] {
        let last = t.final_record();
        println!(
            "final ratios {}/{}: divergence {:.6e} l2 {:.6e}",
            traces[0].engine,
            t.engine,
            base.divergence.max(0.0) / last.divergence.max(0.0),
            base.l2 / last.l2
        );
    }
    let all_converged = traces.iter().all(|t| t.termination.converged());
    Ok(if all_converged { EXIT_OK } else { EXIT_MAX_ITERS })
}

fn cmd_check(a: &CheckArgs) -> CliResult<i32> {
    let raw = read_matrix(&a.sigma).map_err(|e| bad_input(&a.sigma, e))?;
    let sigma = CovMatrix::new_psd(raw).map_err(|e| bad_input(&a.sigma, e))?;
    let n = sigma.dim();
    let (lo, hi) = eig_range(&sigma);
    println!("sigma_hat {n}x{n}; eigenvalues in [{lo:.6e}, {hi:.6e}]");

    if let Some(n2) = a.n2 {
        let split = BlockSplit::trailing(n, n2)?;
        let check = exact_fa_check(&sigma, split)?;
        println!(
            "exact with trailing block of {n2}: {} (off-diagonal Schur norm {:.6e})",
            if check.exact { "yes" } else { "no" },
            check.offdiag_norm
        );
        if let (Some(k), Some(out)) = (a.k, &a.out) {
            let params = exact_fa_realization(&sigma, split, k)?;
            let h_path = sidecar(out, "H.csv");
            let d_path = sidecar(out, "D.csv");
            write_matrix(params.h(), &h_path)?;
            write_vector(params.d(), &d_path)?;
            println!("wrote {} and {}", h_path.display(), d_path.display());
        }
    }

    if let (Some(h), Some(d)) = (&a.h, &a.d) {
        let params = load_params(h, d)?;
        if params.n() != n {
            return Err(CliError::BadInput(format!("loadings have {} rows, expected {n}", params.n())));
        }
        let model = params.model();
        let div = i_div_raw(sigma.matrix(), &model)?;
        println!("divergence {div}; l2 {}", fmt_f64(l2_diff(sigma.matrix(), &model)?));
        let res = stationarity_residuals(&sigma, &params)?;
        match res.r_h {
            Some(r_h) => println!("r_H {} (D^-1 form {}); r_D {}", fmt_f64(res.r_h2), fmt_f64(r_h), fmt_f64(res.r_d)),
            None => println!("r_H {}; r_D {}", fmt_f64(res.r_h2), fmt_f64(res.r_d)),
        }
        if let Some(n2) = a.n2 {
            let pattern = SingularPattern::new(n, n2, params.k())?;
            match stationary_structure_check(&sigma, &params, pattern) {
                Ok(rep) => println!(
                    "singular structure: |S22 - H2H2'| {} |S12 - H1H2'| {} reduced r_H {} reduced r_D {}",
                    fmt_f64(rep.r_s22),
                    fmt_f64(rep.r_s12),
                    fmt_f64(rep.r_h_tilde),
                    fmt_f64(rep.r_d_tilde)
                ),
                Err(e) => println!("singular structure: not applicable ({e})"),
            }
        }
    }
    Ok(EXIT_OK)
}
