//! `ifsdens` — reproducible runs of the invariant-density machinery.
//!
//! Subcommands: `validate`, `solve`, `sample`, `verify`, `metrics`,
//! `bounds`, `scaling`. JSON for configuration and reports, CSV for
//! vectors. Identical config + seed gives byte-identical artifacts; output
//! files are written atomically (temp file + rename).
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid configuration,
//! 3 verification failure — so CI can tell "math failed" from "crashed".

mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use ifsdens_core::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_INTERNAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;

// acceptance-style thresholds used by verify/bounds/scaling
const DUALITY_LIMIT: f64 = 1e-6;
const INVARIANCE_LIMIT: f64 = 1e-4;
const KS_LIMIT: f64 = 5e-3;

#[derive(Parser)]
#[command(name = "ifsdens", version, about = "Invariant densities of randomly perturbed affine IFS on [-1, 1]")]
struct Cli {
    /// Path to the run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the configured grid point count.
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Override the configured solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check admissibility of the configured system.
    Validate,
    /// Iterate the transfer operator to the invariant density.
    Solve,
    /// Simulate the chain and write the samples.
    Sample {
        #[arg(long, default_value_t = 1_000_000)]
        count: usize,
        #[arg(long = "burn-in", default_value_t = 1000)]
        burn_in: usize,
    },
    /// Duality, invariance and Kolmogorov-Smirnov checks of a solved density.
    Verify {
        #[arg(long, default_value_t = 1_000_000)]
        count: usize,
        #[arg(long = "burn-in", default_value_t = 1000)]
        burn_in: usize,
    },
    /// Cone constants and empirical contraction ratios.
    Metrics,
    /// Derivative bounds checked against the solved density.
    Bounds,
    /// Re-solve across a list of noise ranges and report sup/L2 scalings.
    Scaling {
        #[arg(long = "eps-list", value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("ifsdens: {err}");
            let code = match err {
                AppError::Io(_) => EXIT_INTERNAL,
                AppError::Config(_) | AppError::Core(_) => EXIT_CONFIG,
            };
            ExitCode::from(code)
        }
    }
}

#[derive(Debug)]
enum AppError {
    Io(std::io::Error),
    Config(String),
    Core(Error),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Io(e) => write!(f, "io error: {e}"),
            AppError::Config(m) => write!(f, "{m}"),
            AppError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        AppError::Core(e)
    }
}

type AppResult<T> = std::result::Result<T, AppError>;

struct Ctx {
    config: RunConfig,
    out: PathBuf,
    grid: Grid,
    quad: QuadratureSpec,
}

fn load_context(cli: &Cli) -> AppResult<Ctx> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| AppError::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("invalid config {}: {e}", path.display())))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(grid) = cli.grid {
        config.grid_points = grid;
    }
    if let Some(tol) = cli.tol {
        config.tol = tol;
    }
    let grid = Grid::new(config.grid_points)?;
    let quad = QuadratureSpec::new(config.t_nodes)?;
    Ok(Ctx {
        out: cli.out.clone(),
        config,
        grid,
        quad,
    })
}

fn run(cli: Cli) -> AppResult<u8> {
    let ctx = load_context(&cli)?;
    match cli.command {
        Command::Validate => cmd_validate(&ctx),
        Command::Solve => cmd_solve(&ctx),
        Command::Sample { count, burn_in } => cmd_sample(&ctx, count, burn_in),
        Command::Verify { count, burn_in } => cmd_verify(&ctx, count, burn_in),
        Command::Metrics => cmd_metrics(&ctx),
        Command::Bounds => cmd_bounds(&ctx),
        Command::Scaling { eps_list } => {
            let eps = eps_list.unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025]);
            cmd_scaling(&ctx, &eps)
        }
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> AppResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    let path = dir.join(name);
    tmp.persist(&path)
        .map_err(|e| AppError::Io(e.error))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> AppResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| AppError::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

fn cmd_validate(ctx: &Ctx) -> AppResult<u8> {
    let report = validate_system(&ctx.config.system);
    #[derive(Serialize)]
    struct ValidateReport<'a> {
        admissible: bool,
        violations: &'a [Violation],
    }
    write_json(
        &ctx.out,
        "validate.json",
        &ValidateReport {
            admissible: report.is_admissible(),
            violations: &report.violations,
        },
    )?;
    if report.is_admissible() {
        println!("system admissible");
        Ok(0)
    } else {
        for v in &report.violations {
            eprintln!("violation: {}", v.message);
        }
        Ok(EXIT_CONFIG)
    }
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    iterations: usize,
    converged: bool,
    final_residual: f64,
    fitted_rate: f64,
    masses: &'a [f64],
    residuals: &'a [f64],
}

fn solve_from_config(ctx: &Ctx) -> AppResult<DensityResult> {
    Ok(solve_density(
        &ctx.config.system,
        ctx.grid,
        &ctx.quad,
        &SolveOptions {
            tol: ctx.config.tol,
            max_iter: ctx.config.max_iter,
            ..Default::default()
        },
    )?)
}

fn cmd_solve(ctx: &Ctx) -> AppResult<u8> {
    let result = solve_from_config(ctx)?;
    let mut csv = Vec::new();
    result.phi.write_csv(&mut csv, "phi")?;
    write_atomic(&ctx.out, "density.csv", &csv)?;
    write_json(
        &ctx.out,
        "diagnostics.json",
        &Diagnostics {
            iterations: result.iterations,
            converged: result.converged,
            final_residual: result.residual_trace.last().copied().unwrap_or(0.0),
            fitted_rate: result.fitted_rate,
            masses: &result.mass_trace,
            residuals: &result.residual_trace,
        },
    )?;
    if result.converged {
        println!(
            "converged in {} iterations (fitted rate {:.4})",
            result.iterations, result.fitted_rate
        );
        Ok(0)
    } else {
        eprintln!("did not converge within {} iterations", result.iterations);
        Ok(EXIT_VERIFY)
    }
}

fn cmd_sample(ctx: &Ctx, count: usize, burn_in: usize) -> AppResult<u8> {
    let set = sample_chain(&ctx.config.system, count, burn_in, ctx.config.seed)?;
    let mut text = String::with_capacity(count * 24);
    for s in &set.samples {
        text.push_str(&format!("{s:.16e}\n"));
    }
    write_atomic(&ctx.out, "samples.csv", text.as_bytes())?;
    println!("wrote {count} samples (seed {}, burn-in {burn_in})", set.seed);
    Ok(0)
}

#[derive(Serialize)]
struct VerifyReport {
    density_source: String,
    duality_max: f64,
    duality_pass: bool,
    invariance_max: f64,
    invariance_pass: bool,
    ks: f64,
    ks_pass: bool,
    sample_count: usize,
    seed: u64,
}

fn cmd_verify(ctx: &Ctx, count: usize, burn_in: usize) -> AppResult<u8> {
    // prefer the density a previous `solve` wrote into the output directory
    let density_path = ctx.out.join("density.csv");
    let (phi, source) = if density_path.exists() {
        let file = std::fs::File::open(&density_path)?;
        (
            GridFunction::read_csv(std::io::BufReader::new(file))?,
            density_path.display().to_string(),
        )
    } else {
        (solve_from_config(ctx)?.phi, "solved in-process".to_string())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
    let mut duality_max = 0.0_f64;
    for _ in 0..10 {
        let f = random_poly(&mut rng, ctx.grid);
        let g = random_poly(&mut rng, ctx.grid);
        duality_max = duality_max.max(duality_residual(&ctx.config.system, &f, &g, &ctx.quad)?);
    }

    let intervals: Vec<(f64, f64)> = (0..50)
        .map(|_| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            (a.min(b), a.max(b))
        })
        .collect();
    let invariance_max = invariance_residual(&ctx.config.system, &phi, &intervals, &ctx.quad)?;

    let samples = sample_chain(&ctx.config.system, count, burn_in, ctx.config.seed)?;
    let emp = empirical_cdf(&samples)?;
    let cdf = density_cdf(&phi)?;
    let ks = ks_distance(CdfRef::Empirical(&emp), CdfRef::Grid(&cdf));

    let report = VerifyReport {
        density_source: source,
        duality_max,
        duality_pass: duality_max <= DUALITY_LIMIT,
        invariance_max,
        invariance_pass: invariance_max <= INVARIANCE_LIMIT,
        ks,
        ks_pass: ks <= KS_LIMIT,
        sample_count: count,
        seed: ctx.config.seed,
    };
    write_json(&ctx.out, "verify.json", &report)?;
    let ok = report.duality_pass && report.invariance_pass && report.ks_pass;
    println!(
        "duality {duality_max:.3e} ({}), invariance {invariance_max:.3e} ({}), KS {ks:.5} ({})",
        pass_str(report.duality_pass),
        pass_str(report.invariance_pass),
        pass_str(report.ks_pass)
    );
    Ok(if ok { 0 } else { EXIT_VERIFY })
}

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn random_poly(rng: &mut ChaCha8Rng, grid: Grid) -> GridFunction {
    let coeffs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    GridFunction::from_fn(grid, move |x| coeffs.iter().fold(0.0, |acc, c| acc * x + c))
}

#[derive(Serialize)]
struct MetricsReport {
    lambda0: f64,
    diameter_d: f64,
    b_min: f64,
    diameter_le: f64,
    lambda1: f64,
    empirical_ratios: Vec<f64>,
}

fn cmd_metrics(ctx: &Ctx) -> AppResult<u8> {
    let sys = &ctx.config.system;
    sys.ensure_admissible()?;
    let cone = ctx.config.cone_params()?;
    let constants = contraction_constants(sys.lambda, cone.a, cone.gamma)?;
    let (diameter_le, lambda1) = e_cone_diameter(sys.lambda, cone.a, cone.gamma, cone.b)?;

    // empirical contraction of theta_D under the adjoint, on a grid small
    // enough for exhaustive pair scans
    let grid = Grid::new(1001)?;
    let witnesses = witness_family(grid, cone.a, cone.gamma, 8)?;
    let mapped: Result<Vec<GridFunction>> = witnesses
        .iter()
        .map(|w| apply_u(sys, w, &ctx.quad))
        .collect();
    let mapped = mapped?;
    let mut empirical_ratios = Vec::new();
    'outer: for i in 0..witnesses.len() {
        for j in i + 1..witnesses.len() {
            let before = theta_d(&witnesses[i], &witnesses[j], cone.a, cone.gamma)?;
            let after = theta_d(&mapped[i], &mapped[j], cone.a, cone.gamma)?;
            empirical_ratios.push(after / before);
            if empirical_ratios.len() == 20 {
                break 'outer;
            }
        }
    }

    let report = MetricsReport {
        lambda0: constants.lambda0,
        diameter_d: constants.diameter_d,
        b_min: constants.b_min,
        diameter_le,
        lambda1,
        empirical_ratios,
    };
    write_json(&ctx.out, "metrics.json", &report)?;
    println!(
        "lambda0 {:.6}, 1 - lambda1 {:.3e} (certified); worst empirical ratio {:.4}",
        report.lambda0,
        1.0 - report.lambda1,
        report
            .empirical_ratios
            .iter()
            .fold(0.0_f64, |m, r| m.max(*r))
    );
    Ok(0)
}

fn cmd_bounds(ctx: &Ctx) -> AppResult<u8> {
    let result = solve_from_config(ctx)?;
    let report = check_smoothness(&ctx.config.system, &result.phi, 3)?;
    write_json(&ctx.out, "bounds.json", &report)?;
    // k = 3 is informational; the gate is k <= 2
    let ok = report.all_pass(2);
    for row in &report.rows {
        println!(
            "k={}: observed {:.4e} (m) / {:.4e} (Lebesgue) vs bound {:.4e} [{}]",
            row.k,
            row.observed_m,
            row.observed_lebesgue,
            row.bound,
            pass_str(row.pass())
        );
    }
    Ok(if ok { 0 } else { EXIT_VERIFY })
}

fn cmd_scaling(ctx: &Ctx, eps_list: &[f64]) -> AppResult<u8> {
    let rows = epsilon_scaling_study(
        &ctx.config.system,
        eps_list,
        ctx.grid,
        &ctx.quad,
        ctx.config.tol,
    )?;
    let mut ok = true;
    let mut csv = String::from(
        "epsilon,admissible,converged,sup_phi,eps_times_sup,l2_norm,sqrt_eps_times_l2,pass\n",
    );
    for row in &rows {
        let pass = if row.admissible {
            let mut sys = ctx.config.system.clone();
            sys.epsilon = row.epsilon;
            let bound0 = theorem_bound(&sys, 0)?;
            let p = row.converged && row.sup_phi.unwrap_or(f64::INFINITY) <= bound0;
            ok &= p;
            Some(p)
        } else {
            None
        };
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
        csv.push_str(&format!(
            "{:.16e},{},{},{},{},{},{},{}\n",
            row.epsilon,
            row.admissible,
            row.converged,
            fmt(row.sup_phi),
            fmt(row.eps_times_sup),
            fmt(row.l2_norm),
            fmt(row.sqrt_eps_times_l2),
            pass.map(|p| p.to_string()).unwrap_or_default(),
        ));
        println!(
            "eps {:.4}: admissible {}, eps*sup {}, sqrt(eps)*L2 {}",
            row.epsilon,
            row.admissible,
            fmt(row.eps_times_sup),
            fmt(row.sqrt_eps_times_l2)
        );
    }
    write_atomic(&ctx.out, "scaling.csv", csv.as_bytes())?;
    Ok(if ok { 0 } else { EXIT_VERIFY })
}
