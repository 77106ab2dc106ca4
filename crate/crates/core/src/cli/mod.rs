//! The `goursat2d` command line.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence or divergence,
//! 3 a verified inequality failed. `GOURSAT2D_THREADS` caps the worker pool.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::sampling::DEFAULT_SEED;
use crate::solvers::{Method, WeightChoice};

pub use commands::{run, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_INEQUALITY: i32 = 3;

pub const THREADS_VAR: &str = "GOURSAT2D_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "goursat2d",
    version,
    about = "Nonlinear Volterra integro-differential systems on the unit square"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve F(z) = v and write PREFIX.grid.csv and PREFIX.report.json.
    Solve(SolveArgs),
    /// Solve the linearized equation F'(z0)h = v.
    Linsolve(LinsolveArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Directional derivative of the solution map with finite-difference validation.
    Sens(SensArgs),
    /// Manufactured-solution convergence study.
    Mms(MmsArgs),
}

/// Options shared by every command that solves.
#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Weight exponent, `auto` or a positive number.
    #[arg(long)]
    pub m: Option<WeightChoice>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Cells per axis.
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "solution")]
    pub out: PathBuf,
    /// Exact solution components, separated by `;`, for an error report.
    #[arg(long)]
    pub zstar: Option<String>,
    /// Exact mixed derivative of `--zstar`; differenced numerically if omitted.
    #[arg(long, requires = "zstar")]
    pub zstar_xy: Option<String>,
}

#[derive(Debug, Args)]
pub struct LinsolveArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// A grid file with `v_k` columns or `;`-separated expressions of x, y.
    #[arg(long)]
    pub rhs: String,
    /// A solution grid file; the linearization point defaults to zero.
    #[arg(long)]
    pub linearize_at: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "linsolve")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Norms,
    Lemma31,
    Coercivity,
    Assumptions,
    Contraction,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Required by the coercivity, assumptions and contraction suites.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, value_delimiter = ',')]
    pub m_list: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Probe radii for the assumptions suite.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub radii: Vec<f64>,
    /// A fixed field for the norms suite instead of random samples.
    #[arg(long)]
    pub zstar: Option<String>,
    #[arg(long, requires = "zstar")]
    pub zstar_xy: Option<String>,
    /// Also write the report to this JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SensArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// A grid file with `v_k` columns or `;`-separated expressions of x, y.
    #[arg(long)]
    pub direction: String,
    #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
    pub eps: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "sens")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MmsArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub zstar: String,
    #[arg(long)]
    pub zstar_xy: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub n_list: Vec<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps a library error to its exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } | Error::NoConvergence { .. } | Error::Stagnation { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_INPUT,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads = raw
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("cannot configure the thread pool: {e}"))
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_INPUT;
    }
    let mut stdout = std::io::stdout().lock();
    let outcome = run(&cli.command, &mut stdout);
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(msg) = &outcome.error {
        eprintln!("error: {msg}");
    }
    outcome.code
}
