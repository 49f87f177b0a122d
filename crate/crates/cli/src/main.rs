//! `lattice-homog`: batch front end for lattice homogenization.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical or model error.

mod checks;
mod commands;
mod json;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lattice_homog::report::Format;
use lattice_homog::Error;

pub const JOBS_ENV: &str = "LATTICE_HOMOG_JOBS";

#[derive(Debug, Parser)]
#[command(name = "lattice-homog", version, about = "Continuum homogenization of beam-lattice metamaterials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Catalog lattice: chain, beam-chain, two-bar-chain, honeycomb, octet.
    #[arg(long, global = true)]
    pub lattice: Option<String>,
    /// Catalog parameters as `name=value,...`.
    #[arg(long, global = true)]
    pub param: Option<String>,
    /// Lattice definition file (JSON).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Relative tolerance of the continuum-limit extrapolation.
    #[arg(long, global = true, default_value_t = 1e-8, value_parser = positive)]
    pub tol_extrap: f64,
    /// Relative residual allowed for the moduli fit.
    #[arg(long, global = true, default_value_t = 1e-6, value_parser = positive)]
    pub tol_fit: f64,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format (default: json for describe and homogenize, csv otherwise).
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Worker threads for per-wavevector maps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize a lattice: classes, cell volume, bars and director frames.
    Describe,
    /// Eigenvalue branches of D(k) along a piecewise-linear path.
    Dispersion {
        /// Waypoints in dual coordinates, `c1,c2;c1,c2;...` (k = Σ c_j g_j).
        #[arg(long)]
        kpath: Option<String>,
        /// Total number of samples along the path, endpoints included.
        #[arg(long, default_value_t = 51)]
        resolution: usize,
    },
    /// Effective micropolar moduli (C, H, G) from the continuum limit.
    Homogenize,
    /// Minimum energies on scaled tori against the continuum minimum.
    Converge {
        /// Scales ε = 1/P, comma separated.
        #[arg(long, default_value = "0.25,0.125,0.0625,0.03125")]
        epsilons: String,
        /// Mode load `n1,n2@q1,q2,...;...` (default: one mode per axis).
        #[arg(long)]
        load: Option<String>,
        /// Torus solver: fourier or sparse.
        #[arg(long, default_value = "fourier")]
        solver: String,
    },
    /// Run every closed-form oracle check of the catalog.
    Validate {
        /// Perturb the oracle parameters of the named check (debugging aid).
        #[arg(long, hide = true)]
        inject_mismatch: Option<String>,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

/// Outcome of a command: text for the output sink and whether it succeeded.
pub struct Outcome {
    pub text: String,
    pub failed: Option<String>,
}

impl Outcome {
    pub fn ok(text: String) -> Self {
        Self { text, failed: None }
    }
}

fn configure_jobs(jobs: Option<usize>) -> lattice_homog::Result<()> {
    let jobs = match std::env::var(JOBS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("{JOBS_ENV}='{v}' is not a thread count")))?,
        ),
        Err(_) => jobs,
    };
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::InvalidParameter("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> lattice_homog::Result<Outcome> {
    configure_jobs(cli.common.jobs)?;
    let c = &cli.common;
    match &cli.command {
        Command::Describe => commands::describe(c),
        Command::Dispersion { kpath, resolution } => commands::dispersion(c, kpath.as_deref(), *resolution),
        Command::Homogenize => commands::homogenize(c),
        Command::Converge { epsilons, load, solver } => commands::converge(c, epsilons, load.as_deref(), solver),
        Command::Validate { inject_mismatch } => checks::validate(c, inject_mismatch.as_deref()),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> lattice_homog::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.common.out.clone();
    let result = run(cli).and_then(|outcome| emit(&out, &outcome.text).map(|_| outcome));
    match result {
        Ok(Outcome { failed: None, .. }) => ExitCode::SUCCESS,
        Ok(Outcome { failed: Some(msg), .. }) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            match &e {
                Error::Validation(violations) => {
                    eprintln!("error: invalid lattice");
                    for v in violations {
                        eprintln!("  - {v}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
