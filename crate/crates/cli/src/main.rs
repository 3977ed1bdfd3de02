//! `phd`: build, deform and perturb pseudoholomorphic disks and estimate
//! invariant pseudonorms from JSON inputs.
//!
//! Exit codes: 0 on success, 1 on usage or schema errors, 2 on numerical
//! failure. Set `PHD_THREADS` to cap the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod files;

#[derive(Parser, Debug)]
#[command(name = "phd", version, about = "Pseudoholomorphic disks and invariant pseudonorms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// numerical settings: {"solver", "newton", "refine", "norm"}, all optional
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the nonlinear Cauchy-Riemann equation from holomorphic data h.
    Solve {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Deform a disk to a prescribed first-order jet on a smaller disk.
    Deform {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        disk: PathBuf,
        #[arg(long)]
        target_jet: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Locate the double points of a disk.
    SelfIntersect {
        #[arg(long)]
        disk: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Replace a disk by an injective one with the same jet.
    PerturbInjective {
        #[arg(long)]
        disk: PathBuf,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Upper bound on the Kobayashi-Royden (or, with --injective, Hahn) pseudonorm.
    Pseudonorm {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        structure: PathBuf,
        /// file or inline JSON, `[[re, im], ...]`
        #[arg(long)]
        point: String,
        #[arg(long)]
        dir: String,
        #[arg(long)]
        injective: bool,
        /// seed of the injective perturbations; defaults to `norm.seed`
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Kobayashi length of a polyline from --from through --via to --to.
    Distance {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        via: Vec<String>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Kobayashi and Hahn estimates side by side, as CSV.
    Compare {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        jets: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference Nijenhuis tensor N(X, Y) at a point.
    Nijenhuis {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        point: String,
        /// real vector of length 2n
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a disk on a polar grid as plot-ready CSV.
    Report {
        #[arg(long)]
        disk: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        radial: Option<usize>,
        #[arg(long)]
        angular: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

/// Error carried to the exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    pub report: Option<PathBuf>,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into(), report: None }
    }

    pub fn library(err: &phd_core::Error) -> Self {
        Failure { code: if err.is_numerical() { 2 } else { 1 }, message: err.to_string(), report: None }
    }
}

/// What a successful (or numerically failed but reported) run prints.
pub struct Summary {
    pub status: String,
    pub key: &'static str,
    pub value: f64,
    pub out: PathBuf,
    pub code: u8,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(text) = std::env::var("PHD_THREADS") else { return Ok(()) };
    let threads: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| Failure::usage(format!("PHD_THREADS must be a positive integer, got {text:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match configure_threads().and_then(|_| commands::run(cli.command)) {
        Ok(s) => {
            println!("{} {}={} out={}", s.status, s.key, files::sci(s.value), s.out.display());
            ExitCode::from(s.code)
        }
        Err(f) => {
            eprintln!("phd: {}", f.message);
            match &f.report {
                Some(path) => println!("failed report={}", path.display()),
                None => println!("failed"),
            }
            ExitCode::from(f.code)
        }
    }
}
