//! Batch front-end for the biharmonic toolkit.
//!
//! Each subcommand reads one JSON configuration file, runs one experiment,
//! and writes artifacts into `--out`. Artifacts are deterministic: the same
//! config bytes and seed produce byte-identical CSV and JSON, and every file
//! is stamped with the SHA-256 of the config it came from plus the seed that
//! drove it, so a result can always be traced back to its inputs.
//!
//! Exit codes:
//!
//! | code | meaning                                                          |
//! |------|------------------------------------------------------------------|
//! | 0    | success                                                          |
//! | 1    | configuration problem: parse error (with line/column), unknown   |
//! |      | key, missing section, or a hypothesis the core modules reject    |
//! | 2    | runtime guard: blow-up or non-finite field during integration    |
//! | 3    | κ-criterion violation: some requested spectral parameter has     |
//! |      | Hilbert–Schmidt norm ≥ 1, so the determinant expansion does not  |
//! |      | converge there; artifacts are still written with the rows flagged|

mod artifacts;
mod config;
mod runs;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use biharmonic_core::determinant::DeterminantError;
use biharmonic_core::dynamics::DynamicsError;
use biharmonic_core::estimates::EstimatesError;
use biharmonic_core::norms::NormError;
use biharmonic_core::spectral::SpectralError;

/// A failed run, carrying the process exit code it maps to.
///
/// `Config` covers everything wrong with the inputs — unparseable JSON,
/// schema violations, and parameters the core modules reject up front — and
/// exits 1. `Runtime` covers the integration guards (blow-up, non-finite
/// values) and exits 2. The κ-criterion exit 3 is not an error: those runs
/// finish and write artifacts, so the run functions return it as a code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) | Failure::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl From<DynamicsError> for Failure {
    fn from(err: DynamicsError) -> Self {
        match err {
            DynamicsError::BlowUp { .. } | DynamicsError::NonFinite { .. } => {
                Failure::Runtime(err.to_string())
            }
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<SpectralError> for Failure {
    fn from(err: SpectralError) -> Self {
        Failure::Config(err.to_string())
    }
}

impl From<NormError> for Failure {
    fn from(err: NormError) -> Self {
        Failure::Config(err.to_string())
    }
}

impl From<DeterminantError> for Failure {
    fn from(err: DeterminantError) -> Self {
        Failure::Config(err.to_string())
    }
}

impl From<EstimatesError> for Failure {
    fn from(err: EstimatesError) -> Self {
        Failure::Config(err.to_string())
    }
}

/// Batch driver: simulations, determinant profiles, norm evaluations, and
/// estimate sweeps, all configured by a strict JSON document.
#[derive(Parser)]
#[command(name = "biharmonic-lab", version, about)]
struct Cli {
    /// Path to the JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the RNG seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (fallback: BIHARMONIC_LAB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Also emit SVG plots for time series and lattice profiles.
    #[arg(long, global = true)]
    plot: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow; write trajectory and conservation artifacts.
    #[command(name = "simulate")]
    Simulate,
    /// Profile the determinant functional across the κ lattice.
    #[command(name = "alpha")]
    Alpha,
    /// Evaluate mass, Sobolev, modulation, and z norms of the initial datum.
    #[command(name = "norms")]
    Norms,
    /// Ensemble sweep of space-time norm ratios across dyadic bands.
    #[command(name = "sweep-strichartz")]
    SweepStrichartz,
    /// Ensemble sweep of bilinear interaction ratios.
    #[command(name = "sweep-bilinear")]
    SweepBilinear,
    /// Ensemble sweep of quartic space-time ratios over frequency intervals.
    #[command(name = "sweep-l4")]
    SweepL4,
    /// Integrate the flow; write only the conservation report.
    #[command(name = "conservation-report")]
    ConservationReport,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    configure_threads(cli.threads)?;
    let path = cli
        .config
        .ok_or_else(|| Failure::Config("--config PATH is required".to_owned()))?;
    let loaded = config::load(&path)?;
    let seed = cli.seed.or(loaded.doc.seed).unwrap_or(0);
    let ctx = runs::RunContext {
        doc: loaded.doc,
        config_sha256: loaded.sha256,
        seed,
        out: cli.out,
        plot: cli.plot,
    };
    match cli.command {
        Command::Simulate => runs::simulate(&ctx, false),
        Command::ConservationReport => runs::simulate(&ctx, true),
        Command::Alpha => runs::alpha_profile(&ctx),
        Command::Norms => runs::norms(&ctx),
        Command::SweepStrichartz => runs::sweep_strichartz(&ctx),
        Command::SweepBilinear => runs::sweep_bilinear(&ctx),
        Command::SweepL4 => runs::sweep_l4(&ctx),
    }
}

/// Sizes the rayon pool from `--threads` or `BIHARMONIC_LAB_THREADS`.
/// Without either, rayon's default (all cores) stands.
fn configure_threads(flag: Option<usize>) -> Result<(), Failure> {
    let count = match flag {
        Some(n) => Some(n),
        None => match std::env::var("BIHARMONIC_LAB_THREADS") {
            Ok(text) => Some(text.trim().parse::<usize>().map_err(|_| {
                Failure::Config(format!(
                    "BIHARMONIC_LAB_THREADS must be a positive integer, got {text:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = count {
        if n == 0 {
            return Err(Failure::Config("thread count must be positive".to_owned()));
        }
        // A pool can only be installed once per process; a second attempt
        // (e.g. in-process tests) is harmless, so the error is dropped.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
