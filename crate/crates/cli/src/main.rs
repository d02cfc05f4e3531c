//! `kerr-herald <mode> --config FILE [--threads N] [--seed S] [--out DIR]`
//!
//! Exit codes: 0 success, 2 bad configuration, 3 numerical failure, 4 I/O.

// `!(x > 0.0)` style guards are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Mode, RunConfig};
use run::{CliError, Context};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Command {
    Steady,
    Spectrum,
    Pseudo,
    Trajectory,
    Wigner,
    Sweep,
    OptimizeXi,
    /// Check the configuration and print it with defaults filled in.
    Validate,
}

impl Command {
    fn mode(self) -> Option<Mode> {
        Some(match self {
            Command::Steady => Mode::Steady,
            Command::Spectrum => Mode::Spectrum,
            Command::Pseudo => Mode::Pseudo,
            Command::Trajectory => Mode::Trajectory,
            Command::Wigner => Mode::Wigner,
            Command::Sweep => Mode::Sweep,
            Command::OptimizeXi => Mode::OptimizeXi,
            Command::Validate => return None,
        })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kerr-herald",
    version,
    about = "Heralded nonclassical states of a monitored Kerr oscillator"
)]
struct Args {
    #[arg(value_enum)]
    mode: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "KERR_HERALD_THREADS")]
    threads: Option<usize>,
    /// Master seed, overriding `trajectory.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kerr-herald: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.trajectory.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Schema("--threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    }

    let Some(mode) = args.mode.mode() else {
        let mode = cfg.mode.unwrap_or(Mode::Steady);
        let p = cfg.check(mode)?;
        let resolved = cfg.resolved(&p);
        let text = serde_json::to_string_pretty(&resolved).expect("config serializes");
        println!("{text}");
        return Ok(());
    };

    let p = cfg.check(mode)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut ctx = Context::new(mode, cfg.resolved(&p), p, out, cfg.params.fock_dim.is_none())?;
    let result = run::dispatch(&mut ctx);
    ctx.finish(result.as_ref().err())?;
    result
}
