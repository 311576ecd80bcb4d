use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Training-time data attribution for small networks.
#[derive(Parser, Debug)]
#[command(name = "inrun", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Train without attribution; writes loss curves and a checkpoint.
    Train,
    /// Train with attribution; writes per-example values and loss curves.
    Attribute,
    /// Run the oracle self-check suite.
    Verify {
        /// Corrupt one fixture to confirm the suite fails.
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// Measure Taylor-expansion error of the local utility against step size.
    TaylorError,
    /// Remove negatively valued examples and retrain.
    Clean,
    /// Compare wall-clock cost of attribution modes.
    Bench,
    /// Rank of a training example against a near-copy of itself.
    RankProbe,
    /// Per-domain cumulative value over iterations.
    Compose,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("INRUN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(1).max(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("warning: could not size thread pool: {e}");
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
