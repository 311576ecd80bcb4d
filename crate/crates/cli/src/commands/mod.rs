use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use inrun_core::config::ExperimentConfig;
use inrun_core::io::write_atomic;
use inrun_core::trainer::RunArtifacts;
use inrun_core::Error;

use crate::{Cli, Command};

mod experiments;
mod training;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

/// Raised when the verification suite reports a failure.
#[derive(Debug)]
pub struct VerificationFailed(pub usize);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} verification check(s) failed", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<VerificationFailed>().is_some() {
        return EXIT_VERIFY;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::InvalidArgument(_) | Error::Csv { .. } | Error::EmptyDataset) => EXIT_CONFIG,
        Some(Error::Divergence { .. } | Error::NonFiniteLoss { .. } | Error::NonFinite(_)) => EXIT_DIVERGENCE,
        _ => 1,
    }
}

/// Shared state for every command.
pub struct Ctx {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Ctx {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            // A closed pipe is not worth aborting a finished run over.
            let _ = writeln!(std::io::stdout(), "{}", msg.as_ref());
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load_context(cli: &Cli) -> Result<Ctx> {
    let Some(path) = &cli.config else {
        bail!(Error::InvalidArgument("--config is required for this command".into()));
    };
    let mut config = ExperimentConfig::load(path)
        .map_err(|e| match e {
            Error::Io(io) => Error::InvalidArgument(format!("cannot read config: {io}")),
            other => other,
        })
        .with_context(|| format!("reading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.clone().or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok(Ctx { config, out, quiet: cli.quiet })
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Command::Verify { inject_sign_flip } = cli.command {
        return experiments::verify(inject_sign_flip, cli.quiet);
    }
    let ctx = load_context(cli)?;
    match cli.command {
        Command::Train => training::train(&ctx),
        Command::Attribute => training::attribute(&ctx),
        Command::TaylorError => experiments::taylor_error(&ctx),
        Command::Clean => experiments::clean(&ctx),
        Command::Bench => experiments::bench(&ctx),
        Command::RankProbe => experiments::rank_probe(&ctx),
        Command::Compose => experiments::compose(&ctx),
        Command::Verify { .. } => unreachable!("handled above"),
    }
}

/// `iteration,lr,train_loss,val_loss`, one row per iteration.
pub fn save_curves(path: &Path, run: &RunArtifacts) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "iteration,lr,train_loss,val_loss")?;
        for (t, rec) in run.records.iter().enumerate() {
            writeln!(w, "{t},{:.16e},{:.16e},{:.16e}", rec.lr, run.train_loss[t], run.val_loss[t])?;
        }
        Ok(())
    })?;
    Ok(())
}

/// Writes a CSV from already-formatted rows.
pub fn save_table(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    Ok(())
}
