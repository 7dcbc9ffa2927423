//! `mpspectra`: reproducible runs of the spectral laboratory from a JSON config.

mod conditions;
mod config;
mod esd;
mod lemma;
mod output;
mod stieltjes;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpspectra::MpLaw;
use serde::Serialize;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "mpspectra",
    version,
    about = "Marchenko-Pastur spectral laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single seed; replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample spectra, compare them with the limiting law, write histograms.
    Esd(Common),
    /// Empirical against limiting Stieltjes transforms on the z-grid.
    Stieltjes(Common),
    /// Fuzz the resolvent bounds and rank-one identities.
    CheckLemma(Common),
    /// Sweep the quadratic-form and Lindeberg statistics over p.
    CheckConditions(Common),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<mpspectra::Error> for CliError {
    fn from(e: mpspectra::Error) -> Self {
        match e {
            mpspectra::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Parameters of the limiting law recorded next to every comparison.
#[derive(Serialize)]
pub struct LawInfo {
    c: f64,
    lower_edge: f64,
    upper_edge: f64,
    atom: f64,
}

impl From<&MpLaw> for LawInfo {
    fn from(law: &MpLaw) -> Self {
        LawInfo {
            c: law.ratio(),
            lower_edge: law.lower_edge(),
            upper_edge: law.upper_edge(),
            atom: law.atom(),
        }
    }
}

type Handler = fn(&ExperimentConfig) -> Result<(), CliError>;

fn dispatch(command: Command) -> Result<(), CliError> {
    let (common, handler): (Common, Handler) = match command {
        Command::Esd(c) => (c, esd::run),
        Command::Stieltjes(c) => (c, stieltjes::run),
        Command::CheckConditions(c) => (c, conditions::run),
        Command::CheckLemma(c) => (c, |cfg| {
            if lemma::run(cfg)? {
                Ok(())
            } else {
                Err(CliError::Numerical(
                    "lemma1.json records failed checks".into(),
                ))
            }
        }),
    };
    let cfg = ExperimentConfig::load(&common.config, common.out, common.seed)?;
    handler(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mpspectra: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
