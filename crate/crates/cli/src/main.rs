//! `scatlite` command-line driver.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 computation error.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scatlite::{FilterBankConfig, WaveletFamily};

#[derive(Parser, Debug)]
#[command(
    name = "scatlite",
    version,
    about = "First-order wavelet scattering toolkit"
)]
struct Cli {
    /// Seed for every random draw made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scatter one or more PNG images into SCT1 coefficient files.
    Scatter(commands::scatter::ScatterArgs),
    /// Recover an image from a coefficient file by gradient descent.
    Reconstruct(commands::reconstruct::ReconstructArgs),
    /// Print the Littlewood-Paley frame report of a filter bank.
    Framecheck(commands::framecheck::FramecheckArgs),
    /// Compare numeric and closed-form scattering of a Gaussian blob.
    Blob(commands::blob::BlobArgs),
    /// Sweep the translation-stability bound over random trials.
    Stability(commands::stability::StabilityArgs),
    /// Write filter heatmaps and raw spectra.
    DumpFilters(commands::dump::DumpArgs),
}

/// Filter-bank flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct BankArgs {
    /// Grid size N (images are resampled to N x N).
    #[arg(long, default_value_t = FilterBankConfig::DEFAULT_GRID_SIZE)]
    size: usize,
    /// Number of scales J; the averaging window is 2^J.
    #[arg(long = "J", visible_alias = "j", default_value_t = FilterBankConfig::DEFAULT_SCALE_J)]
    scale_j: u32,
    /// Number of orientations.
    #[arg(long, default_value_t = FilterBankConfig::DEFAULT_NUM_ANGLES)]
    angles: usize,
    #[arg(long, default_value_t = FilterBankConfig::DEFAULT_SIGMA0)]
    sigma0: f64,
    #[arg(long, default_value_t = FilterBankConfig::DEFAULT_XI0)]
    xi0: f64,
    #[arg(long, default_value_t = FilterBankConfig::DEFAULT_SLANT)]
    slant: f64,
    /// gabor or morlet; defaults to morlet for images and gabor for oracles.
    #[arg(long)]
    family: Option<WaveletFamily>,
}

impl BankArgs {
    pub fn config(&self, default_family: WaveletFamily) -> FilterBankConfig {
        FilterBankConfig {
            grid_size: self.size,
            scale_j: self.scale_j,
            num_angles: self.angles,
            sigma0: self.sigma0,
            slant: self.slant,
            xi0: self.xi0,
            family: self.family.unwrap_or(default_family),
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SCATLITE_THREADS") {
        let threads: usize = v.parse().map_err(|_| {
            anyhow::anyhow!("SCATLITE_THREADS must be a positive integer, got {v:?}")
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<scatlite::Error>(),
            Some(scatlite::Error::InvalidConfig(_))
        ) || e.downcast_ref::<commands::UsageError>().is_some()
    });
    if usage {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Scatter(args) => commands::scatter::run(&args),
        Command::Reconstruct(args) => commands::reconstruct::run(&args, cli.seed),
        Command::Framecheck(args) => commands::framecheck::run(&args),
        Command::Blob(args) => commands::blob::run(&args, cli.seed),
        Command::Stability(args) => commands::stability::run(&args, cli.seed),
        Command::DumpFilters(args) => commands::dump::run(&args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
