use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scatlite::oracles::random_stability_trial;
use scatlite::{build_filter_bank, WaveletFamily};

use super::emit_rows;
use crate::BankArgs;

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Largest shift norm, in pixels.
    #[arg(long, default_value_t = 4.0)]
    amax: f64,
    /// JSON-lines output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    bank: BankArgs,
}

pub fn run(args: &StabilityArgs, seed: u64) -> anyhow::Result<()> {
    let bank = build_filter_bank(&args.bank.config(WaveletFamily::Gabor))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(args.trials);
    for _ in 0..args.trials {
        rows.push(random_stability_trial(&bank, &mut rng, args.amax)?);
    }
    emit_rows(&rows, args.out.as_deref())?;
    let violations = rows.iter().filter(|r| !r.holds).count();
    let tightest = rows
        .iter()
        .filter(|r| r.rhs > 0.0)
        .map(|r| r.lhs / r.rhs)
        .fold(0.0, f64::max);
    eprintln!(
        "{} trials, {violations} violations, largest lhs/rhs {tightest:.4}",
        rows.len()
    );
    if violations > 0 {
        anyhow::bail!("translation bound violated in {violations} trials");
    }
    Ok(())
}
