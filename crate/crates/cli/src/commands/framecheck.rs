use clap::Args;

use scatlite::{build_filter_bank, littlewood_paley_both, WaveletFamily};

use crate::BankArgs;

#[derive(Args, Debug)]
pub struct FramecheckArgs {
    #[command(flatten)]
    bank: BankArgs,
    /// Print the reports as JSON.
    #[arg(long)]
    json: bool,
}

pub fn run(args: &FramecheckArgs) -> anyhow::Result<()> {
    let config = args.bank.config(WaveletFamily::Morlet);
    let bank = build_filter_bank(&config)?;
    let reports = littlewood_paley_both(&bank);
    if args.json {
        let value = serde_json::json!({
            "config": config,
            "band_pass_scale": bank.band_pass_scale(),
            "reports": reports,
        });
        println!("{}", serde_json::to_string_pretty(&value)?);
        return Ok(());
    }
    println!(
        "N={} J={} angles={} family={:?} band-pass scale {:.6}",
        config.grid_size,
        config.scale_j,
        config.num_angles,
        config.family,
        bank.band_pass_scale()
    );
    for r in &reports {
        println!(
            "{:<16} epsilon0 {:.5}  min {:.5}  max {:.5}",
            format!("{:?}", r.convention),
            r.epsilon0,
            r.min_energy,
            r.max_energy
        );
    }
    Ok(())
}
