use std::path::PathBuf;

use clap::Args;

use scatlite::{build_filter_bank, dump_filters, WaveletFamily};

use crate::BankArgs;

#[derive(Args, Debug)]
pub struct DumpArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    bank: BankArgs,
}

pub fn run(args: &DumpArgs) -> anyhow::Result<()> {
    let bank = build_filter_bank(&args.bank.config(WaveletFamily::Morlet))?;
    let written = dump_filters(&bank, &args.out_dir)?;
    println!(
        "wrote {} files to {}",
        written.len(),
        args.out_dir.display()
    );
    Ok(())
}
