use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use scatlite::io::{
    coeffs_from_tensor, load_image, load_tensor, save_image, save_json, sidecar_path,
};
use scatlite::{
    build_filter_bank, psnr, reconstruct, relative_err, Boundary, Init, ReconstructionConfig,
};

use super::scatter::read_sidecar;
use super::usage;

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Coefficient file written by `scatlite scatter` (its .json sidecar must sit beside it).
    #[arg(long)]
    coeffs: PathBuf,
    /// Output PNG; the trace is written to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Initial ADAM learning rate.
    #[arg(long, default_value_t = 10.0)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    lr_drop_every: usize,
    #[arg(long, default_value_t = 0.1)]
    lr_drop_factor: f64,
    /// Stop once the relative scattering error reaches this value.
    #[arg(long, default_value_t = 2e-3)]
    target_err: f64,
    /// zeros, noise, or a path to a PNG used as the starting image.
    #[arg(long, default_value = "noise")]
    init: String,
    /// Original image; enables PSNR and err_J against it.
    #[arg(long)]
    reference: Option<PathBuf>,
}

pub fn run(args: &ReconstructArgs, seed: u64) -> anyhow::Result<()> {
    let meta = read_sidecar(&args.coeffs)?;
    if meta.boundary != Boundary::Periodic {
        return Err(usage(
            "reconstruction needs coefficients scattered with periodic boundaries",
        ));
    }
    let bank = build_filter_bank(&meta.config)?;
    if bank.config_hash() != meta.config_hash {
        anyhow::bail!(
            "coefficients were produced under filter convention {}, this build uses {}",
            meta.config_hash,
            bank.config_hash()
        );
    }
    let tensor =
        load_tensor(&args.coeffs).with_context(|| format!("reading {}", args.coeffs.display()))?;
    let target = coeffs_from_tensor(&tensor, meta.input_channels, meta.config_hash.clone())?;
    let n = bank.grid_size();

    let init = match args.init.as_str() {
        "zeros" => Init::Zeros,
        "noise" => Init::UniformNoise,
        path => Init::ProvidedImage(load_image(path.as_ref(), n)?),
    };
    let cfg = ReconstructionConfig {
        max_iters: args.iters,
        initial_lr: args.lr,
        lr_drop_every: args.lr_drop_every,
        lr_drop_factor: args.lr_drop_factor,
        target_err: args.target_err,
        init,
        seed,
        ..Default::default()
    };
    let trace = reconstruct(&target, &bank, &cfg)?;
    save_image(&trace.final_image, &args.out)?;

    let mut report = trace.report(&cfg, &bank);
    println!(
        "iterations {} stop {:?} err_J {:.6e}",
        trace.iterations_run,
        trace.stop_reason,
        trace.final_err()
    );
    if let Some(reference) = &args.reference {
        let x = load_image(reference, n)?;
        let clipped = trace.final_image.clipped(0.0, 1.0);
        let value = psnr(&clipped, &x)?;
        let err = relative_err(&trace.final_image, &x, &bank)?;
        println!("reference err_J {err:.6e} PSNR {value:.2} dB");
        report.psnr = Some(value);
    }
    save_json(&report, &sidecar_path(&args.out))?;
    if trace.diverged {
        anyhow::bail!(
            "descent diverged; best iterate saved to {}",
            args.out.display()
        );
    }
    Ok(())
}
