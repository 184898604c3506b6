use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scatlite::io::{coeffs_to_tensor, load_image, save_json, save_tensor, sidecar_path};
use scatlite::transform::scatter_with_boundary;
use scatlite::{build_filter_bank, coefficient_count, Boundary, FilterBankConfig, WaveletFamily};

use super::usage;
use crate::BankArgs;

#[derive(Args, Debug)]
pub struct ScatterArgs {
    /// PNG file, or a glob pattern such as "images/*.png".
    #[arg(long)]
    input: String,
    /// Output .sct file; a directory when the input matches several files.
    #[arg(long)]
    out: PathBuf,
    /// periodic (default) or reflect.
    #[arg(long, value_enum, default_value = "periodic")]
    boundary: BoundaryArg,
    #[command(flatten)]
    bank: BankArgs,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum BoundaryArg {
    Periodic,
    Reflect,
}

/// Metadata written beside every coefficient file as `<out>.json`.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct CoeffSidecar {
    pub input: String,
    pub shape: [usize; 3],
    pub input_channels: usize,
    /// Bank used for scattering (for reflect, built on the padded grid).
    pub config: FilterBankConfig,
    pub config_hash: String,
    pub boundary: Boundary,
    pub coefficient_count: u64,
    pub coefficients_per_channel: u64,
    pub input_values: u64,
    /// `coefficient_count / input_values`.
    pub ratio: f64,
    /// "compression" when `ratio < 1`, otherwise "expansion".
    pub regime: String,
}

pub fn read_sidecar(coeffs: &Path) -> anyhow::Result<CoeffSidecar> {
    let path = sidecar_path(coeffs);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading coefficient metadata {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn expand_inputs(pattern: &str) -> anyhow::Result<Vec<PathBuf>> {
    if Path::new(pattern).exists() {
        return Ok(vec![PathBuf::from(pattern)]);
    }
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| usage(format!("bad input pattern {pattern:?}: {e}")))?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        anyhow::bail!("no input matches {pattern:?}");
    }
    Ok(paths)
}

fn scatter_one(
    input: &Path,
    out: &Path,
    image_size: usize,
    config: &FilterBankConfig,
    bank: &scatlite::FilterBank,
    boundary: Boundary,
) -> anyhow::Result<CoeffSidecar> {
    let x = load_image(input, image_size)?;
    let coeffs = scatter_with_boundary(&x, bank, boundary)?;
    let per_channel = match boundary {
        Boundary::Periodic => coefficient_count(config),
        Boundary::Reflect => {
            let mut unpadded = config.clone();
            unpadded.grid_size = image_size;
            coefficient_count(&unpadded)
        }
    };
    let channels = x.channels() as u64;
    let input_values = channels * (image_size * image_size) as u64;
    let count = per_channel * channels;
    let ratio = count as f64 / input_values as f64;
    let sidecar = CoeffSidecar {
        input: input.display().to_string(),
        shape: coeffs.shape(),
        input_channels: x.channels(),
        config: config.clone(),
        config_hash: bank.config_hash(),
        boundary,
        coefficient_count: count,
        coefficients_per_channel: per_channel,
        input_values,
        ratio,
        regime: if ratio < 1.0 {
            "compression"
        } else {
            "expansion"
        }
        .to_string(),
    };
    save_tensor(&coeffs_to_tensor(&coeffs), out)?;
    save_json(&sidecar, &sidecar_path(out))?;
    Ok(sidecar)
}

pub fn run(args: &ScatterArgs) -> anyhow::Result<()> {
    let image_size = args.bank.size;
    let boundary = match args.boundary {
        BoundaryArg::Periodic => Boundary::Periodic,
        BoundaryArg::Reflect => Boundary::Reflect,
    };
    let mut config = args.bank.config(WaveletFamily::Morlet);
    if boundary == Boundary::Reflect {
        config.grid_size = image_size + 2 * config.subsampling();
    }
    let bank = build_filter_bank(&config)?;
    let inputs = expand_inputs(&args.input)?;

    let batch = inputs.len() > 1 || args.out.is_dir();
    if batch {
        std::fs::create_dir_all(&args.out)?;
    }
    let jobs: Vec<(PathBuf, PathBuf)> = inputs
        .into_iter()
        .map(|input| {
            let out = if batch {
                let stem = input
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .to_string();
                args.out.join(format!("{stem}.sct"))
            } else {
                args.out.clone()
            };
            (input, out)
        })
        .collect();

    let results: Vec<anyhow::Result<CoeffSidecar>> = jobs
        .par_iter()
        .map(|(input, out)| {
            scatter_one(input, out, image_size, &config, &bank, boundary)
                .with_context(|| format!("scattering {}", input.display()))
        })
        .collect();

    let mut failures = 0;
    for ((_, out), result) in jobs.iter().zip(results) {
        match result {
            Ok(meta) => println!(
                "{} -> {} shape {:?} ratio {:.4} ({})",
                meta.input,
                out.display(),
                meta.shape,
                meta.ratio,
                meta.regime
            ),
            Err(e) => {
                failures += 1;
                eprintln!("error: {e:#}");
            }
        }
    }
    if failures > 0 {
        anyhow::bail!("{failures} of {} inputs failed", jobs.len());
    }
    Ok(())
}
