use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use scatlite::io::{save_image, save_json};
use scatlite::oracles::{best_scale, blob_signal, compare_blob, BlobComparison, BlobSpec};
use scatlite::{
    build_filter_bank, psnr, reconstruct, Init, ReconstructionConfig, ScatteringCoeffs,
    WaveletFamily,
};

use super::usage;
use crate::BankArgs;

#[derive(Args, Debug)]
pub struct BlobArgs {
    /// Covariance entries "s11 s12 s22".
    #[arg(long, allow_hyphen_values = true)]
    sigma: String,
    /// Directory for the blob, both reconstructions, and report.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Descent iterations for each reconstruction; 0 skips them.
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[command(flatten)]
    bank: BankArgs,
}

#[derive(Serialize)]
struct BlobRun {
    #[serde(flatten)]
    comparison: BlobComparison,
    border_ratio: f64,
    nyquist_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    psnr_numeric: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psnr_analytic: Option<f64>,
}

fn parse_sigma(text: &str) -> anyhow::Result<[[f64; 2]; 2]> {
    let values: Vec<f64> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("--sigma: {e}")))?;
    match values[..] {
        [a, b, d] => Ok([[a, b], [b, d]]),
        _ => Err(usage("--sigma takes three numbers: s11 s12 s22")),
    }
}

pub fn run(args: &BlobArgs, seed: u64) -> anyhow::Result<()> {
    let spec = BlobSpec::new(parse_sigma(&args.sigma)?, args.bank.size)?;
    let bank = build_filter_bank(&args.bank.config(WaveletFamily::Gabor))?;
    let signal = blob_signal(&spec)?;
    let (comparison, numeric, analytic) = compare_blob(&spec, &bank)?;

    for (k, c) in comparison.cosine.iter().enumerate() {
        println!("channel {k:>3} cosine {c:.6}");
    }
    println!("min cosine {:.6}", comparison.min_cosine);
    if signal.aliasing_warning {
        eprintln!(
            "warning: blob aliases (border {:.3}, Nyquist {:.3} of peak)",
            signal.border_ratio, signal.nyquist_ratio
        );
    }
    if signal.degenerate {
        eprintln!("warning: Σ is rank-deficient");
    }

    let mut run = BlobRun {
        comparison,
        border_ratio: signal.border_ratio,
        nyquist_ratio: signal.nyquist_ratio,
        psnr_numeric: None,
        psnr_analytic: None,
    };

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        save_image(&signal.image, &dir.join("blob.png"))?;
        if args.iters > 0 {
            // analytic channels are only defined up to a scalar; match them to the numeric ones
            let mut aligned = analytic.clone();
            for k in 0..aligned.channels() {
                let lambda = best_scale(numeric.channel(k), analytic.channel(k));
                aligned.channel_mut(k).iter_mut().for_each(|v| *v *= lambda);
            }
            let cfg = ReconstructionConfig {
                max_iters: args.iters,
                initial_lr: args.lr,
                init: Init::UniformNoise,
                seed,
                ..Default::default()
            };
            let solve = |target: &ScatteringCoeffs, name: &str| -> anyhow::Result<f64> {
                let trace = reconstruct(target, &bank, &cfg)?;
                save_image(&trace.final_image, &dir.join(name))?;
                Ok(psnr(&trace.final_image.clipped(0.0, 1.0), &signal.image)?)
            };
            let p_num = solve(&numeric, "reconstruction_numeric.png")?;
            let p_ana = solve(&aligned, "reconstruction_analytic.png")?;
            println!("reconstruction PSNR numeric {p_num:.2} dB analytic {p_ana:.2} dB");
            run.psnr_numeric = Some(p_num);
            run.psnr_analytic = Some(p_ana);
        }
        save_json(&run, &dir.join("report.json"))?;
    } else {
        println!("{}", serde_json::to_string(&run)?);
    }
    Ok(())
}
