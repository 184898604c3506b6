//! Recovering a signal from its scattering coefficients by minimising
//! `‖S y − S x‖²` with ADAM.

mod adam;
mod metrics;
mod vjp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::image::ImageTensor;
use crate::transform::{Scatterer, ScatteringCoeffs};

pub use adam::Adam;
pub use metrics::{psnr, relative_err};
pub use vjp::{scatter_jvp, scatter_vjp, MODULUS_FLOOR};

/// Starting point of the descent.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Zeros,
    /// Independent uniform samples in `[0, 1)` drawn from the run seed.
    UniformNoise,
    ProvidedImage(ImageTensor),
}

impl Init {
    pub fn name(&self) -> &'static str {
        match self {
            Init::Zeros => "zeros",
            Init::UniformNoise => "uniform_noise",
            Init::ProvidedImage(_) => "provided_image",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionConfig {
    pub max_iters: usize,
    pub initial_lr: f64,
    pub lr_drop_every: usize,
    pub lr_drop_factor: f64,
    pub target_err: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub init: Init,
    pub seed: u64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            max_iters: 1000,
            initial_lr: 10.0,
            lr_drop_every: 200,
            lr_drop_factor: 0.1,
            target_err: 2e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            init: Init::UniformNoise,
            seed: 0,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.max_iters == 0 || self.lr_drop_every == 0 {
            return bad("max_iters and lr_drop_every must be positive");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive");
        }
        if !(self.lr_drop_factor > 0.0 && self.lr_drop_factor < 1.0) {
            return bad("lr_drop_factor must lie in (0, 1)");
        }
        if !(self.target_err > 0.0 && self.target_err < 1.0) {
            return bad("target_err must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("ADAM betas must lie in [0, 1)");
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }

    /// Learning rate used for the update after evaluation `iter`.
    pub fn learning_rate(&self, iter: usize) -> f64 {
        self.initial_lr * self.lr_drop_factor.powi((iter / self.lr_drop_every) as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    MaxIterations,
    /// The loss became non-finite; the trace keeps the best finite iterate.
    Diverged,
}

#[derive(Clone, Debug)]
pub struct ReconstructionTrace {
    /// `err_J` of the iterate evaluated at each step.
    pub err_history: Vec<f64>,
    /// `‖S y − S x‖²` at each step.
    pub loss_history: Vec<f64>,
    /// Lowest-loss iterate, unclipped.
    pub final_image: ImageTensor,
    pub iterations_run: usize,
    pub best_iteration: usize,
    pub stop_reason: StopReason,
    pub diverged: bool,
    pub seed: u64,
}

impl ReconstructionTrace {
    pub fn final_err(&self) -> f64 {
        self.err_history[self.best_iteration]
    }

    pub fn report(&self, cfg: &ReconstructionConfig, bank: &FilterBank) -> TraceReport {
        TraceReport {
            err_history: self.err_history.clone(),
            loss_history: self.loss_history.clone(),
            iterations_run: self.iterations_run,
            best_iteration: self.best_iteration,
            final_err: self.final_err(),
            stop_reason: self.stop_reason,
            diverged: self.diverged,
            seed: self.seed,
            init: cfg.init.name().to_string(),
            max_iters: cfg.max_iters,
            initial_lr: cfg.initial_lr,
            lr_drop_every: cfg.lr_drop_every,
            lr_drop_factor: cfg.lr_drop_factor,
            target_err: cfg.target_err,
            adam: [cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps],
            config_hash: bank.config_hash().to_string(),
            psnr: None,
        }
    }
}

/// JSON form of a run: histories plus an echo of everything needed to repeat it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceReport {
    pub err_history: Vec<f64>,
    pub loss_history: Vec<f64>,
    pub iterations_run: usize,
    pub best_iteration: usize,
    pub final_err: f64,
    pub stop_reason: StopReason,
    pub diverged: bool,
    pub seed: u64,
    pub init: String,
    pub max_iters: usize,
    pub initial_lr: f64,
    pub lr_drop_every: usize,
    pub lr_drop_factor: f64,
    pub target_err: f64,
    pub adam: [f64; 3],
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
}

fn initial_image(cfg: &ReconstructionConfig, channels: usize, size: usize) -> Result<ImageTensor> {
    match &cfg.init {
        Init::Zeros => Ok(ImageTensor::zeros(channels, size)),
        Init::UniformNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Ok(ImageTensor::from_fn(channels, size, |_, _, _| {
                rng.gen::<f64>()
            }))
        }
        Init::ProvidedImage(img) => {
            if img.shape() != [channels, size, size] {
                return Err(Error::shape(
                    format!("{:?}", [channels, size, size]),
                    format!("{:?}", img.shape()),
                ));
            }
            Ok(img.clone())
        }
    }
}

/// Minimises `‖scatter(y) − target‖²` over `y`.
///
/// Every iteration evaluates the loss at the current iterate, then takes one
/// ADAM step. The run stops once `err_J ≤ target_err`, after `max_iters`
/// evaluations, or when the loss stops being finite.
pub fn reconstruct(
    target: &ScatteringCoeffs,
    bank: &FilterBank,
    cfg: &ReconstructionConfig,
) -> Result<ReconstructionTrace> {
    cfg.validate()?;
    if target.config_hash() != bank.config_hash() {
        return Err(Error::ConfigHashMismatch {
            expected: bank.config_hash().to_string(),
            found: target.config_hash().to_string(),
        });
    }
    let expected = ScatteringCoeffs::zeros_like_bank(bank, target.input_channels());
    expected.check_layout(target)?;
    let target_norm = target.norm();
    if target_norm == 0.0 {
        return Err(Error::ZeroReference);
    }

    let engine = Scatterer::new(bank);
    let mut y = initial_image(cfg, target.input_channels(), bank.grid_size())?;
    let mut adam = Adam::new(y.data().len(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    let mut err_history = Vec::with_capacity(cfg.max_iters);
    let mut loss_history = Vec::with_capacity(cfg.max_iters);
    let mut best: Option<(f64, usize, ImageTensor)> = None;
    let mut stop_reason = StopReason::MaxIterations;

    for iter in 0..cfg.max_iters {
        let mut err = f64::NAN;
        let mut loss = f64::NAN;
        let (_, grad) = vjp::value_and_vjp(&engine, &y, |s| {
            let residual = s.sub(target);
            loss = residual.norm().powi(2);
            err = loss.sqrt() / target_norm;
            (loss.is_finite() && err > cfg.target_err).then(|| residual.map(|v| 2.0 * v))
        })?;
        if !loss.is_finite() {
            stop_reason = StopReason::Diverged;
            break;
        }
        err_history.push(err);
        loss_history.push(loss);
        if best.as_ref().is_none_or(|(l, _, _)| loss < *l) {
            best = Some((loss, iter, y.clone()));
        }
        let Some(grad) = grad else {
            stop_reason = StopReason::TargetReached;
            break;
        };
        adam.update(y.data_mut(), grad.data(), cfg.learning_rate(iter));
        if y.data().iter().any(|v| !v.is_finite()) {
            stop_reason = StopReason::Diverged;
            break;
        }
    }

    let (_, best_iteration, final_image) = best.ok_or(Error::NonFinite("initial loss"))?;
    Ok(ReconstructionTrace {
        iterations_run: err_history.len(),
        err_history,
        loss_history,
        final_image,
        best_iteration,
        diverged: stop_reason == StopReason::Diverged,
        stop_reason,
        seed: cfg.seed,
    })
}
