//! Reverse- and forward-mode derivatives of the scattering map.
//!
//! For a real input `y` the pipeline is linear except for the modulus, so
//! the adjoint chains three pieces per band-pass channel:
//!
//! * subsampled low-pass: zero-insertion upsampling, then correlation with
//!   `φ_J` (spectrum multiplied by `conj φ̂_J`);
//! * modulus at `z`: `g ↦ g · z / |z|`, with the subgradient `0` where
//!   `|z| < 1e-12`;
//! * band-pass convolution: multiplication by `conj ψ̂_{j,θ}` and the real
//!   part of the inverse DFT.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::tile_spectrum;
use crate::filterbank::FilterBank;
use crate::image::ImageTensor;
use crate::transform::{ForwardCache, Scatterer, ScatteringCoeffs};

/// Below this modulus the derivative of `|z|` is taken to be zero.
pub const MODULUS_FLOOR: f64 = 1e-12;

impl Scatterer<'_> {
    /// Spectrum of the low-pass adjoint applied to one coarse cotangent map.
    fn low_pass_adjoint_spectrum(&self, cotangent: &[f64]) -> Vec<Complex64> {
        let cfg = self.bank.config();
        let mut g = self.coarse.forward_real(cotangent);
        // the coarse forward DFT already matches the tiling convention
        g = tile_spectrum(&g, cfg.output_size(), cfg.subsampling());
        for (v, p) in g.iter_mut().zip(self.bank.low_pass().values()) {
            *v *= p.conj();
        }
        g
    }

    pub(crate) fn backward(
        &self,
        channels: usize,
        cache: &ForwardCache,
        cotangent: &ScatteringCoeffs,
    ) -> ImageTensor {
        let filters = self.bank.band_pass();
        let per = 1 + filters.len();
        let n = self.bank.grid_size();

        let tasks: Vec<(usize, usize)> = (0..channels)
            .flat_map(|c| (0..filters.len()).map(move |k| (c, k)))
            .collect();
        let contributions: Vec<Vec<Complex64>> = tasks
            .par_iter()
            .map(|&(c, k)| {
                let mut gu = self.low_pass_adjoint_spectrum(cotangent.channel(c * per + 1 + k));
                self.full.inverse(&mut gu);
                let z = &cache.band[c * filters.len() + k];
                let mut w: Vec<Complex64> = gu
                    .iter()
                    .zip(z)
                    .map(|(g, z)| {
                        let r = z.norm_sqr().sqrt();
                        if r < MODULUS_FLOOR {
                            Complex64::new(0.0, 0.0)
                        } else {
                            z * (g.re / r)
                        }
                    })
                    .collect();
                self.full.forward(&mut w);
                for (v, psi) in w.iter_mut().zip(filters[k].spectrum.values()) {
                    *v *= psi.conj();
                }
                w
            })
            .collect();

        let mut grad = ImageTensor::zeros(channels, n);
        for c in 0..channels {
            let mut acc = self.low_pass_adjoint_spectrum(cotangent.channel(c * per));
            for part in &contributions[c * filters.len()..(c + 1) * filters.len()] {
                for (a, b) in acc.iter_mut().zip(part) {
                    *a += b;
                }
            }
            self.full.inverse(&mut acc);
            for (dst, v) in grad.channel_mut(c).iter_mut().zip(&acc) {
                *dst = v.re;
            }
        }
        grad
    }

    /// Directional derivative of the scattering at the cached point along `delta`.
    pub(crate) fn linearize(&self, cache: &ForwardCache, delta: &ImageTensor) -> ScatteringCoeffs {
        let filters = self.bank.band_pass();
        let per = 1 + filters.len();
        let m = self.bank.config().output_size();
        let len = m * m;
        let mut out = ScatteringCoeffs::zeros_like_bank(self.bank, delta.channels());
        for c in 0..delta.channels() {
            let d_hat = self.full.forward_real(delta.channel(c));
            out.channel_mut(c * per)
                .copy_from_slice(&self.average_and_subsample(&d_hat));
            for (k, f) in filters.iter().enumerate() {
                let mut dz: Vec<Complex64> = d_hat
                    .iter()
                    .zip(f.spectrum.values())
                    .map(|(a, b)| a * b)
                    .collect();
                self.full.inverse(&mut dz);
                let z = &cache.band[c * filters.len() + k];
                let mut du: Vec<Complex64> = dz
                    .iter()
                    .zip(z)
                    .map(|(dz, z)| {
                        let r = z.norm_sqr().sqrt();
                        if r < MODULUS_FLOOR {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new((z.conj() * dz).re / r, 0.0)
                        }
                    })
                    .collect();
                self.full.forward(&mut du);
                let coarse = self.average_and_subsample(&du);
                out.data_mut()[(c * per + 1 + k) * len..(c * per + 2 + k) * len]
                    .copy_from_slice(&coarse);
            }
        }
        out
    }
}

fn check_cotangent(bank: &FilterBank, y: &ImageTensor, cotangent: &ScatteringCoeffs) -> Result<()> {
    let expected = ScatteringCoeffs::zeros_like_bank(bank, y.channels());
    if !expected.same_layout(cotangent) {
        return Err(Error::shape(
            format!("{:?}", expected.shape()),
            format!("{:?}", cotangent.shape()),
        ));
    }
    Ok(())
}

/// Gradient of `⟨scatter(y), cotangent⟩` with respect to `y`.
pub fn scatter_vjp(
    y: &ImageTensor,
    bank: &FilterBank,
    cotangent: &ScatteringCoeffs,
) -> Result<ImageTensor> {
    let engine = Scatterer::new(bank);
    engine.check_input(y)?;
    check_cotangent(bank, y, cotangent)?;
    let (_, cache) = engine.forward(y, true)?;
    Ok(engine.backward(y.channels(), &cache.expect("cache requested"), cotangent))
}

/// Forward-mode derivative of `scatter` at `y` in direction `delta`.
pub fn scatter_jvp(
    y: &ImageTensor,
    bank: &FilterBank,
    delta: &ImageTensor,
) -> Result<ScatteringCoeffs> {
    y.check_same_shape(delta)?;
    let engine = Scatterer::new(bank);
    let (_, cache) = engine.forward(y, true)?;
    Ok(engine.linearize(&cache.expect("cache requested"), delta))
}

/// `scatter(y)` together with the gradient of `⟨scatter(y), g(scatter(y))⟩`
/// where the cotangent is produced from the forward value.
pub(crate) fn value_and_vjp(
    engine: &Scatterer<'_>,
    y: &ImageTensor,
    cotangent: impl FnOnce(&ScatteringCoeffs) -> Option<ScatteringCoeffs>,
) -> Result<(ScatteringCoeffs, Option<ImageTensor>)> {
    let (value, cache) = engine.forward(y, true)?;
    let grad = cotangent(&value)
        .map(|g| engine.backward(y.channels(), &cache.expect("cache requested"), &g));
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{build_filter_bank, FilterBankConfig};
    use crate::transform::scatter;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (FilterBank, ImageTensor, ScatteringCoeffs, ChaCha8Rng) {
        let bank = build_filter_bank(&FilterBankConfig::new(16, 2).with_angles(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = ImageTensor::from_fn(2, 16, |_, _, _| rng.gen_range(0.0..1.0));
        let mut g = ScatteringCoeffs::zeros_like_bank(&bank, 2);
        for v in g.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        (bank, y, g, rng)
    }

    #[test]
    fn zero_cotangent_gives_zero_gradient() {
        let (bank, y, g, _) = setup(1);
        let grad = scatter_vjp(&y, &bank, &g.map(|_| 0.0)).unwrap();
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_in_cotangent() {
        let (bank, y, g1, mut rng) = setup(2);
        let g2 = g1.map(|_| rng.gen_range(-1.0..1.0));
        let sum = ScatteringCoeffs::new(
            g1.input_channels(),
            g1.channels_per_input(),
            g1.size(),
            g1.data()
                .iter()
                .zip(g2.data())
                .map(|(a, b)| a + b)
                .collect(),
            g1.config_hash().to_string(),
        )
        .unwrap();
        let a = scatter_vjp(&y, &bank, &g1).unwrap();
        let b = scatter_vjp(&y, &bank, &g2).unwrap();
        let ab = scatter_vjp(&y, &bank, &sum).unwrap();
        for ((x, y), z) in a.data().iter().zip(b.data()).zip(ab.data()) {
            assert!((x + y - z).abs() <= 1e-10 * (1.0 + z.abs()));
        }
    }

    #[test]
    fn matches_central_differences() {
        let (bank, y, g, mut rng) = setup(3);
        let grad = scatter_vjp(&y, &bank, &g).unwrap();
        let loss = |x: &ImageTensor| scatter(x, &bank).unwrap().dot(&g);
        let h = 1e-4;
        for _ in 0..3 {
            let mut d = ImageTensor::from_fn(2, 16, |_, _, _| rng.gen_range(-1.0..1.0));
            let norm = d.norm();
            d = d.scaled(1.0 / norm);
            let fd = (loss(&y.add_scaled(&d, h)) - loss(&y.add_scaled(&d, -h))) / (2.0 * h);
            assert!(
                (grad.dot(&d) - fd).abs() <= 1e-4,
                "{} vs {fd}",
                grad.dot(&d)
            );
        }
    }

    #[test]
    fn adjoint_pairs_with_linearization() {
        let (bank, y, g, mut rng) = setup(4);
        let d = ImageTensor::from_fn(2, 16, |_, _, _| rng.gen_range(-1.0..1.0));
        let lhs = scatter_jvp(&y, &bank, &d).unwrap().dot(&g);
        let rhs = d.dot(&scatter_vjp(&y, &bank, &g).unwrap());
        assert!(
            (lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()),
            "{lhs} vs {rhs}"
        );
    }

    #[test]
    fn rejects_mismatched_cotangent() {
        let (bank, y, _, _) = setup(5);
        let wrong = ScatteringCoeffs::zeros_like_bank(&bank, 1);
        assert!(scatter_vjp(&y, &bank, &wrong).is_err());
    }
}
