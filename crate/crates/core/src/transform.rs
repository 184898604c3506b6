//! First-order scattering `Sx = {x ⋆ φ_J, |x ⋆ ψ_{j,θ}| ⋆ φ_J}` sampled on
//! the `2^J`-subsampled grid.
//!
//! Convolutions are periodic and computed in the DFT domain. Subsampling is
//! done by periodising the averaged spectrum onto the coarse grid and taking
//! a small inverse DFT, which equals decimating the full-resolution average.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fold_spectrum, Fft2d};
use crate::filterbank::{FilterBank, FilterBankConfig};
use crate::image::ImageTensor;

/// Coefficients `C·(1+|Θ|J) × M × M` with `M = N/2^J`.
///
/// Per input channel, channel 0 is `x ⋆ φ_J`, followed by
/// `|x ⋆ ψ_{j,θ}| ⋆ φ_J` for `j` ascending then `θ` ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringCoeffs {
    input_channels: usize,
    channels_per_input: usize,
    size: usize,
    data: Vec<f64>,
    config_hash: String,
}

impl ScatteringCoeffs {
    pub fn new(
        input_channels: usize,
        channels_per_input: usize,
        size: usize,
        data: Vec<f64>,
        config_hash: String,
    ) -> Result<Self> {
        let expected = input_channels * channels_per_input * size * size;
        if data.len() != expected {
            return Err(Error::shape(expected, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scattering coefficients"));
        }
        Ok(ScatteringCoeffs {
            input_channels,
            channels_per_input,
            size,
            data,
            config_hash,
        })
    }

    /// All-zero coefficients shaped for `bank` and `input_channels`.
    pub fn zeros_like_bank(bank: &FilterBank, input_channels: usize) -> Self {
        let cfg = bank.config();
        let per = 1 + bank.band_pass().len();
        let m = cfg.output_size();
        ScatteringCoeffs {
            input_channels,
            channels_per_input: per,
            size: m,
            data: vec![0.0; input_channels * per * m * m],
            config_hash: cfg.config_hash(),
        }
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn channels_per_input(&self) -> usize {
        self.channels_per_input
    }

    /// Total output channels, `C·(1+|Θ|J)`.
    pub fn channels(&self) -> usize {
        self.input_channels * self.channels_per_input
    }

    /// Spatial side length `M`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels(), self.size, self.size]
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let len = self.size * self.size;
        &self.data[k * len..(k + 1) * len]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut [f64] {
        let len = self.size * self.size;
        &mut self.data[k * len..(k + 1) * len]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &ScatteringCoeffs) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// `‖self − other‖₂` over all coefficients.
    pub fn distance(&self, other: &ScatteringCoeffs) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn same_layout(&self, other: &ScatteringCoeffs) -> bool {
        self.input_channels == other.input_channels
            && self.channels_per_input == other.channels_per_input
            && self.size == other.size
    }

    pub(crate) fn check_layout(&self, other: &ScatteringCoeffs) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::shape(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ))
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        ScatteringCoeffs {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Elementwise `self − other`.
    pub fn sub(&self, other: &ScatteringCoeffs) -> Self {
        ScatteringCoeffs {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
            ..self.clone()
        }
    }

    pub fn with_config_hash(mut self, hash: String) -> Self {
        self.config_hash = hash;
        self
    }
}

/// Number of scattering coefficients per input channel,
/// `(1 + |Θ|J) · N² / 2^{2J}`.
pub fn coefficient_count(config: &FilterBankConfig) -> u64 {
    let n = config.grid_size as u64;
    let per = 1 + config.num_angles as u64 * config.scale_j as u64;
    per * n * n / (1u64 << (2 * config.scale_j))
}

/// Circular shift `x_a(u) = x(u − a)`, with `a = (rows, cols)`.
pub fn translate(x: &ImageTensor, a: (i64, i64)) -> ImageTensor {
    let n = x.size() as i64;
    let mut out = ImageTensor::zeros(x.channels(), x.size());
    for c in 0..x.channels() {
        for r in 0..n {
            let rr = (r + a.0).rem_euclid(n) as usize;
            for col in 0..n {
                let cc = (col + a.1).rem_euclid(n) as usize;
                out.set(c, rr, cc, x.get(c, r as usize, col as usize));
            }
        }
    }
    out
}

/// How the signal is extended beyond the image border.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Periodic convolution on the `N × N` torus.
    #[default]
    Periodic,
    /// Mirror-pad by `2^J` pixels on every side, scatter, then crop.
    /// The bank must be built for the padded grid `N + 2^{J+1}`.
    Reflect,
}

/// Scattering engine bound to one filter bank.
///
/// Holds the FFT plans for the full and subsampled grids; cheap to share
/// across threads.
#[derive(Debug)]
pub struct Scatterer<'a> {
    pub(crate) bank: &'a FilterBank,
    pub(crate) full: Fft2d,
    pub(crate) coarse: Fft2d,
}

/// Intermediate values kept by a forward pass for the adjoint.
pub(crate) struct ForwardCache {
    /// `x ⋆ ψ_{j,θ}` per (input channel, filter), channel-major.
    pub band: Vec<Vec<Complex64>>,
}

impl<'a> Scatterer<'a> {
    pub fn new(bank: &'a FilterBank) -> Self {
        let cfg = bank.config();
        Scatterer {
            bank,
            full: Fft2d::new(cfg.grid_size),
            coarse: Fft2d::new(cfg.output_size()),
        }
    }

    pub fn bank(&self) -> &FilterBank {
        self.bank
    }

    pub fn scatter(&self, x: &ImageTensor) -> Result<ScatteringCoeffs> {
        self.forward(x, false).map(|(s, _)| s)
    }

    pub(crate) fn check_input(&self, x: &ImageTensor) -> Result<()> {
        let n = self.bank.grid_size();
        if x.size() != n {
            return Err(Error::shape(
                format!("{n}x{n} signal for this filter bank"),
                format!("{0}x{0}", x.size()),
            ));
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input signal"));
        }
        Ok(())
    }

    /// Low-pass, subsample, and return the real coarse map.
    pub(crate) fn average_and_subsample(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let cfg = self.bank.config();
        let low = self.bank.low_pass().values();
        let filtered: Vec<Complex64> = spectrum.iter().zip(low).map(|(a, b)| a * b).collect();
        let mut coarse = fold_spectrum(&filtered, cfg.grid_size, cfg.subsampling());
        self.coarse.inverse(&mut coarse);
        coarse.into_iter().map(|v| v.re).collect()
    }

    pub(crate) fn forward(
        &self,
        x: &ImageTensor,
        keep_cache: bool,
    ) -> Result<(ScatteringCoeffs, Option<ForwardCache>)> {
        self.check_input(x)?;
        let cfg = self.bank.config();
        let filters = self.bank.band_pass();
        let per = 1 + filters.len();
        let m = cfg.output_size();
        let len = m * m;

        let spectra: Vec<Vec<Complex64>> = (0..x.channels())
            .into_par_iter()
            .map(|c| self.full.forward_real(x.channel(c)))
            .collect();

        let tasks: Vec<(usize, usize)> = (0..x.channels())
            .flat_map(|c| (0..filters.len()).map(move |k| (c, k)))
            .collect();
        let outputs: Vec<(Vec<f64>, Option<Vec<Complex64>>)> = tasks
            .par_iter()
            .map(|&(c, k)| {
                let psi = filters[k].spectrum.values();
                let mut z: Vec<Complex64> =
                    spectra[c].iter().zip(psi).map(|(a, b)| a * b).collect();
                self.full.inverse(&mut z);
                let mut modulus: Vec<Complex64> = z
                    .iter()
                    .map(|v| Complex64::new(v.norm_sqr().sqrt(), 0.0))
                    .collect();
                self.full.forward(&mut modulus);
                let coarse = self.average_and_subsample(&modulus);
                (coarse, keep_cache.then_some(z))
            })
            .collect();

        let mut data = vec![0.0; x.channels() * per * len];
        for c in 0..x.channels() {
            let low = self.average_and_subsample(&spectra[c]);
            data[c * per * len..(c * per + 1) * len].copy_from_slice(&low);
        }
        let mut band = Vec::new();
        for (&(c, k), (coarse, z)) in tasks.iter().zip(outputs) {
            let slot = c * per + 1 + k;
            data[slot * len..(slot + 1) * len].copy_from_slice(&coarse);
            if let Some(z) = z {
                band.push(z);
            }
        }

        let coeffs = ScatteringCoeffs {
            input_channels: x.channels(),
            channels_per_input: per,
            size: m,
            data,
            config_hash: cfg.config_hash(),
        };
        let cache = keep_cache.then_some(ForwardCache { band });
        Ok((coeffs, cache))
    }

    /// `x ⋆ ψ` at full resolution for one channel and an arbitrary spectrum.
    pub fn convolve(&self, channel: &[f64], spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut buf = self.full.forward_real(channel);
        for (a, b) in buf.iter_mut().zip(spectrum) {
            *a *= b;
        }
        self.full.inverse(&mut buf);
        buf
    }
}

/// First-order scattering of `x` with periodic boundaries.
pub fn scatter(x: &ImageTensor, bank: &FilterBank) -> Result<ScatteringCoeffs> {
    Scatterer::new(bank).scatter(x)
}

/// Scattering with an explicit boundary rule. For [`Boundary::Reflect`] the
/// bank grid must be `x.size() + 2^{J+1}`; the output keeps the unpadded
/// `x.size() / 2^J` resolution.
pub fn scatter_with_boundary(
    x: &ImageTensor,
    bank: &FilterBank,
    boundary: Boundary,
) -> Result<ScatteringCoeffs> {
    match boundary {
        Boundary::Periodic => scatter(x, bank),
        Boundary::Reflect => {
            let cfg = bank.config();
            let pad = cfg.subsampling();
            let n = x.size();
            if n + 2 * pad != cfg.grid_size {
                return Err(Error::shape(
                    format!("bank grid {} = signal + 2·2^J", n + 2 * pad),
                    cfg.grid_size,
                ));
            }
            if !n.is_multiple_of(pad) || n <= pad {
                return Err(Error::InvalidConfig(format!(
                    "reflect padding needs a signal size divisible by and larger than 2^J = {pad}"
                )));
            }
            let padded = reflect_pad(x, pad);
            let full = scatter(&padded, bank)?;
            let m_pad = full.size();
            let m = n / pad;
            let mut data = Vec::with_capacity(full.channels() * m * m);
            for k in 0..full.channels() {
                let ch = full.channel(k);
                for r in 1..=m {
                    data.extend_from_slice(&ch[r * m_pad + 1..r * m_pad + 1 + m]);
                }
            }
            ScatteringCoeffs::new(
                full.input_channels(),
                full.channels_per_input(),
                m,
                data,
                full.config_hash().to_string(),
            )
        }
    }
}

fn reflect_pad(x: &ImageTensor, pad: usize) -> ImageTensor {
    let n = x.size() as i64;
    let reflect = |i: i64| -> usize {
        let period = 2 * (n - 1);
        let mut k = i.rem_euclid(period.max(1));
        if k >= n {
            k = period - k;
        }
        k as usize
    };
    let p = pad as i64;
    ImageTensor::from_fn(x.channels(), x.size() + 2 * pad, |c, r, col| {
        x.get(c, reflect(r as i64 - p), reflect(col as i64 - p))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{build_filter_bank, WaveletFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, c: usize, n: usize) -> ImageTensor {
        ImageTensor::from_fn(c, n, |_, _, _| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn counts() {
        let cfg = FilterBankConfig::new(224, 3);
        assert_eq!(coefficient_count(&cfg), 19_600);
        let cfg = FilterBankConfig::new(224, 2);
        assert_eq!(coefficient_count(&cfg), 53_312);
        let cfg = FilterBankConfig::new(32, 3);
        assert_eq!(coefficient_count(&cfg), 400);
    }

    #[test]
    fn translation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_image(&mut rng, 2, 8);
        assert_eq!(translate(&x, (0, 0)), x);
        assert_eq!(translate(&x, (8, 0)), x);
        assert_eq!(translate(&x, (-3, 11)), translate(&x, (5, 3)));
        let mut delta = ImageTensor::zeros(1, 8);
        delta.set(0, 0, 0, 1.0);
        let moved = translate(&delta, (1, 2));
        assert_eq!(moved.get(0, 1, 2), 1.0);
        assert_eq!(moved.data().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn output_layout() {
        let bank = build_filter_bank(&FilterBankConfig::new(32, 2).with_angles(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = scatter(&random_image(&mut rng, 3, 32), &bank).unwrap();
        assert_eq!(s.shape(), [3 * 9, 8, 8]);
        assert_eq!(s.config_hash(), bank.config_hash());
    }

    #[test]
    fn rejects_size_mismatch_and_nan() {
        let bank = build_filter_bank(&FilterBankConfig::new(32, 2)).unwrap();
        assert!(scatter(&ImageTensor::zeros(1, 16), &bank).is_err());
        let mut x = ImageTensor::zeros(1, 32);
        x.data_mut()[5] = f64::NAN;
        assert!(matches!(scatter(&x, &bank), Err(Error::NonFinite(_))));
    }

    #[test]
    fn constants_vanish_in_band_pass_channels() {
        let bank =
            build_filter_bank(&FilterBankConfig::new(32, 3).with_family(WaveletFamily::Morlet))
                .unwrap();
        let c = 0.7;
        let s = scatter(&ImageTensor::from_fn(1, 32, |_, _, _| c), &bank).unwrap();
        for v in s.channel(0) {
            assert!((v - c).abs() < 1e-12);
        }
        for k in 1..s.channels() {
            for v in s.channel(k) {
                assert!(v.abs() <= 1e-10 * c, "channel {k}: {v}");
            }
        }
    }

    #[test]
    fn reflect_boundary_matches_output_resolution() {
        let cfg = FilterBankConfig::new(32 + 16, 3);
        let bank = build_filter_bank(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_image(&mut rng, 1, 32);
        let s = scatter_with_boundary(&x, &bank, Boundary::Reflect).unwrap();
        assert_eq!(s.shape(), [25, 4, 4]);
        assert!(scatter_with_boundary(&x, &bank, Boundary::Periodic).is_err());
    }

    #[test]
    fn reflect_pad_mirrors_without_repeating_edges() {
        let x = ImageTensor::from_fn(1, 4, |_, r, c| (r * 4 + c) as f64);
        let p = reflect_pad(&x, 2);
        assert_eq!(p.size(), 8);
        // padded (0,0) is source (2,2)
        assert_eq!(p.get(0, 0, 0), x.get(0, 2, 2));
        assert_eq!(p.get(0, 2, 2), x.get(0, 0, 0));
        assert_eq!(p.get(0, 7, 7), x.get(0, 1, 1));
    }
}
