//! Gabor and Morlet filter banks synthesised directly on the DFT grid.
//!
//! The mother band-pass filter is an anisotropic Gaussian bump
//! `ψ̂(ω) = κ((ω₁, ω₂/s) − ω₀)` with `κ(ω) = exp(−2σ₀²‖ω‖²)` and
//! `ω₀ = (ξ₀, 0)`. Filter `(j, θ)` evaluates the mother at `2^j r_{−θ} ω`, so
//! its centre frequency sits at `2^{−j} ξ₀ (cos θ, sin θ)`. The low-pass
//! filter is `φ̂_J(ω) = κ(2^J ω)`. Every spectrum is periodised over
//! `±2` grid periods before sampling.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fft::{angular_frequency, mirror_index, Fft2d};

/// Number of grid periods folded in on each side when periodising.
pub(crate) const PERIODISATION_RANGE: i32 = 2;

/// Tag mixed into [`FilterBankConfig::config_hash`]; bump it whenever the
/// synthesis or normalisation convention changes.
const CONVENTION_TAG: &str = "scatlite/lp-normalized/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    /// Pure Gaussian bump; not zero-mean.
    Gabor,
    /// Gabor minus a scaled envelope so that `ψ̂(0) = 0`.
    Morlet,
}

impl std::str::FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gabor" => Ok(WaveletFamily::Gabor),
            "morlet" => Ok(WaveletFamily::Morlet),
            other => Err(Error::InvalidConfig(format!(
                "unknown wavelet family {other:?}"
            ))),
        }
    }
}

/// Hyperparameters of a first-order scattering filter bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBankConfig {
    /// Pixels per side `N`; signals are `N × N`.
    pub grid_size: usize,
    /// `J`: the averaging window is `2^J` and there are `J` band-pass scales.
    pub scale_j: u32,
    pub num_angles: usize,
    pub sigma0: f64,
    pub slant: f64,
    /// Magnitude of the mother central frequency, in radians per sample.
    pub xi0: f64,
    pub family: WaveletFamily,
}

impl FilterBankConfig {
    pub const DEFAULT_GRID_SIZE: usize = 224;
    pub const DEFAULT_SCALE_J: u32 = 3;
    pub const DEFAULT_NUM_ANGLES: usize = 8;
    pub const DEFAULT_SIGMA0: f64 = 0.256;
    pub const DEFAULT_XI0: f64 = 0.825 * PI;
    pub const DEFAULT_SLANT: f64 = 0.41;

    /// Default constants on an `grid_size × grid_size` grid at scale `scale_j`.
    pub fn new(grid_size: usize, scale_j: u32) -> Self {
        FilterBankConfig {
            grid_size,
            scale_j,
            ..Self::default()
        }
    }

    pub fn with_family(mut self, family: WaveletFamily) -> Self {
        self.family = family;
        self
    }

    pub fn with_angles(mut self, num_angles: usize) -> Self {
        self.num_angles = num_angles;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.grid_size == 0 {
            return bad("grid_size must be positive".into());
        }
        if self.scale_j == 0 {
            return bad("scale_j must be at least 1".into());
        }
        if self.scale_j >= usize::BITS - 1 || (1usize << self.scale_j) > self.grid_size {
            return bad(format!(
                "2^J = 2^{} exceeds the grid size {}",
                self.scale_j, self.grid_size
            ));
        }
        if !self.grid_size.is_multiple_of(1usize << self.scale_j) {
            return bad(format!(
                "grid size {} is not divisible by 2^J = {}",
                self.grid_size,
                1usize << self.scale_j
            ));
        }
        if self.num_angles == 0 {
            return bad("num_angles must be at least 1".into());
        }
        for (name, v) in [
            ("sigma0", self.sigma0),
            ("slant", self.slant),
            ("xi0", self.xi0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        if self.xi0 >= PI {
            return bad(format!(
                "xi0 = {} lies outside the Nyquist circle (must be < π)",
                self.xi0
            ));
        }
        Ok(())
    }

    /// Subsampling factor `2^J`.
    pub fn subsampling(&self) -> usize {
        1usize << self.scale_j
    }

    /// Side length `N / 2^J` of the scattering output.
    pub fn output_size(&self) -> usize {
        self.grid_size >> self.scale_j
    }

    pub fn num_band_pass(&self) -> usize {
        self.num_angles * self.scale_j as usize
    }

    /// Output channels per input channel, `1 + |Θ|·J`.
    pub fn channels_per_input(&self) -> usize {
        1 + self.num_band_pass()
    }

    /// Orientation `θ_ℓ = ℓπ/|Θ|`.
    pub fn angle(&self, theta_index: usize) -> f64 {
        theta_index as f64 * PI / self.num_angles as f64
    }

    /// Stable identifier binding coefficients to this configuration and to
    /// the synthesis/normalisation convention.
    pub fn config_hash(&self) -> String {
        let canonical = format!(
            "{CONVENTION_TAG};N={};J={};L={};sigma0={:?};slant={:?};xi0={:?};family={:?}",
            self.grid_size,
            self.scale_j,
            self.num_angles,
            self.sigma0,
            self.slant,
            self.xi0,
            self.family
        );
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

impl Default for FilterBankConfig {
    fn default() -> Self {
        FilterBankConfig {
            grid_size: Self::DEFAULT_GRID_SIZE,
            scale_j: Self::DEFAULT_SCALE_J,
            num_angles: Self::DEFAULT_NUM_ANGLES,
            sigma0: Self::DEFAULT_SIGMA0,
            slant: Self::DEFAULT_SLANT,
            xi0: Self::DEFAULT_XI0,
            family: WaveletFamily::Morlet,
        }
    }
}

/// `N × N` complex samples on the DFT frequency grid, row-major in `(ω₁, ω₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum {
    size: usize,
    values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(size: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::shape(format!("{size}x{size}"), values.len()));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite("spectrum"));
        }
        Ok(ComplexSpectrum { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, k1: usize, k2: usize) -> Complex64 {
        self.values[k1 * self.size + k2]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ComplexSpectrum {
            size: self.size,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// The filter in space, via an inverse DFT.
    pub fn to_spatial(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        Fft2d::new(self.size).inverse(&mut buf);
        buf
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandPassFilter {
    pub j: u32,
    pub theta_index: usize,
    pub theta: f64,
    /// Centre frequency `2^{−j} ξ₀ (cos θ, sin θ)`.
    pub center: [f64; 2],
    pub spectrum: ComplexSpectrum,
}

/// An immutable bank of `|Θ|·J` band-pass filters and one low-pass filter.
///
/// Band-pass filters are ordered by `j` ascending, then `θ` ascending.
#[derive(Clone, Debug)]
pub struct FilterBank {
    config: FilterBankConfig,
    band_pass: Vec<BandPassFilter>,
    low_pass: ComplexSpectrum,
    band_pass_scale: f64,
}

impl FilterBank {
    pub fn config(&self) -> &FilterBankConfig {
        &self.config
    }

    pub fn band_pass(&self) -> &[BandPassFilter] {
        &self.band_pass
    }

    pub fn low_pass(&self) -> &ComplexSpectrum {
        &self.low_pass
    }

    /// Global scalar applied to every band-pass filter by the frame
    /// normalisation.
    pub fn band_pass_scale(&self) -> f64 {
        self.band_pass_scale
    }

    pub fn grid_size(&self) -> usize {
        self.config.grid_size
    }

    pub fn config_hash(&self) -> String {
        self.config.config_hash()
    }

    /// Band-pass filter `(j, θ_index)`.
    pub fn filter(&self, j: u32, theta_index: usize) -> Option<&BandPassFilter> {
        if j >= self.config.scale_j || theta_index >= self.config.num_angles {
            return None;
        }
        self.band_pass
            .get(j as usize * self.config.num_angles + theta_index)
    }

    /// Copy with every filter (band-pass and low-pass) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        FilterBank {
            config: self.config.clone(),
            band_pass: self
                .band_pass
                .iter()
                .map(|f| BandPassFilter {
                    spectrum: f.spectrum.scaled(factor),
                    ..f.clone()
                })
                .collect(),
            low_pass: self.low_pass.scaled(factor),
            band_pass_scale: self.band_pass_scale * factor,
        }
    }

    /// Copy keeping only the low-pass filter.
    pub fn without_band_pass(&self) -> Self {
        FilterBank {
            band_pass: Vec::new(),
            ..self.clone()
        }
    }
}

struct Mother<'a> {
    cfg: &'a FilterBankConfig,
}

impl Mother<'_> {
    fn kappa_exponent(&self, v1: f64, v2: f64) -> f64 {
        -2.0 * self.cfg.sigma0 * self.cfg.sigma0 * (v1 * v1 + v2 * v2)
    }

    /// Periodised Gabor bump and its centred envelope at scale `j`,
    /// orientation `theta`, grid frequency `(w1, w2)`.
    fn band_pass_terms(&self, j: u32, theta: f64, w1: f64, w2: f64) -> (f64, f64) {
        let (sin, cos) = theta.sin_cos();
        let dil = (1u64 << j) as f64;
        let xi = self.cfg.xi0;
        let inv_s = 1.0 / self.cfg.slant;
        let mut gabor = 0.0;
        let mut envelope = 0.0;
        for p in -PERIODISATION_RANGE..=PERIODISATION_RANGE {
            let o1 = w1 + 2.0 * PI * p as f64;
            for q in -PERIODISATION_RANGE..=PERIODISATION_RANGE {
                let o2 = w2 + 2.0 * PI * q as f64;
                let v1 = dil * (cos * o1 + sin * o2);
                let v2 = dil * (-sin * o1 + cos * o2) * inv_s;
                gabor += self.kappa_exponent(v1 - xi, v2).exp();
                envelope += self.kappa_exponent(v1, v2).exp();
            }
        }
        (gabor, envelope)
    }

    fn low_pass(&self, w1: f64, w2: f64) -> f64 {
        let dil = (1u64 << self.cfg.scale_j) as f64;
        let mut acc = 0.0;
        for p in -PERIODISATION_RANGE..=PERIODISATION_RANGE {
            for q in -PERIODISATION_RANGE..=PERIODISATION_RANGE {
                let o1 = dil * (w1 + 2.0 * PI * p as f64);
                let o2 = dil * (w2 + 2.0 * PI * q as f64);
                acc += self.kappa_exponent(o1, o2).exp();
            }
        }
        acc
    }
}

/// Synthesises the filter bank for `config` and applies the frame
/// normalisation (one global band-pass scalar minimising `ε₀` under the
/// conjugate-inclusive convention; `φ̂_J(0) = 1`).
pub fn build_filter_bank(config: &FilterBankConfig) -> Result<FilterBank> {
    config.validate()?;
    let n = config.grid_size;
    let mother = Mother { cfg: config };
    let freqs: Vec<f64> = (0..n).map(|k| angular_frequency(k, n)).collect();

    let mut band_pass = Vec::with_capacity(config.num_band_pass());
    for j in 0..config.scale_j {
        for theta_index in 0..config.num_angles {
            let theta = config.angle(theta_index);
            let mut gabor = Vec::with_capacity(n * n);
            let mut envelope = Vec::with_capacity(n * n);
            for &w1 in &freqs {
                for &w2 in &freqs {
                    let (g, e) = mother.band_pass_terms(j, theta, w1, w2);
                    gabor.push(g);
                    envelope.push(e);
                }
            }
            let values: Vec<Complex64> = match config.family {
                WaveletFamily::Gabor => gabor.iter().map(|&g| Complex64::new(g, 0.0)).collect(),
                WaveletFamily::Morlet => {
                    let beta = gabor[0] / envelope[0];
                    gabor
                        .iter()
                        .zip(&envelope)
                        .map(|(&g, &e)| Complex64::new(g - beta * e, 0.0))
                        .collect()
                }
            };
            let radius = config.xi0 / (1u64 << j) as f64;
            band_pass.push(BandPassFilter {
                j,
                theta_index,
                theta,
                center: [radius * theta.cos(), radius * theta.sin()],
                spectrum: ComplexSpectrum::new(n, values)?,
            });
        }
    }

    let mut low: Vec<f64> = Vec::with_capacity(n * n);
    for &w1 in &freqs {
        for &w2 in &freqs {
            low.push(mother.low_pass(w1, w2));
        }
    }
    let dc = low[0];
    let low_pass = ComplexSpectrum::new(
        n,
        low.iter().map(|&v| Complex64::new(v / dc, 0.0)).collect(),
    )?;

    let mut bank = FilterBank {
        config: config.clone(),
        band_pass,
        low_pass,
        band_pass_scale: 1.0,
    };
    let scale = optimal_band_pass_scale(&bank);
    for f in bank.band_pass.iter_mut() {
        f.spectrum = f.spectrum.scaled(scale);
    }
    bank.band_pass_scale = scale;
    Ok(bank)
}

/// Which filters enter the Littlewood–Paley sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameConvention {
    /// `Σ|ψ̂_{j,θ}(ω)|² + |φ̂_J(ω)|²`, the analytic filters only.
    AnalyticOnly,
    /// Adds the reflected spectra `|ψ̂_{j,θ}(−ω)|²`. This is the energy
    /// relevant to real signals, whose negative frequencies mirror the
    /// positive ones.
    WithConjugates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LittlewoodPaleyReport {
    pub convention: FrameConvention,
    pub epsilon0: f64,
    pub min_energy: f64,
    pub max_energy: f64,
}

/// Per-frequency band-pass energy `Σ|ψ̂_{j,θ}|²` under `convention`.
pub fn band_pass_energy(bank: &FilterBank, convention: FrameConvention) -> Vec<f64> {
    let n = bank.grid_size();
    let mut band = vec![0.0; n * n];
    for f in &bank.band_pass {
        for (acc, v) in band.iter_mut().zip(f.spectrum.values()) {
            *acc += v.norm_sqr();
        }
    }
    match convention {
        FrameConvention::AnalyticOnly => band,
        FrameConvention::WithConjugates => add_reflection(&band, n),
    }
}

/// Per-frequency Littlewood–Paley sum over the whole grid.
pub fn littlewood_paley_sum(bank: &FilterBank, convention: FrameConvention) -> Vec<f64> {
    band_pass_energy(bank, convention)
        .iter()
        .zip(bank.low_pass.values())
        .map(|(b, p)| b + p.norm_sqr())
        .collect()
}

/// Audits the frame energy over the open Nyquist disc `‖ω‖ < π`.
pub fn littlewood_paley(bank: &FilterBank, convention: FrameConvention) -> LittlewoodPaleyReport {
    let n = bank.grid_size();
    let sum = littlewood_paley_sum(bank, convention);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for_each_in_disc(n, |idx| {
        lo = lo.min(sum[idx]);
        hi = hi.max(sum[idx]);
    });
    LittlewoodPaleyReport {
        convention,
        epsilon0: (1.0 - lo).abs().max((1.0 - hi).abs()),
        min_energy: lo,
        max_energy: hi,
    }
}

/// Both conventions, analytic-only first.
pub fn littlewood_paley_both(bank: &FilterBank) -> [LittlewoodPaleyReport; 2] {
    [
        littlewood_paley(bank, FrameConvention::AnalyticOnly),
        littlewood_paley(bank, FrameConvention::WithConjugates),
    ]
}

fn add_reflection(values: &[f64], n: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for k1 in 0..n {
        for k2 in 0..n {
            out[k1 * n + k2] += values[mirror_index(k1, n) * n + mirror_index(k2, n)];
        }
    }
    out
}

fn for_each_in_disc(n: usize, mut f: impl FnMut(usize)) {
    for k1 in 0..n {
        let w1 = angular_frequency(k1, n);
        for k2 in 0..n {
            let w2 = angular_frequency(k2, n);
            if w1 * w1 + w2 * w2 < PI * PI {
                f(k1 * n + k2);
            }
        }
    }
}

/// Golden-section search for the band-pass gain `c` minimising
/// `max |1 − (c²·B(ω) + |φ̂(ω)|²)|` over the disc, where `B` is the
/// conjugate-inclusive band-pass energy. The objective is convex in `c²`.
fn optimal_band_pass_scale(bank: &FilterBank) -> f64 {
    if bank.band_pass.is_empty() {
        return 1.0;
    }
    let n = bank.grid_size();
    let band = band_pass_energy(bank, FrameConvention::WithConjugates);
    let mut pairs = Vec::new();
    for_each_in_disc(n, |idx| {
        pairs.push((band[idx], bank.low_pass.values()[idx].norm_sqr()))
    });
    let max_band = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    if max_band <= 0.0 {
        return 1.0;
    }
    let deviation = |c2: f64| {
        pairs
            .iter()
            .fold(0.0f64, |acc, &(b, l)| acc.max((1.0 - (c2 * b + l)).abs()))
    };
    let (mut a, mut b) = (0.0, 2.0 / max_band);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if deviation(x1) <= deviation(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    (0.5 * (a + b)).sqrt()
}

/// Writes a PNG heatmap of every filter modulus (zero frequency centred) and
/// the raw spectra as a `[filters, N, N, 2]` float64 tensor file
/// (`filters.sct`, last axis = real/imaginary). Returns the written paths.
pub fn dump_filters(bank: &FilterBank, dir: &Path) -> Result<Vec<PathBuf>> {
    use crate::io::{save_tensor, write_png_gray, Tensor};

    std::fs::create_dir_all(dir)?;
    let n = bank.grid_size();
    let mut written = Vec::new();
    let mut raw = Vec::with_capacity((bank.band_pass.len() + 1) * n * n * 2);

    let mut emit = |name: String, spectrum: &ComplexSpectrum| -> Result<()> {
        let peak = spectrum.max_abs().max(f64::MIN_POSITIVE);
        let half = n / 2;
        let mut pixels = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let v = spectrum.get((r + half) % n, (c + half) % n).norm() / peak;
                pixels[r * n + c] = v;
            }
        }
        let path = dir.join(name);
        write_png_gray(&path, n, n, &pixels)?;
        written.push(path);
        for v in spectrum.values() {
            raw.push(v.re);
            raw.push(v.im);
        }
        Ok(())
    };

    for f in &bank.band_pass {
        emit(
            format!("psi_j{}_theta{}.png", f.j, f.theta_index),
            &f.spectrum,
        )?;
    }
    emit(format!("phi_J{}.png", bank.config.scale_j), &bank.low_pass)?;

    let tensor = Tensor::from_f64(vec![bank.band_pass.len() + 1, n, n, 2], raw)?;
    let path = dir.join("filters.sct");
    save_tensor(&tensor, &path)?;
    written.push(path);
    Ok(written)
}
