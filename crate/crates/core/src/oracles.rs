//! Closed-form checks of the scattering numerics.
//!
//! * Gaussian blobs `x̂_Σ(ω) = e^{−ωᵀΣω}`: for a Gabor filter the band-pass
//!   response of a blob is again a modulated Gaussian, so its modulus can be
//!   written without any modulus at all and every scattering channel has a
//!   closed-form spectrum.
//! * Translation stability: `‖x_a ⋆ ψ − e^{−iω_cᵀa} x ⋆ ψ‖` is bounded by
//!   `‖x‖·√(4ε² + ‖a‖²η²·p²)` where `η` is the radius around the centre
//!   frequency `ω_c` outside of which `|ψ̂| ≤ ε`, and `p = max(1, max|ψ̂|)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::{angular_frequency, Fft2d};
use crate::filterbank::{FilterBank, WaveletFamily, PERIODISATION_RANGE};
use crate::image::ImageTensor;
use crate::transform::{Scatterer, ScatteringCoeffs};

/// Fraction of the peak above which a blob is considered to wrap around the
/// periodic grid.
pub const ALIASING_THRESHOLD: f64 = 0.01;

/// A Gaussian blob `x̂_Σ(ω) = e^{−ωᵀΣω}` on an `N × N` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    /// Symmetric positive-semidefinite `Σ`, indexed `[row][col]`.
    pub sigma: [[f64; 2]; 2],
    pub grid_size: usize,
}

impl BlobSpec {
    pub fn new(sigma: [[f64; 2]; 2], grid_size: usize) -> Result<Self> {
        let spec = BlobSpec { sigma, grid_size };
        spec.validate()?;
        Ok(spec)
    }

    /// `Σ = R(angle) diag(λ₁, λ₂) R(angle)ᵀ`.
    pub fn from_eigen(lambda1: f64, lambda2: f64, angle: f64, grid_size: usize) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let a = lambda1 * c * c + lambda2 * s * s;
        let d = lambda1 * s * s + lambda2 * c * c;
        let b = (lambda1 - lambda2) * c * s;
        Self::new([[a, b], [b, d]], grid_size)
    }

    pub fn validate(&self) -> Result<()> {
        let [[a, b], [c, d]] = self.sigma;
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("blob covariance"));
        }
        if (b - c).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "Σ is not symmetric: {b} vs {c}"
            )));
        }
        let [l1, l2] = self.eigenvalues();
        let tol = 1e-12 * l1.abs().max(1.0);
        if l2 < -tol {
            return Err(Error::InvalidConfig(format!(
                "Σ must be positive semidefinite (eigenvalues {l1}, {l2})"
            )));
        }
        if self.grid_size < 2 || !self.grid_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(
                "blob grid size must be even and ≥ 2".into(),
            ));
        }
        Ok(())
    }

    /// Eigenvalues, largest first.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.sigma;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean + radius, mean - radius]
    }

    fn quadratic(&self, w1: f64, w2: f64) -> f64 {
        let [[a, b], [_, d]] = self.sigma;
        a * w1 * w1 + 2.0 * b * w1 * w2 + d * w2 * w2
    }
}

/// Spectrum of the blob centred at pixel `(N/2, N/2)`, periodised like the
/// filters. The centring factor `e^{−iω·(N/2, N/2)} = (−1)^{k₁+k₂}` is real.
fn blob_spectrum(spec: &BlobSpec) -> Vec<Complex64> {
    let n = spec.grid_size;
    let mut out = Vec::with_capacity(n * n);
    for k1 in 0..n {
        let w1 = angular_frequency(k1, n);
        for k2 in 0..n {
            let w2 = angular_frequency(k2, n);
            let v = periodised(|o1, o2| (-spec.quadratic(o1, o2)).exp(), w1, w2);
            let sign = if (k1 + k2) % 2 == 0 { 1.0 } else { -1.0 };
            out.push(Complex64::new(sign * v, 0.0));
        }
    }
    out
}

fn periodised(f: impl Fn(f64, f64) -> f64, w1: f64, w2: f64) -> f64 {
    let mut acc = 0.0;
    for p in -PERIODISATION_RANGE..=PERIODISATION_RANGE {
        for q in -PERIODISATION_RANGE..=PERIODISATION_RANGE {
            acc += f(w1 + 2.0 * PI * p as f64, w2 + 2.0 * PI * q as f64);
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct BlobSignal {
    /// Single-channel blob with peak value 1 at pixel `(N/2, N/2)`.
    pub image: ImageTensor,
    /// Largest `|x|` on the grid border relative to the peak: how much the
    /// blob wraps across the periodic boundary.
    pub border_ratio: f64,
    /// Largest `e^{−ωᵀΣω}` on the Nyquist lines: how much the spectrum is
    /// truncated by the sampling grid.
    pub nyquist_ratio: f64,
    /// Either ratio exceeds [`ALIASING_THRESHOLD`].
    pub aliasing_warning: bool,
    /// `Σ` is rank-deficient. Rank 1 gives a line; `Σ = 0` gives a discrete
    /// delta (flat spectrum), not a constant image.
    pub degenerate: bool,
}

/// Synthesises `x_Σ` by inverse DFT of its sampled spectrum.
pub fn blob_signal(spec: &BlobSpec) -> Result<BlobSignal> {
    spec.validate()?;
    let n = spec.grid_size;
    let mut buf = blob_spectrum(spec);
    let nyquist_ratio = (0..n)
        .map(|k| {
            let w = angular_frequency(k, n);
            (-spec.quadratic(-PI, w))
                .exp()
                .max((-spec.quadratic(w, -PI)).exp())
        })
        .fold(0.0, f64::max);
    Fft2d::new(n).inverse(&mut buf);
    let peak = buf.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::NonFinite("blob peak"));
    }
    let data: Vec<f64> = buf.iter().map(|v| v.re / peak).collect();
    let border_ratio = (0..n)
        .map(|k| data[k].abs().max(data[k * n].abs()))
        .fold(0.0, f64::max);
    let [l1, l2] = spec.eigenvalues();
    Ok(BlobSignal {
        image: ImageTensor::new(1, n, data)?,
        border_ratio,
        nyquist_ratio,
        aliasing_warning: border_ratio > ALIASING_THRESHOLD || nyquist_ratio > ALIASING_THRESHOLD,
        degenerate: l2 <= 1e-12 * l1.max(1e-300),
    })
}

/// Quadratic form `Q` with `|ψ_{j,θ}|^(ω) = c·e^{−ωᵀQω}` for a Gabor filter,
/// as `[q11, q12, q22]`.
fn modulus_form(bank: &FilterBank, j: u32, theta: f64) -> [f64; 3] {
    let cfg = bank.config();
    let (s, c) = theta.sin_cos();
    let d = (1u64 << j) as f64;
    let k = 2.0 * cfg.sigma0 * cfg.sigma0 * d * d;
    let inv_s2 = 1.0 / (cfg.slant * cfg.slant);
    // rows of the rotation are (c, s) and (−s, c); the second is scaled by 1/slant
    [
        k * (c * c + s * s * inv_s2),
        k * (c * s - s * c * inv_s2),
        k * (s * s + c * c * inv_s2),
    ]
}

/// `e^{−ω_cᵀ P (Σ + P)⁻¹ Σ ω_c}`: the peak of `x̂_Σ · ψ̂` for a filter
/// `e^{−(ω−ω_c)ᵀP(ω−ω_c)}`, which is the factor relating `|x_Σ ⋆ ψ|` to
/// `x_Σ ⋆ |ψ|`.
fn response_amplitude(sigma: [[f64; 2]; 2], p: [f64; 3], center: [f64; 2]) -> f64 {
    let [[s11, s12], [_, s22]] = sigma;
    let [p11, p12, p22] = p;
    let (a11, a12, a22) = (s11 + p11, s12 + p12, s22 + p22);
    let det = a11 * a22 - a12 * a12;
    // (Σ + P)⁻¹ Σ ω_c
    let sc = [
        s11 * center[0] + s12 * center[1],
        s12 * center[0] + s22 * center[1],
    ];
    let v = [
        (a22 * sc[0] - a12 * sc[1]) / det,
        (a11 * sc[1] - a12 * sc[0]) / det,
    ];
    let pc = [
        p11 * center[0] + p12 * center[1],
        p12 * center[0] + p22 * center[1],
    ];
    (-(pc[0] * v[0] + pc[1] * v[1])).exp()
}

/// Closed-form scattering of `x_Σ` for a Gabor bank: channel `(j, θ)` is
/// `A_{j,θ} · x_Σ ⋆ |ψ_{j,θ}| ⋆ φ_J` with `|ψ_{j,θ}|` taken from its Gaussian
/// envelope and `A_{j,θ}` the response amplitude, then subsampled exactly as
/// [`crate::transform::scatter`] does. Up to the periodisation of the
/// continuous Gaussians, channels agree with the numeric transform in
/// amplitude as well as shape.
pub fn analytic_blob_scatter(spec: &BlobSpec, bank: &FilterBank) -> Result<ScatteringCoeffs> {
    spec.validate()?;
    if bank.config().family != WaveletFamily::Gabor {
        return Err(Error::Precondition(
            "analytic blob scattering requires a Gabor bank: the Morlet correction \
             term breaks the Gaussian-envelope identity"
                .into(),
        ));
    }
    let n = bank.grid_size();
    if spec.grid_size != n {
        return Err(Error::shape(format!("blob grid {n}"), spec.grid_size));
    }
    let engine = Scatterer::new(bank);
    let blob = blob_spectrum(spec);
    let freqs: Vec<f64> = (0..n).map(|k| angular_frequency(k, n)).collect();
    let scale = bank.band_pass_scale();

    let mut out = ScatteringCoeffs::zeros_like_bank(bank, 1);
    let len = out.size() * out.size();
    out.channel_mut(0)
        .copy_from_slice(&engine.average_and_subsample(&blob));
    for (k, f) in bank.band_pass().iter().enumerate() {
        let [q11, q12, q22] = modulus_form(bank, f.j, f.theta);
        let gain = scale * response_amplitude(spec.sigma, [q11, q12, q22], f.center);
        let mut spectrum = Vec::with_capacity(n * n);
        for (idx, &w1) in freqs.iter().enumerate() {
            for (jdx, &w2) in freqs.iter().enumerate() {
                let env = periodised(
                    |o1, o2| (-(q11 * o1 * o1 + 2.0 * q12 * o1 * o2 + q22 * o2 * o2)).exp(),
                    w1,
                    w2,
                );
                spectrum.push(blob[idx * n + jdx] * (gain * env));
            }
        }
        let coarse = engine.average_and_subsample(&spectrum);
        out.data_mut()[(k + 1) * len..(k + 2) * len].copy_from_slice(&coarse);
    }
    Ok(out)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 && nb == 0.0 {
        return 1.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Cosine similarity of every channel pair.
pub fn per_channel_cosine(a: &ScatteringCoeffs, b: &ScatteringCoeffs) -> Result<Vec<f64>> {
    a.check_layout(b)?;
    Ok((0..a.channels())
        .map(|k| cosine_similarity(a.channel(k), b.channel(k)))
        .collect())
}

/// Least-squares scalar `λ` minimising `‖a − λ b‖`.
pub fn best_scale(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let bb: f64 = b.iter().map(|y| y * y).sum();
    if bb == 0.0 {
        0.0
    } else {
        ab / bb
    }
}

/// One numeric-versus-analytic blob comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlobComparison {
    pub sigma: [[f64; 2]; 2],
    pub grid_size: usize,
    pub cosine: Vec<f64>,
    pub min_cosine: f64,
    /// Per-channel least-squares factor mapping analytic onto numeric.
    pub scale: Vec<f64>,
    pub aliasing_warning: bool,
    pub degenerate: bool,
}

/// Runs `scatter(blob_signal(spec))` against [`analytic_blob_scatter`].
/// Returns the comparison together with both coefficient sets
/// (numeric, analytic).
pub fn compare_blob(
    spec: &BlobSpec,
    bank: &FilterBank,
) -> Result<(BlobComparison, ScatteringCoeffs, ScatteringCoeffs)> {
    let signal = blob_signal(spec)?;
    let analytic = analytic_blob_scatter(spec, bank)?;
    let numeric = Scatterer::new(bank).scatter(&signal.image)?;
    let cosine = per_channel_cosine(&numeric, &analytic)?;
    let scale = (0..numeric.channels())
        .map(|k| best_scale(numeric.channel(k), analytic.channel(k)))
        .collect();
    let report = BlobComparison {
        sigma: spec.sigma,
        grid_size: spec.grid_size,
        min_cosine: cosine.iter().cloned().fold(f64::INFINITY, f64::min),
        cosine,
        scale,
        aliasing_warning: signal.aliasing_warning,
        degenerate: signal.degenerate,
    };
    Ok((report, numeric, analytic))
}

/// Outcome of one translation-stability check for a single filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `‖x_a ⋆ ψ − e^{−iω_cᵀa} x ⋆ ψ‖`.
    pub lhs: f64,
    /// `‖x‖·√(4ε² + ‖a‖²η²·p²)`.
    pub rhs: f64,
    /// Measured radius `η` around `ω_c` on this filter's grid.
    pub eta0: f64,
    /// `η` rescaled to the mother wavelet, `2^j η`.
    pub eta0_mother: f64,
    /// Largest `|ψ̂|` outside the ball of radius `η`; at most `tail_eps`.
    pub epsilon: f64,
    /// `p = max(1, max|ψ̂|)`.
    pub peak: f64,
    pub x_norm: f64,
    pub shift: [f64; 2],
    pub j: u32,
    pub theta_index: usize,
    pub tail_eps: f64,
    pub holds: bool,
}

/// Measures `(η, ε, max|ψ̂|)` for one filter: `η` is the largest distance
/// from `center` of a grid frequency with `|ψ̂| > tail_eps`. With
/// `periodic` the distance is taken on the frequency torus, which is valid
/// for integer shifts only (`e^{−iωᵀa}` is then `2π`-periodic).
pub fn filter_tail(
    spectrum: &[Complex64],
    n: usize,
    center: [f64; 2],
    tail_eps: f64,
    periodic: bool,
) -> (f64, f64, f64) {
    let gap = |w: f64, c: f64| {
        let d = w - c;
        if periodic {
            d - 2.0 * PI * (d / (2.0 * PI)).round()
        } else {
            d
        }
    };
    let mut dist = Vec::with_capacity(n * n);
    let mut eta: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for k1 in 0..n {
        let w1 = angular_frequency(k1, n);
        for k2 in 0..n {
            let w2 = angular_frequency(k2, n);
            let d = gap(w1, center[0]).hypot(gap(w2, center[1]));
            let m = spectrum[k1 * n + k2].norm();
            peak = peak.max(m);
            if m > tail_eps {
                eta = eta.max(d);
            }
            dist.push((d, m));
        }
    }
    let epsilon = dist
        .iter()
        .filter(|(d, _)| *d > eta)
        .map(|(_, m)| *m)
        .fold(0.0, f64::max);
    (eta, epsilon, peak)
}

/// Candidate tail thresholds, tried in increasing order by
/// [`admissible_tail_eps`].
pub const TAIL_EPS_LADDER: [f64; 8] = [1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3, 0.5];

/// Smallest value of [`TAIL_EPS_LADDER`] below the filter peak whose radius
/// `η` stays within `π` for filter `(j, θ)`, or `None` if none qualifies.
pub fn admissible_tail_eps(
    bank: &FilterBank,
    j: u32,
    theta_index: usize,
    integer_shift: bool,
) -> Option<f64> {
    let f = bank.filter(j, theta_index)?;
    let peak = f.spectrum.max_abs();
    TAIL_EPS_LADDER
        .iter()
        .copied()
        .take_while(|&t| t < peak)
        .find(|&t| {
            filter_tail(
                f.spectrum.values(),
                bank.grid_size(),
                f.center,
                t,
                integer_shift,
            )
            .0 <= PI
        })
}

/// Compares `x_a ⋆ ψ_{j,θ}` with the phase-corrected `x ⋆ ψ_{j,θ}` for a
/// shift `a = (rows, cols)` applied as an exact spectral phase, so
/// fractional shifts are allowed. Multi-channel inputs are measured jointly.
///
/// `η` is measured on the frequency torus for integer shifts and in the
/// centred frequency square otherwise; both make the bound provable on the
/// sampled system.
pub fn translation_bound_check(
    x: &ImageTensor,
    a: [f64; 2],
    bank: &FilterBank,
    j: u32,
    theta_index: usize,
    tail_eps: f64,
) -> Result<StabilityReport> {
    let n = bank.grid_size();
    if x.size() != n {
        return Err(Error::shape(n, x.size()));
    }
    if tail_eps.is_nan() || tail_eps <= 0.0 || !a.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig(
            "tail_eps must be positive and the shift finite".into(),
        ));
    }
    let filter = bank.filter(j, theta_index).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "no band-pass filter (j = {j}, θ index = {theta_index})"
        ))
    })?;
    let spectrum = filter.spectrum.values();
    let integer_shift = a.iter().all(|v| v.fract() == 0.0);
    let (eta, epsilon, max_abs) = filter_tail(spectrum, n, filter.center, tail_eps, integer_shift);
    if eta > PI {
        return Err(Error::Precondition(format!(
            "tail_eps = {tail_eps} leaves |ψ̂| above the threshold {eta:.3} rad from the centre \
             frequency, outside the Nyquist disc; use a larger tail_eps"
        )));
    }

    let fft = Fft2d::new(n);
    let freqs: Vec<f64> = (0..n).map(|k| angular_frequency(k, n)).collect();
    let center_phase =
        Complex64::from_polar(1.0, -(filter.center[0] * a[0] + filter.center[1] * a[1]));
    let mut lhs2 = 0.0;
    for c in 0..x.channels() {
        let x_hat = fft.forward_real(x.channel(c));
        let mut shifted = Vec::with_capacity(n * n);
        let mut plain = Vec::with_capacity(n * n);
        for (k1, &w1) in freqs.iter().enumerate() {
            for (k2, &w2) in freqs.iter().enumerate() {
                let idx = k1 * n + k2;
                let v = x_hat[idx] * spectrum[idx];
                shifted.push(v * Complex64::from_polar(1.0, -(w1 * a[0] + w2 * a[1])));
                plain.push(v);
            }
        }
        fft.inverse(&mut shifted);
        fft.inverse(&mut plain);
        lhs2 += shifted
            .iter()
            .zip(&plain)
            .map(|(s, p)| (s - center_phase * p).norm_sqr())
            .sum::<f64>();
    }

    let x_norm = x.norm();
    let shift_norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
    let peak = max_abs.max(1.0);
    let lhs = lhs2.sqrt();
    let rhs = x_norm * (4.0 * epsilon * epsilon + (shift_norm * eta * peak).powi(2)).sqrt();
    Ok(StabilityReport {
        lhs,
        rhs,
        eta0: eta,
        eta0_mother: eta * (1u64 << j) as f64,
        epsilon,
        peak,
        x_norm,
        shift: a,
        j,
        theta_index,
        tail_eps,
        holds: lhs <= rhs,
    })
}

/// One random translation-stability trial: uniform-noise signal, random
/// filter `(j, θ)`, and a shift of norm at most `amax` that is integer or
/// fractional with equal probability. `tail_eps` is chosen by
/// [`admissible_tail_eps`]; filters admitting none are redrawn.
pub fn random_stability_trial<R: Rng>(
    bank: &FilterBank,
    rng: &mut R,
    amax: f64,
) -> Result<StabilityReport> {
    let cfg = bank.config();
    if !(amax > 0.0 && amax.is_finite()) {
        return Err(Error::InvalidConfig("shift bound must be positive".into()));
    }
    for _ in 0..1000 {
        let j = rng.gen_range(0..cfg.scale_j);
        let theta_index = rng.gen_range(0..cfg.num_angles);
        let integer = amax >= 1.0 && rng.gen_bool(0.5);
        let a = if integer {
            let r = amax.floor() as i64;
            loop {
                let a = [rng.gen_range(-r..=r) as f64, rng.gen_range(-r..=r) as f64];
                if a[0].hypot(a[1]) <= amax {
                    break a;
                }
            }
        } else {
            let radius = amax * (1.0 - rng.gen::<f64>());
            let angle = rng.gen_range(0.0..2.0 * PI);
            [radius * angle.cos(), radius * angle.sin()]
        };
        let Some(tail_eps) = admissible_tail_eps(bank, j, theta_index, integer) else {
            continue;
        };
        let amplitude = rng.gen_range(0.1..10.0);
        let x = ImageTensor::from_fn(1, bank.grid_size(), |_, _, _| amplitude * rng.gen::<f64>());
        return translation_bound_check(&x, a, bank, j, theta_index, tail_eps);
    }
    Err(Error::Precondition(
        "no filter in this bank admits a tail threshold inside the Nyquist disc".into(),
    ))
}
