//! Square 2-D DFTs and the spectral resampling helpers built on them.
//!
//! Conventions: the forward transform is unnormalised,
//! `X[k] = Σ_u x[u] e^{-2πi k·u / n}`, and the inverse carries the `1/n²`
//! factor. Arrays are row-major `n × n`; the first frequency axis (`ω₁`)
//! runs along rows.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward and inverse transforms for one square grid size.
#[derive(Clone)]
pub struct Fft2d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2d").field("n", &self.n).finish()
    }
}

impl Fft2d {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "grid size must be positive");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Fft2d {
            n,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(self.forward.as_ref(), data);
    }

    /// Inverse transform including the `1/n²` normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(self.inverse.as_ref(), data);
        let scale = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Forward transform of a real array.
    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    fn run(&self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not {n}x{n}");
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

/// Signed DFT index of bin `k` on a grid of size `n`, in `[-n/2, n/2)`.
pub fn signed_index(k: usize, n: usize) -> i64 {
    let k = k as i64;
    let n = n as i64;
    if k >= (n + 1) / 2 {
        k - n
    } else {
        k
    }
}

/// Angular frequency of bin `k`, in `[-π, π)`.
pub fn angular_frequency(k: usize, n: usize) -> f64 {
    2.0 * PI * signed_index(k, n) as f64 / n as f64
}

/// Index of the bin holding `-ω` for the bin `k`.
pub fn mirror_index(k: usize, n: usize) -> usize {
    (n - k) % n
}

/// Periodises an `n × n` spectrum onto an `(n/factor)²` grid.
///
/// The result is the spectrum of the signal decimated by `factor` along both
/// axes, with the `1/factor²` amplitude correction already applied.
pub fn fold_spectrum(spectrum: &[Complex64], n: usize, factor: usize) -> Vec<Complex64> {
    assert_eq!(n % factor, 0);
    let m = n / factor;
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    for r in 0..n {
        let row = &spectrum[r * n..(r + 1) * n];
        let dst = &mut out[(r % m) * m..(r % m + 1) * m];
        for (c, v) in row.iter().enumerate() {
            dst[c % m] += *v;
        }
    }
    let scale = 1.0 / (factor * factor) as f64;
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// Adjoint of [`fold_spectrum`] up to the DFT normalisation: tiles an
/// `m × m` spectrum periodically over an `(m·factor)²` grid.
///
/// If `g` is an `m × m` signal with spectrum `G`, the tiled spectrum is the
/// DFT of `g` upsampled by zero insertion.
pub fn tile_spectrum(spectrum: &[Complex64], m: usize, factor: usize) -> Vec<Complex64> {
    let n = m * factor;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        let src = &spectrum[(r % m) * m..(r % m + 1) * m];
        let dst = &mut out[r * n..(r + 1) * n];
        for (c, v) in dst.iter_mut().enumerate() {
            *v = src[c % m];
        }
    }
    out
}
