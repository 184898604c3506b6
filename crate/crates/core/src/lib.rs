//! First-order wavelet scattering of images.
//!
//! A [`FilterBank`] of Gabor or Morlet wavelets is synthesised in the
//! frequency domain; [`scatter`] maps a `C × N × N` signal to
//! `C·(1 + |Θ|J)` averaged moduli subsampled by `2^J`; [`reconstruct`]
//! inverts that map by gradient descent. The [`oracles`] module holds closed
//! forms used to check the numerics.
//!
//! ```
//! use scatlite::{build_filter_bank, scatter, FilterBankConfig, ImageTensor};
//!
//! let bank = build_filter_bank(&FilterBankConfig::new(32, 2)).unwrap();
//! let x = ImageTensor::from_fn(1, 32, |_, r, c| ((r + c) % 3) as f64 / 2.0);
//! let s = scatter(&x, &bank).unwrap();
//! assert_eq!(s.shape(), [1 + 8 * 2, 8, 8]);
//! ```

pub mod error;
pub mod fft;
pub mod filterbank;
pub mod image;
pub mod io;
pub mod oracles;
pub mod reconstruct;
pub mod transform;

pub use error::{Error, Result};
pub use filterbank::{
    build_filter_bank, dump_filters, littlewood_paley, littlewood_paley_both, FilterBank,
    FilterBankConfig, FrameConvention, LittlewoodPaleyReport, WaveletFamily,
};
pub use image::ImageTensor;
pub use reconstruct::{
    psnr, reconstruct, relative_err, scatter_jvp, scatter_vjp, Init, ReconstructionConfig,
    ReconstructionTrace,
};
pub use transform::{coefficient_count, scatter, translate, Boundary, Scatterer, ScatteringCoeffs};
