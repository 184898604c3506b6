use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::image::ImageTensor;
use crate::transform::Scatterer;

/// Peak signal-to-noise ratio in dB for signals with peak value 1.0.
/// Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.check_same_shape(b)?;
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// `err_J = ‖S x̃ − S x‖ / ‖S x‖`.
pub fn relative_err(x_tilde: &ImageTensor, x: &ImageTensor, bank: &FilterBank) -> Result<f64> {
    x_tilde.check_same_shape(x)?;
    let engine = Scatterer::new(bank);
    let sx = engine.scatter(x)?;
    let reference = sx.norm();
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(engine.scatter(x_tilde)?.distance(&sx) / reference)
}
