#![allow(dead_code)]

use std::path::PathBuf;

use num_complex::Complex64;
use rand::Rng;
use scatlite::oracles::BlobSpec;
use scatlite::{io, ImageTensor};

pub const TEST_IMAGES: [&str; 2] = ["astronaut", "coffee"];

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

/// One of the bundled 224 × 224 RGB test images, values in `[0, 1]`.
pub fn test_image(name: &str) -> ImageTensor {
    io::load_image(&data_path(&format!("{name}.png")), 224).expect("bundled test image")
}

pub fn uniform_image<R: Rng>(rng: &mut R, channels: usize, n: usize) -> ImageTensor {
    ImageTensor::from_fn(channels, n, |_, _, _| rng.gen::<f64>())
}

/// Direct `O(N⁴)` circular convolution of a real signal with a complex kernel.
pub fn circular_convolution(x: &[f64], kernel: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for u1 in 0..n {
        for u2 in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for v1 in 0..n {
                for v2 in 0..n {
                    let k = kernel[((u1 + n - v1) % n) * n + (u2 + n - v2) % n];
                    acc += k * x[v1 * n + v2];
                }
            }
            out[u1 * n + u2] = acc;
        }
    }
    out
}

pub fn relative_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// `‖S(x_a) − Sx‖ / ‖Sx‖` for an integer shift.
pub fn translation_sensitivity(x: &ImageTensor, a: (i64, i64), bank: &scatlite::FilterBank) -> f64 {
    let s = scatlite::Scatterer::new(bank);
    let base = s.scatter(x).unwrap();
    let moved = s.scatter(&scatlite::translate(x, a)).unwrap();
    moved.distance(&base) / base.norm()
}

/// Random SPD covariance whose blob neither wraps around the grid nor
/// collapses to a single pixel: eigenvalues log-uniform in `[1, N²/128]`.
pub fn random_blob<R: Rng>(rng: &mut R, n: usize) -> BlobSpec {
    let hi = ((n * n) as f64 / 128.0).ln();
    let mut eig = || rng.gen_range(0.0..hi).exp();
    let (l1, l2) = (eig(), eig());
    BlobSpec::from_eigen(l1, l2, rng.gen_range(0.0..std::f64::consts::PI), n).unwrap()
}
