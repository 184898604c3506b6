mod common;

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb, Rgba};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatlite::io::{self, Tensor};
use scatlite::Error;

fn save<P: image::Pixel<Subpixel = S> + image::PixelWithColorType, S: image::Primitive>(
    img: &ImageBuffer<P, Vec<S>>,
    path: &Path,
) where
    [S]: image::EncodableLayout,
{
    img.save_with_format(path, image::ImageFormat::Png).unwrap();
}

#[test]
fn white_and_black_images() {
    let dir = tempfile::tempdir().unwrap();
    let white = dir.path().join("white.png");
    let black = dir.path().join("black.png");
    save(
        &ImageBuffer::from_pixel(40, 40, Rgb([255u8, 255, 255])),
        &white,
    );
    save(&ImageBuffer::from_pixel(40, 40, Luma([0u8])), &black);
    let w = io::load_image(&white, 32).unwrap();
    assert_eq!(w.shape(), [3, 32, 32]);
    assert!(w.data().iter().all(|&v| v == 1.0));
    let b = io::load_image(&black, 32).unwrap();
    assert_eq!(b.shape(), [1, 32, 32]);
    assert!(b.data().iter().all(|&v| v == 0.0));
}

#[test]
fn halving_matches_direct_bilinear_reference() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.png");
    let px = |r: u32, c: u32| ((r * 7 + c * 13 + (r * c) % 29) % 256) as u8;
    save(
        &ImageBuffer::from_fn(448, 448, |c, r| Luma([px(r, c)])),
        &path,
    );
    let img = io::load_image(&path, 224).unwrap();
    // Pixel-centre bilinear sampling at half size lands exactly between four
    // source pixels with weights ¼ each.
    for (r, c) in [(0, 0), (5, 17), (100, 3), (223, 223), (111, 200)] {
        let (r2, c2) = (2 * r as u32, 2 * c as u32);
        let sum: f64 = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(dr, dc)| px(r2 + dr, c2 + dc) as f64 / 255.0)
            .sum();
        assert!(
            (img.get(0, r, c) - sum / 4.0).abs() < 1e-12,
            "pixel ({r}, {c})"
        );
    }
}

#[test]
fn non_square_images_are_centre_cropped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wide.png");
    // 48 × 32: columns 8..40 survive the crop.
    save(
        &ImageBuffer::from_fn(48, 32, |c, _| {
            Luma([if (8..40).contains(&c) { 200u8 } else { 0 }])
        }),
        &path,
    );
    let img = io::load_image(&path, 32).unwrap();
    assert!(img
        .data()
        .iter()
        .all(|&v| (v - 200.0 / 255.0).abs() < 1e-12));
}

#[test]
fn sixteen_bit_and_alpha_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let deep = dir.path().join("deep.png");
    save(
        &ImageBuffer::from_pixel(16, 16, Rgb([65535u16, 32768, 1])),
        &deep,
    );
    let img = io::load_image(&deep, 16).unwrap();
    assert_eq!(img.get(0, 3, 3), 1.0);
    assert!((img.get(1, 3, 3) - 32768.0 / 65535.0).abs() < 1e-15);
    assert!((img.get(2, 3, 3) - 1.0 / 65535.0).abs() < 1e-15);

    let rgba = dir.path().join("rgba.png");
    save(
        &ImageBuffer::from_pixel(16, 16, Rgba([10u8, 20, 30, 0])),
        &rgba,
    );
    let img = io::load_image(&rgba, 16).unwrap();
    assert_eq!(img.channels(), 3);
    assert!((img.get(2, 0, 0) - 30.0 / 255.0).abs() < 1e-15);
}

/// A PNG signature and IHDR chunk with the given bit depth and colour type.
fn png_with_header(depth: u8, color: u8) -> Vec<u8> {
    let mut ihdr = b"IHDR".to_vec();
    ihdr.extend(8u32.to_be_bytes());
    ihdr.extend(8u32.to_be_bytes());
    ihdr.extend([depth, color, 0, 0, 0]);
    let mut out = b"\x89PNG\r\n\x1a\n".to_vec();
    out.extend(13u32.to_be_bytes());
    out.extend(&ihdr);
    out.extend(crc32fast::hash(&ihdr).to_be_bytes());
    out
}

#[test]
fn unsupported_images_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("one_bit.png", png_with_header(1, 0)),
        ("four_bit.png", png_with_header(4, 0)),
        ("palette.png", png_with_header(8, 3)),
        ("text.png", b"definitely not an image".to_vec()),
    ];
    for (name, bytes) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, bytes).unwrap();
        let err = io::load_image(&path, 8).unwrap_err();
        assert!(
            matches!(err, Error::UnsupportedImage { .. }),
            "{name}: {err}"
        );
    }
    let missing = io::load_image(&dir.path().join("absent.png"), 8).unwrap_err();
    assert!(matches!(missing, Error::Io(_)));
}

#[test]
fn scattering_sized_tensor_round_trips_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    let data: Vec<f32> = (0..75 * 28 * 28)
        .map(|_| rng.gen_range(-1e3f32..1e3))
        .collect();
    let t = Tensor::from_f32(vec![75, 28, 28], data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.sct");
    io::save_tensor(&t, &path).unwrap();
    let back = io::load_tensor(&path).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.encode(), t.encode());
}

#[test]
fn every_truncation_and_payload_flip_is_detected() {
    let t = Tensor::from_f64(vec![3, 4], (0..12).map(|v| v as f64 * 0.37).collect()).unwrap();
    let bytes = t.encode();
    for len in 0..bytes.len() {
        assert!(
            matches!(Tensor::decode(&bytes[..len]), Err(Error::CorruptTensor(_))),
            "length {len}"
        );
    }
    for i in 0..bytes.len() {
        for bit in [0x01u8, 0x80] {
            let mut bad = bytes.clone();
            bad[i] ^= bit;
            assert!(Tensor::decode(&bad).is_err(), "flip at byte {i}");
        }
    }
}

#[test]
fn oversized_dims_are_rejected_before_allocation() {
    let mut header = b"SCT1".to_vec();
    header.extend(1u16.to_le_bytes());
    header.extend([0u8, 3]);
    for d in [65536u32, 65536, 2] {
        header.extend(d.to_le_bytes());
    }
    let err = Tensor::decode(&header).unwrap_err();
    assert!(
        err.to_string().contains("2^32") || err.to_string().contains("large"),
        "{err}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensors_round_trip(dims in prop::collection::vec(1usize..6, 0..4), seed in any::<u64>(), wide in any::<bool>()) {
        let n: usize = dims.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = if wide {
            Tensor::from_f64(dims, (0..n).map(|_| rng.gen::<f64>() * 1e6 - 5e5).collect()).unwrap()
        } else {
            Tensor::from_f32(dims, (0..n).map(|_| rng.gen::<f32>()).collect()).unwrap()
        };
        let back = Tensor::decode(&t.encode()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn any_single_payload_byte_corruption_is_caught(seed in any::<u64>(), pick in any::<prop::sample::Index>(), flip in 1u8..=255) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Tensor::from_f32(vec![5, 7], (0..35).map(|_| rng.gen::<f32>()).collect()).unwrap();
        let mut bytes = t.encode();
        let i = pick.index(bytes.len());
        bytes[i] ^= flip;
        prop_assert!(Tensor::decode(&bytes).is_err());
    }
}

#[test]
fn coefficient_tensors_carry_their_bank() {
    let bank = scatlite::build_filter_bank(&scatlite::FilterBankConfig::new(32, 2)).unwrap();
    let x = common::uniform_image(&mut ChaCha8Rng::seed_from_u64(1), 2, 32);
    let s = scatlite::scatter(&x, &bank).unwrap();
    let t = io::coeffs_to_tensor(&s);
    assert_eq!(t.dims(), &[34, 8, 8]);
    let back = io::coeffs_from_tensor(&t, 2, bank.config_hash()).unwrap();
    assert_eq!(back.shape(), s.shape());
    for (a, b) in back.data().iter().zip(s.data()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    assert!(io::coeffs_from_tensor(&t, 3, bank.config_hash()).is_err());
}
