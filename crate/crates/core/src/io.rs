//! Persistence: PNG images, the `SCT1` tensor format, and JSON reports.
//!
//! `SCT1` layout, all integers little-endian:
//!
//! | bytes          | field                                  |
//! |----------------|----------------------------------------|
//! | 4              | magic `b"SCT1"`                        |
//! | 2              | version (`1`)                          |
//! | 1              | dtype (`0` = f32, `1` = f64)           |
//! | 1              | rank `r`                               |
//! | 4·r            | dims, u32 each                         |
//! | Π dims · size  | payload, row-major                     |
//! | 4              | CRC-32 of the payload                  |
//!
//! Every write goes to a temporary file in the destination directory and is
//! renamed into place, so readers never observe a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::transform::ScatteringCoeffs;

pub const TENSOR_MAGIC: &[u8; 4] = b"SCT1";
pub const TENSOR_VERSION: u16 = 1;
/// Largest element count accepted in a tensor header.
pub const MAX_ELEMENTS: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::F32),
            1 => Ok(DType::F64),
            other => Err(Error::CorruptTensor(format!("unknown dtype code {other}"))),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

/// A dense row-major array as stored in an `SCT1` file.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

fn element_count(dims: &[usize]) -> Result<usize> {
    let mut total: u64 = 1;
    for &d in dims {
        total = total
            .checked_mul(d as u64)
            .filter(|&t| t <= MAX_ELEMENTS)
            .ok_or_else(|| Error::CorruptTensor(format!("dims {dims:?} exceed 2^32 elements")))?;
    }
    usize::try_from(total)
        .map_err(|_| Error::CorruptTensor("tensor too large for this platform".into()))
}

impl Tensor {
    pub fn from_f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::checked(dims, TensorData::F32(data))
    }

    pub fn from_f64(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::checked(dims, TensorData::F64(data))
    }

    fn checked(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::InvalidConfig(format!(
                "dims {dims:?} not representable"
            )));
        }
        let n = element_count(&dims)?;
        let len = match &data {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        };
        if n != len {
            return Err(Error::shape(format!("{n} elements for dims {dims:?}"), len));
        }
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn len(&self) -> usize {
        match &self.data {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut payload = Vec::with_capacity(self.len() * self.dtype().size());
        match &self.data {
            TensorData::F32(v) => v
                .iter()
                .for_each(|x| payload.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v
                .iter()
                .for_each(|x| payload.extend_from_slice(&x.to_le_bytes())),
        }
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + payload.len() + 4);
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
        out.push(self.dtype().code());
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let corrupt = |msg: &str| Error::CorruptTensor(msg.to_string());
        if bytes.len() < 8 {
            return Err(corrupt("file shorter than the header"));
        }
        if &bytes[..4] != TENSOR_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != TENSOR_VERSION {
            return Err(Error::CorruptTensor(format!(
                "unsupported version {version}"
            )));
        }
        let dtype = DType::from_code(bytes[6])?;
        let rank = bytes[7] as usize;
        let header = 8 + 4 * rank;
        if bytes.len() < header {
            return Err(corrupt("truncated dims"));
        }
        let dims: Vec<usize> = bytes[8..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let count = element_count(&dims)?;
        let payload_len = count
            .checked_mul(dtype.size())
            .ok_or_else(|| corrupt("payload size overflows"))?;
        if bytes.len() != header + payload_len + 4 {
            return Err(Error::CorruptTensor(format!(
                "expected {} bytes for dims {dims:?}, found {} (truncated or padded)",
                header + payload_len + 4,
                bytes.len()
            )));
        }
        let payload = &bytes[header..header + payload_len];
        let stored = &bytes[header + payload_len..];
        let stored = u32::from_le_bytes([stored[0], stored[1], stored[2], stored[3]]);
        let actual = crc32fast::hash(payload);
        if stored != actual {
            return Err(Error::CorruptTensor(format!(
                "CRC mismatch: stored {stored:08x}, computed {actual:08x}"
            )));
        }
        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::F64 => TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        Ok(Tensor { dims, data })
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn save_tensor(tensor: &Tensor, path: &Path) -> Result<()> {
    write_atomic(path, &tensor.encode())
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    Tensor::decode(&std::fs::read(path)?)
}

/// Coefficients as a `[channels, M, M]` float32 tensor.
pub fn coeffs_to_tensor(coeffs: &ScatteringCoeffs) -> Tensor {
    let [c, m, _] = coeffs.shape();
    Tensor {
        dims: vec![c, m, m],
        data: TensorData::F32(coeffs.data().iter().map(|&v| v as f32).collect()),
    }
}

/// Rebuilds coefficients from a `[C·(1+|Θ|J), M, M]` tensor. The layout
/// metadata is not stored in the tensor itself and must be supplied.
pub fn coeffs_from_tensor(
    tensor: &Tensor,
    input_channels: usize,
    config_hash: String,
) -> Result<ScatteringCoeffs> {
    let dims = tensor.dims();
    if dims.len() != 3
        || dims[1] != dims[2]
        || input_channels == 0
        || !dims[0].is_multiple_of(input_channels)
    {
        return Err(Error::shape(
            format!("[{input_channels}·k, M, M]"),
            format!("{dims:?}"),
        ));
    }
    ScatteringCoeffs::new(
        input_channels,
        dims[0] / input_channels,
        dims[1],
        tensor.to_f64(),
        config_hash,
    )
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// `foo.sct` → `foo.sct.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Bit depth and colour type from the PNG header.
fn png_header(bytes: &[u8]) -> Option<(u8, u8)> {
    const SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.len() < 26 || &bytes[..8] != SIGNATURE || &bytes[12..16] != b"IHDR" {
        return None;
    }
    Some((bytes[24], bytes[25]))
}

/// Loads an 8- or 16-bit grayscale or RGB PNG as values in `[0, 1]`,
/// centre-cropped to a square and bilinearly resampled to `size × size`.
/// An alpha channel, if present, is discarded.
pub fn load_image(path: &Path, size: usize) -> Result<ImageTensor> {
    let unsupported = |reason: String| Error::UnsupportedImage {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path)?;
    let (depth, color) = png_header(&bytes).ok_or_else(|| unsupported("not a PNG file".into()))?;
    if depth != 8 && depth != 16 {
        return Err(unsupported(format!(
            "{depth}-bit samples; only 8 and 16 are accepted"
        )));
    }
    let channels = match color {
        0 | 4 => 1,
        2 | 6 => 3,
        3 => return Err(unsupported("palette images are not accepted".into())),
        other => return Err(unsupported(format!("PNG colour type {other}"))),
    };
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw: Vec<f64> = match (channels, depth) {
        (1, 8) => img
            .to_luma8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        (1, _) => img
            .to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        (_, 8) => img
            .to_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        _ => img
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
    };
    if w == 0 || h == 0 {
        return Err(unsupported("empty image".into()));
    }
    let side = w.min(h);
    let (r0, c0) = ((h - side) / 2, (w - side) / 2);
    let planes: Vec<Vec<f64>> = (0..channels)
        .map(|ch| {
            let mut plane = Vec::with_capacity(side * side);
            for r in 0..side {
                for c in 0..side {
                    plane.push(raw[((r0 + r) * w + c0 + c) * channels + ch]);
                }
            }
            plane
        })
        .collect();
    let mut data = Vec::with_capacity(channels * size * size);
    for plane in &planes {
        data.extend(resize_bilinear(plane, side, size));
    }
    ImageTensor::new(channels, size, data)
}

/// Bilinear resampling of a square plane with pixel-centre alignment:
/// output pixel `d` samples the source at `(d + ½)·src/dst − ½`, clamped to
/// the border.
pub fn resize_bilinear(plane: &[f64], src: usize, dst: usize) -> Vec<f64> {
    if src == dst {
        return plane.to_vec();
    }
    let scale = src as f64 / dst as f64;
    let coords: Vec<(usize, usize, f64)> = (0..dst)
        .map(|d| {
            let x = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = x.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, x - i0 as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(dst * dst);
    for &(r0, r1, fr) in &coords {
        for &(c0, c1, fc) in &coords {
            let top = plane[r0 * src + c0] * (1.0 - fc) + plane[r0 * src + c1] * fc;
            let bottom = plane[r1 * src + c0] * (1.0 - fc) + plane[r1 * src + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode_png(img: DynamicImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Saves a 1- or 3-channel tensor as an 8-bit PNG, clipping to `[0, 1]`.
pub fn save_image(img: &ImageTensor, path: &Path) -> Result<()> {
    let n = img.size() as u32;
    let len = img.size() * img.size();
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(
                n,
                n,
                img.data().iter().map(|&v| quantize(v)).collect(),
            )
            .expect("buffer sized from tensor"),
        ),
        3 => {
            let mut raw = Vec::with_capacity(3 * len);
            for i in 0..len {
                for c in 0..3 {
                    raw.push(quantize(img.channel(c)[i]));
                }
            }
            DynamicImage::ImageRgb8(
                ImageBuffer::<Rgb<u8>, _>::from_raw(n, n, raw).expect("buffer sized from tensor"),
            )
        }
        c => {
            return Err(Error::InvalidConfig(format!(
                "cannot save a {c}-channel tensor as PNG"
            )))
        }
    };
    write_atomic(path, &encode_png(dynamic)?)
}

/// Saves a row-major `height × width` plane in `[0, 1]` as 8-bit grayscale.
pub fn write_png_gray(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::shape(width * height, values.len()));
    }
    let raw = values.iter().map(|&v| quantize(v)).collect();
    let buffer = ImageBuffer::<Luma<u8>, _>::from_raw(width as u32, height as u32, raw)
        .expect("buffer sized from arguments");
    write_atomic(path, &encode_png(DynamicImage::ImageLuma8(buffer))?)
}
