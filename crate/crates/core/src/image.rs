use crate::error::{Error, Result};

/// A real-valued `C × N × N` signal, stored channel-major then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    size: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, size: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || size == 0 {
            return Err(Error::shape(
                "non-empty C x N x N",
                format!("{channels}x{size}x{size}"),
            ));
        }
        if data.len() != channels * size * size {
            return Err(Error::shape(
                format!(
                    "{} values ({channels}x{size}x{size})",
                    channels * size * size
                ),
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(ImageTensor {
            channels,
            size,
            data,
        })
    }

    pub fn zeros(channels: usize, size: usize) -> Self {
        ImageTensor {
            channels,
            size,
            data: vec![0.0; channels * size * size],
        }
    }

    /// Builds a tensor from `f(channel, row, col)`.
    pub fn from_fn(
        channels: usize,
        size: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * size * size);
        for c in 0..channels {
            for r in 0..size {
                for col in 0..size {
                    data.push(f(c, r, col));
                }
            }
        }
        ImageTensor {
            channels,
            size,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.size, self.size]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let len = self.size * self.size;
        &self.data[c * len..(c + 1) * len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.size * self.size;
        &mut self.data[c * len..(c + 1) * len]
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.size + row) * self.size + col]
    }

    pub fn set(&mut self, c: usize, row: usize, col: usize, value: f64) {
        self.data[(c * self.size + row) * self.size + col] = value;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &ImageTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        ImageTensor {
            channels: self.channels,
            size: self.size,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &ImageTensor, factor: f64) -> Self {
        ImageTensor {
            channels: self.channels,
            size: self.size,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + factor * b)
                .collect(),
        }
    }

    pub fn clipped(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &ImageTensor) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ))
        }
    }
}
