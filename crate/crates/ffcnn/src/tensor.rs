//! Dense 3-D tensors (height x width x channels) for images and
//! intermediate layer outputs.

use crate::error::{Error, Result};

/// Row-major (height, width, channels) tensor with channel-fastest layout:
/// element (r, c, ch) lives at index `(r * width + c) * channels + ch`.
///
/// Pixel data and layer activations are stored as `f32`; all statistics and
/// fitted parameters downstream are computed in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor3 {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::numeric(format!(
                "tensor data length {} does not match shape {}x{}x{} = {}",
                data.len(),
                height,
                width,
                channels,
                expected
            )));
        }
        Ok(Tensor3 {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, r: usize, c: usize, ch: usize) -> usize {
        (r * self.width + c) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, ch: usize) -> f32 {
        self.data[self.index(r, c, ch)]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, ch: usize, value: f32) {
        let i = self.index(r, c, ch);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Contiguous slice covering (r, c0..c0+ncols, all channels).
    #[inline]
    pub(crate) fn row_span(&self, r: usize, c0: usize, ncols: usize) -> &[f32] {
        let start = self.index(r, c0, 0);
        &self.data[start..start + ncols * self.channels]
    }
}
