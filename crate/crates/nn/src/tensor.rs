//! Batch-major activations of shape `(batch, channels, len)`.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub data: Vec<f64>,
    pub batch: usize,
    pub channels: usize,
    pub len: usize,
}

impl Tensor {
    pub fn zeros(batch: usize, channels: usize, len: usize) -> Self {
        Self {
            data: vec![0.0; batch * channels * len],
            batch,
            channels,
            len,
        }
    }

    pub fn from_vec(data: Vec<f64>, batch: usize, channels: usize, len: usize) -> Result<Self> {
        if data.len() != batch * channels * len {
            return Err(Error::Input(format!(
                "{} values do not fill a {batch}x{channels}x{len} tensor",
                data.len()
            )));
        }
        Ok(Self {
            data,
            batch,
            channels,
            len,
        })
    }

    /// Features per sample (`channels * len`).
    pub fn sample_size(&self) -> usize {
        self.channels * self.len
    }

    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.sample_size();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.sample_size();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.batch == other.batch && self.channels == other.channels && self.len == other.len
    }
}
