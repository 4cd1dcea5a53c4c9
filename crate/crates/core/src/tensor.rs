//! Row-major tensors over `f64`.
//!
//! Deliberately minimal: a shape, a flat buffer, and the handful of
//! accessors the network and attack code need. All heavy lifting happens in
//! layer-specific loops that index the flat buffer directly.

use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

/// Shape/data mismatch raised by tensor and network operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeError {
    pub expected: Vec<usize>,
    pub got: Vec<usize>,
}

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "shape mismatch: expected {:?}, got {:?}", self.expected, self.got)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, checking that `data` fills `shape` exactly.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, ShapeError> {
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(ShapeError { expected: shape, got: vec![data.len()] });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![0.0; len] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// Reinterpret the buffer under a new shape of equal volume.
    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self, ShapeError> {
        let want: usize = shape.iter().product();
        if want != self.data.len() {
            return Err(ShapeError { expected: shape, got: self.shape });
        }
        self.shape = shape;
        Ok(self)
    }

    /// Leading dimension, i.e. the batch size for network inputs/outputs.
    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Row `b` of a 2-D tensor.
    pub fn row(&self, b: usize) -> &[f64] {
        debug_assert_eq!(self.shape.len(), 2);
        let w = self.shape[1];
        &self.data[b * w..(b + 1) * w]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
