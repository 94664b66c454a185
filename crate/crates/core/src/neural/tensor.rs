//! Row-major n-dimensional tensor of `f64`.

use serde::{Deserialize, Serialize};

use super::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Result<Tensor, NeuralError> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(NeuralError::ShapeMismatch {
                expected: shape.to_vec(),
                got: vec![values.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Leading dimension (batch size for batched tensors).
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Shape without the leading (batch) dimension.
    pub fn inner_shape(&self) -> &[usize] {
        &self.shape[1..]
    }

    /// Per-sample element count.
    pub fn inner_len(&self) -> usize {
        self.inner_shape().iter().product()
    }

    /// Reinterpret with a new shape of identical element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Tensor, NeuralError> {
        let expected: usize = shape.iter().product();
        if expected != self.values.len() {
            return Err(NeuralError::ShapeMismatch {
                expected: shape.to_vec(),
                got: self.shape.clone(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// New tensor containing the given batch rows, in the given order.
    pub fn gather_batch(&self, indices: &[usize]) -> Tensor {
        let stride = self.inner_len();
        let mut values = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            values.extend_from_slice(&self.values[i * stride..(i + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Tensor { shape, values }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
