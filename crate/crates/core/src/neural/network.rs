//! Network container: forward passes, fused softmax/cross-entropy loss,
//! flat parameter access and versioned JSON serialization.

use serde::{Deserialize, Serialize};

use super::layers::{softmax_rows, Layer, LayerCache, LayerGrads};
use super::tensor::Tensor;
use super::NeuralError;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Probabilities are floored here before the log in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub format_version: u32,
    /// Per-sample input shape (batch dimension excluded).
    pub input_shape: Vec<usize>,
    pub class_count: usize,
    /// Seed the parameters were initialized from.
    pub rng_seed: u64,
    pub layers: Vec<Layer>,
}

impl Network {
    /// Validate that layer shapes compose from `input_shape` to a softmax
    /// over `class_count` units. Builders call this before returning.
    pub fn check_shapes(&self) -> Result<(), NeuralError> {
        let mut shape = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.output_shape(&shape).ok_or_else(|| NeuralError::ShapeMismatch {
                expected: shape.clone(),
                got: vec![i],
            })?;
        }
        if shape != vec![self.class_count] {
            return Err(NeuralError::ShapeMismatch {
                expected: vec![self.class_count],
                got: shape,
            });
        }
        if !matches!(self.layers.last(), Some(Layer::Softmax)) {
            return Err(NeuralError::InvalidParameter(
                "output layer must be softmax".into(),
            ));
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<(), NeuralError> {
        if batch.inner_shape() != self.input_shape.as_slice() || batch.batch() == 0 {
            return Err(NeuralError::ShapeMismatch {
                expected: self.input_shape.clone(),
                got: batch.inner_shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Inference: probabilities, one row per sample, rows summing to 1.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor, NeuralError> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    /// Mean categorical cross-entropy and parameter gradients, one
    /// [`LayerGrads`] per layer. The softmax output layer is fused with the
    /// loss: the logit gradient is `(p - y) / batch`.
    pub fn loss_and_gradients(
        &self,
        batch: &Tensor,
        one_hot: &Tensor,
    ) -> Result<(f64, Vec<LayerGrads>), NeuralError> {
        self.check_batch(batch)?;
        let b = batch.batch();
        if one_hot.shape != [b, self.class_count] {
            return Err(NeuralError::ShapeMismatch {
                expected: vec![b, self.class_count],
                got: one_hot.shape.clone(),
            });
        }
        let body = &self.layers[..self.layers.len() - 1];
        let mut caches = Vec::with_capacity(body.len());
        let mut x = batch.clone();
        for layer in body {
            let (out, cache) = layer.forward_train(&x);
            caches.push(cache);
            x = out;
        }
        let probs = softmax_rows(&x);
        let k = self.class_count;
        let mut loss = 0.0;
        let mut grad = vec![0.0; b * k];
        for i in 0..b {
            for j in 0..k {
                let p = probs.values[i * k + j];
                let y = one_hot.values[i * k + j];
                if y != 0.0 {
                    loss -= y * p.max(PROB_FLOOR).ln();
                }
                grad[i * k + j] = (p - y) / b as f64;
            }
        }
        loss /= b as f64;
        let mut grad_t = Tensor {
            shape: vec![b, k],
            values: grad,
        };
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        grads.push(LayerGrads::None); // the fused softmax layer
        for (layer, cache) in body.iter().zip(&caches).rev() {
            let (dx, g) = layer.backward(cache, &grad_t);
            grads.push(g);
            grad_t = dx;
        }
        grads.reverse();
        Ok((loss, grads))
    }

    /// Argmax class per sample; exact ties resolve to the smallest index.
    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>, NeuralError> {
        let probs = self.forward(batch)?;
        let k = self.class_count;
        Ok((0..probs.batch())
            .map(|i| {
                let row = &probs.values[i * k..(i + 1) * k];
                let mut best = 0usize;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.param_blocks())
            .map(|b| b.len())
            .sum()
    }

    /// All parameters in a fixed documented order: layer order, and within
    /// a layer each block (weights then bias, sub-layers in order).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for block in layer.param_blocks() {
                out.extend_from_slice(block);
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.param_count() {
            return Err(NeuralError::ShapeMismatch {
                expected: vec![self.param_count()],
                got: vec![params.len()],
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for block in layer.param_blocks_mut() {
                block.copy_from_slice(&params[offset..offset + block.len()]);
                offset += block.len();
            }
        }
        Ok(())
    }

    /// Flatten gradients in the same order as [`Network::params_flat`].
    pub fn grads_flat(&self, grads: &[LayerGrads]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for g in grads {
            for block in g.blocks() {
                out.extend_from_slice(block);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Network, NeuralError> {
        let net: Network = serde_json::from_str(text)
            .map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
        if net.format_version != NETWORK_FORMAT_VERSION {
            return Err(NeuralError::BadModelFile(format!(
                "unsupported format_version {} (expected {})",
                net.format_version, NETWORK_FORMAT_VERSION
            )));
        }
        net.check_shapes()?;
        Ok(net)
    }
}

/// One-hot encode labels into a `[batch, class_count]` tensor.
pub fn one_hot(labels: &[usize], class_count: usize) -> Result<Tensor, NeuralError> {
    let mut values = vec![0.0; labels.len() * class_count];
    for (i, &l) in labels.iter().enumerate() {
        if l >= class_count {
            return Err(NeuralError::InvalidParameter(format!(
                "label {l} out of range for {class_count} classes"
            )));
        }
        values[i * class_count + l] = 1.0;
    }
    Ok(Tensor {
        shape: vec![labels.len(), class_count],
        values,
    })
}
