//! Mini-batch SGD with classical momentum.

use serde::{Deserialize, Serialize};

use super::layers::LayerGrads;
use super::network::{one_hot, Network};
use super::tensor::Tensor;
use super::NeuralError;
use crate::rng::Rng64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.001,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs < 1 {
            return Err(NeuralError::InvalidParameter("epochs must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(NeuralError::InvalidParameter(format!(
                "learning_rate must be a finite nonnegative real, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NeuralError::InvalidParameter(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size < 1 {
            return Err(NeuralError::InvalidParameter(
                "batch_size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Run exactly `cfg.epochs` epochs of mini-batch SGD with classical
/// momentum (`v = m*v - lr*g; w += v`), shuffling batch order per epoch
/// with a seeded generator. Returns the trained network and the per-epoch
/// mean loss trace. Deterministic for a fixed `(seed, data, cfg)`.
pub fn train_network(
    mut net: Network,
    inputs: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(Network, Vec<f64>), NeuralError> {
    cfg.validate()?;
    if inputs.batch() == 0 {
        return Err(NeuralError::InvalidParameter(
            "at least one sample is required".into(),
        ));
    }
    if inputs.batch() != labels.len() {
        return Err(NeuralError::ShapeMismatch {
            expected: vec![inputs.batch()],
            got: vec![labels.len()],
        });
    }
    let targets = one_hot(labels, net.class_count)?;
    let n = inputs.batch();

    // momentum buffers, one velocity per parameter, in params_flat order
    let mut velocity = vec![0.0; net.param_count()];

    let mut rng = Rng64::derive(cfg.seed, "epoch-shuffle");
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = inputs.gather_batch(chunk);
            let batch_targets = targets.gather_batch(chunk);
            let (loss, grads) = net.loss_and_gradients(&batch, &batch_targets)?;
            if !loss.is_finite() {
                return Err(NeuralError::NonFiniteLoss { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;
            apply_momentum_step(&mut net, &grads, &mut velocity, cfg);
        }
        trace.push(epoch_loss / n as f64);
    }
    Ok((net, trace))
}

fn apply_momentum_step(
    net: &mut Network,
    grads: &[LayerGrads],
    velocity: &mut [f64],
    cfg: &TrainConfig,
) {
    let mut offset = 0;
    for (layer, layer_grads) in net.layers.iter_mut().zip(grads) {
        let params = layer.param_blocks_mut();
        let grad_blocks = layer_grads.blocks();
        debug_assert_eq!(params.len(), grad_blocks.len());
        for (block, grad) in params.into_iter().zip(grad_blocks) {
            let vel = &mut velocity[offset..offset + block.len()];
            for ((w, &g), v) in block.iter_mut().zip(grad).zip(vel.iter_mut()) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *w += *v;
            }
            offset += block.len();
        }
    }
}
