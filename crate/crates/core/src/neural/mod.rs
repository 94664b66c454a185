//! Minimal deterministic neural-network engine.
//!
//! Tensors are plain row-major `f64` arrays; every layer's backward pass is
//! written by hand and checked against central finite differences. Weight
//! init (He-uniform before ReLU, Glorot-uniform before softmax, zero
//! biases) and epoch shuffling draw from the crate's own seeded generator,
//! so a `(seed, data, config)` triple reproduces a training bit for bit.

mod builders;
mod layers;
mod network;
mod tensor;
mod train;

pub use builders::{
    build_deep_mlp, build_sniff_convnet, build_sniff_convnet_with, build_sniff_multinose,
    build_sniff_multinose_with, build_sniff_resnet, build_sniff_resnet_with, SniffArch,
    MLP_HIDDEN_WIDTH, MLP_INPUT_WIDTH,
};
pub use layers::{
    ColumnFusion, Conv2d, Dense, Init, Layer, LayerCache, LayerGrads, Padding, ResidualBlock,
};
pub use network::{one_hot, Network, NETWORK_FORMAT_VERSION, PROB_FLOOR};
pub use tensor::Tensor;
pub use train::{train_network, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("input {rows}x{cols} is too small for this architecture")]
    InputTooSmall { rows: usize, cols: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("model file is not usable: {0}")]
    BadModelFile(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    fn random_batch(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = Rng64::from_seed(seed);
        let n: usize = shape.iter().product();
        Tensor::from_values(shape, (0..n).map(|_| rng.approx_normal()).collect()).unwrap()
    }

    /// Central finite-difference check over every parameter of a network.
    fn gradcheck(net: &mut Network, batch: &Tensor, labels: &[usize]) -> f64 {
        let targets = one_hot(labels, net.class_count).unwrap();
        let (_, grads) = net.loss_and_gradients(batch, &targets).unwrap();
        let analytic = net.grads_flat(&grads);
        let params = net.params_flat();
        let eps = 1e-5;
        let mut max_rel = 0.0f64;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += eps;
            net.set_params_flat(&plus).unwrap();
            let (loss_plus, _) = net.loss_and_gradients(batch, &targets).unwrap();
            let mut minus = params.clone();
            minus[i] -= eps;
            net.set_params_flat(&minus).unwrap();
            let (loss_minus, _) = net.loss_and_gradients(batch, &targets).unwrap();
            let numeric = (loss_plus - loss_minus) / (2.0 * eps);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
        }
        net.set_params_flat(&params).unwrap();
        max_rel
    }

    #[test]
    fn deep_mlp_widths_and_param_count() {
        let net = build_deep_mlp(600, 3, 0).unwrap();
        let dense_layers: Vec<(usize, usize)> = net
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some((d.input_len, d.output_len)),
                _ => None,
            })
            .collect();
        assert_eq!(
            dense_layers,
            vec![
                (600, 100),
                (100, 30),
                (30, 30),
                (30, 30),
                (30, 30),
                (30, 30),
                (30, 30),
                (30, 3)
            ]
        );
        let closed_form: usize = dense_layers.iter().map(|(i, o)| i * o + o).sum();
        assert_eq!(net.param_count(), closed_form);
    }

    #[test]
    fn zero_input_softmax_comes_from_biases() {
        let net = build_deep_mlp(10, 4, 7).unwrap();
        let batch = Tensor::zeros(&[2, 10]);
        let out = net.forward(&batch).unwrap();
        for b in 0..2 {
            let row = &out.values[b * 4..(b + 1) * 4];
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn convnet_shapes() {
        let net = build_sniff_convnet(10, 6, 3, 1).unwrap();
        // after two valid 3x3 convs: (6, 2) with 32 channels -> flatten 384
        let first_dense = net
            .layers
            .iter()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d.input_len),
                _ => None,
            })
            .unwrap();
        assert_eq!(first_dense, 384);
        let out = net.forward(&random_batch(&[3, 1, 10, 6], 2)).unwrap();
        assert_eq!(out.shape, vec![3, 3]);
        for b in 0..3 {
            let sum: f64 = out.values[b * 3..(b + 1) * 3].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn convnet_rejects_small_input() {
        assert!(matches!(
            build_sniff_convnet(4, 6, 3, 0),
            Err(NeuralError::InputTooSmall { .. })
        ));
        assert!(matches!(
            build_sniff_convnet(10, 4, 3, 0),
            Err(NeuralError::InputTooSmall { .. })
        ));
    }

    #[test]
    fn resnet_preserves_spatial_dims() {
        let net = build_sniff_resnet(10, 6, 3, 1).unwrap();
        let first_dense = net
            .layers
            .iter()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d.input_len),
                _ => None,
            })
            .unwrap();
        assert_eq!(first_dense, 32 * 10 * 6);
        let out = net.forward(&random_batch(&[2, 1, 10, 6], 3)).unwrap();
        for b in 0..2 {
            let sum: f64 = out.values[b * 3..(b + 1) * 3].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_block_with_zero_convs_is_identity_on_map() {
        let mut rng = Rng64::from_seed(4);
        let mut block = ResidualBlock::init(3, 3, 3, &mut rng);
        assert!(block.projection.is_none());
        block.conv1.weights.iter_mut().for_each(|w| *w = 0.0);
        block.conv2.weights.iter_mut().for_each(|w| *w = 0.0);
        block.conv1.bias.iter_mut().for_each(|b| *b = 0.0);
        block.conv2.bias.iter_mut().for_each(|b| *b = 0.0);
        let layer = Layer::Residual(block);
        let x = random_batch(&[2, 3, 5, 4], 5);
        let out = layer.forward(&x);
        assert_eq!(out, x);
    }

    #[test]
    fn zeroed_resnet_equals_plain_mlp_on_replicated_input() {
        let (rows, cols, classes) = (6, 4, 3);
        let mut net = build_sniff_resnet(rows, cols, classes, 9).unwrap();
        // zero both blocks' convs; make projections replicate channels
        for layer in &mut net.layers {
            if let Layer::Residual(block) = layer {
                block.conv1.weights.iter_mut().for_each(|w| *w = 0.0);
                block.conv1.bias.iter_mut().for_each(|b| *b = 0.0);
                block.conv2.weights.iter_mut().for_each(|w| *w = 0.0);
                block.conv2.bias.iter_mut().for_each(|b| *b = 0.0);
                if let Some(p) = &mut block.projection {
                    for oc in 0..p.out_channels {
                        for ic in 0..p.in_channels {
                            p.weights[oc * p.in_channels + ic] =
                                if ic == oc % p.in_channels { 1.0 } else { 0.0 };
                        }
                    }
                    p.bias.iter_mut().for_each(|b| *b = 0.0);
                }
            }
        }
        // mirror MLP: same dense weights, input = input map replicated x32
        let (dense1, dense2) = {
            let denses: Vec<&Dense> = net
                .layers
                .iter()
                .filter_map(|l| match l {
                    Layer::Dense(d) => Some(d),
                    _ => None,
                })
                .collect();
            (denses[0].clone(), denses[1].clone())
        };
        let mlp = Network {
            format_version: NETWORK_FORMAT_VERSION,
            input_shape: vec![dense1.input_len],
            class_count: classes,
            rng_seed: 0,
            layers: vec![
                Layer::Dense(dense1.clone()),
                Layer::Relu,
                Layer::Dense(dense2),
                Layer::Softmax,
            ],
        };
        let x = random_batch(&[2, 1, rows, cols], 6);
        let per_map = rows * cols;
        let channels = dense1.input_len / per_map;
        let mut replicated = Vec::new();
        for b in 0..2 {
            let map = &x.values[b * per_map..(b + 1) * per_map];
            for _ in 0..channels {
                replicated.extend_from_slice(map);
            }
        }
        let flat_input =
            Tensor::from_values(&[2, dense1.input_len], replicated).unwrap();
        let a = net.forward(&x).unwrap();
        let b = mlp.forward(&flat_input).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn multinose_shapes_and_reduction() {
        let net = build_sniff_multinose(100, 6, 4, 0).unwrap();
        match &net.layers[0] {
            Layer::ColumnFusion(f) => {
                assert_eq!(f.columns.len(), 6);
                assert_eq!(f.columns[0].input_len, 100);
                assert_eq!(f.columns[0].output_len, 32);
            }
            other => panic!("expected fusion first, got {other:?}"),
        }
        match &net.layers[1] {
            Layer::Dense(d) => assert_eq!((d.input_len, d.output_len), (192, 64)),
            other => panic!("expected dense head, got {other:?}"),
        }
        // single column degenerates to a plain MLP over that column
        let single = build_sniff_multinose(20, 1, 2, 0).unwrap();
        let out = single.forward(&random_batch(&[2, 20, 1], 3)).unwrap();
        assert_eq!(out.shape, vec![2, 2]);
    }

    #[test]
    fn multinose_column_permutation_symmetry() {
        let net = build_sniff_multinose(8, 3, 2, 11).unwrap();
        let x = random_batch(&[2, 8, 3], 12);
        let base = net.forward(&x).unwrap();

        // swap input columns 0 and 2 AND their column-MLP parameter blocks
        let mut swapped_net = net.clone();
        if let Layer::ColumnFusion(f) = &mut swapped_net.layers[0] {
            f.columns.swap(0, 2);
        }
        // the head consumes concatenated column outputs; swap its blocks too
        if let Layer::Dense(d) = &mut swapped_net.layers[1] {
            let width = 32;
            for o in 0..d.output_len {
                for k in 0..width {
                    let i_a = k; // column 0 block
                    let i_b = 2 * width + k; // column 2 block
                    let idx_a = i_a * d.output_len + o;
                    let idx_b = i_b * d.output_len + o;
                    d.weights.swap(idx_a, idx_b);
                }
            }
        }
        let mut x_swapped = x.clone();
        for b in 0..2 {
            for r in 0..8 {
                let base_idx = (b * 8 + r) * 3;
                x_swapped.values.swap(base_idx, base_idx + 2);
            }
        }
        let swapped = swapped_net.forward(&x_swapped).unwrap();
        for (a, b) in base.values.iter().zip(&swapped.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_kernel_conv_passes_input_through() {
        let mut rng = Rng64::from_seed(1);
        let mut conv = Conv2d::init(1, 1, 1, 1, Padding::Valid, Init::He, &mut rng);
        conv.weights = vec![1.0];
        conv.bias = vec![0.0];
        let layer = Layer::Conv2d(conv);
        let x = random_batch(&[2, 1, 4, 5], 8);
        let out = layer.forward(&x);
        assert_eq!(out.values, x.values);
    }

    #[test]
    fn conv_forward_matches_naive_loop_oracle() {
        let mut rng = Rng64::from_seed(33);
        let conv = Conv2d::init(2, 3, 3, 2, Padding::Valid, Init::He, &mut rng);
        let x = random_batch(&[2, 2, 5, 6], 34);
        let layer = Layer::Conv2d(conv.clone());
        let out = layer.forward(&x);
        let (oh, ow) = (3usize, 5usize);
        for b in 0..2 {
            for oc in 0..3 {
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut acc = conv.bias[oc];
                        for ic in 0..2 {
                            for kh in 0..3 {
                                for kw in 0..2 {
                                    let w = conv.weights
                                        [((oc * 2 + ic) * 3 + kh) * 2 + kw];
                                    let xv = x.values
                                        [((b * 2 + ic) * 5 + y + kh) * 6 + xo + kw];
                                    acc += w * xv;
                                }
                            }
                        }
                        let got = out.values[((b * 3 + oc) * oh + y) * ow + xo];
                        assert!((got - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn loss_examples() {
        // a 2-dense softmax net forced to produce known probabilities
        let mut net = build_deep_mlp(2, 2, 0).unwrap();
        net.layers = vec![Layer::Dense(Dense {
            input_len: 2,
            output_len: 2,
            weights: vec![0.0; 4],
            bias: vec![0.0, 0.0],
        }), Layer::Softmax];
        net.input_shape = vec![2];
        net.check_shapes().unwrap();
        let x = Tensor::zeros(&[1, 2]);
        // uniform prediction over 2 classes: loss = ln 2
        let (loss, _) = net
            .loss_and_gradients(&x, &one_hot(&[0], 2).unwrap())
            .unwrap();
        assert!((loss - (2.0f64).ln()).abs() < 1e-12);
        // near-perfect prediction: loss ~ 0
        if let Layer::Dense(d) = &mut net.layers[0] {
            d.bias = vec![60.0, -60.0];
        }
        let (loss, _) = net
            .loss_and_gradients(&x, &one_hot(&[0], 2).unwrap())
            .unwrap();
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences_all_layer_types() {
        // dense + relu + softmax
        let mut mlp = build_deep_mlp(5, 3, 21).unwrap();
        // shrink to keep the FD sweep cheap
        mlp.layers.truncate(2); // Dense(5->100) + Relu
        mlp.layers = vec![
            Layer::Dense(Dense::init(5, 4, Init::He, &mut Rng64::from_seed(1))),
            Layer::Relu,
            Layer::Dense(Dense::init(4, 3, Init::Glorot, &mut Rng64::from_seed(2))),
            Layer::Softmax,
        ];
        mlp.check_shapes().unwrap();
        let err = gradcheck(&mut mlp, &random_batch(&[3, 5], 22), &[0, 2, 1]);
        assert!(err < 1e-4, "mlp gradcheck {err}");

        // convnet
        let mut conv = build_sniff_convnet_with(
            &SniffArch {
                filters1: 2,
                filters2: 3,
                kernel: 3,
                fc_width: 4,
                column_width: 2,
            },
            7,
            7,
            2,
            23,
        )
        .unwrap();
        let err = gradcheck(&mut conv, &random_batch(&[2, 1, 7, 7], 24), &[1, 0]);
        assert!(err < 1e-4, "convnet gradcheck {err}");

        // resnet (residual blocks with projection)
        let mut resnet = build_sniff_resnet_with(
            &SniffArch {
                filters1: 2,
                filters2: 3,
                kernel: 3,
                fc_width: 4,
                column_width: 2,
            },
            5,
            4,
            2,
            25,
        )
        .unwrap();
        let err = gradcheck(&mut resnet, &random_batch(&[2, 1, 5, 4], 26), &[0, 1]);
        assert!(err < 1e-4, "resnet gradcheck {err}");

        // column fusion
        let mut fusion = build_sniff_multinose_with(
            &SniffArch {
                filters1: 2,
                filters2: 3,
                kernel: 3,
                fc_width: 4,
                column_width: 3,
            },
            6,
            3,
            2,
            27,
        )
        .unwrap();
        let err = gradcheck(&mut fusion, &random_batch(&[2, 6, 3], 28), &[1, 0]);
        assert!(err < 1e-4, "fusion gradcheck {err}");
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let net = build_deep_mlp(6, 2, 3).unwrap();
        let before = net.params_flat();
        let inputs = random_batch(&[4, 6], 5);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            ..TrainConfig::default()
        };
        let (trained, _) = train_network(net, &inputs, &[0, 1, 0, 1], &cfg).unwrap();
        assert_eq!(trained.params_flat(), before);
    }

    #[test]
    fn full_batch_no_momentum_matches_scalar_recurrence() {
        // Dense(1 -> 2) + Softmax on a single sample: simulate the descent
        // by hand with scalar arithmetic and compare every epoch.
        let mut net = build_deep_mlp(1, 2, 0).unwrap();
        net.layers = vec![
            Layer::Dense(Dense {
                input_len: 1,
                output_len: 2,
                weights: vec![0.3, -0.2],
                bias: vec![0.1, 0.0],
            }),
            Layer::Softmax,
        ];
        net.input_shape = vec![1];
        net.check_shapes().unwrap();
        let x_val = 1.5;
        let inputs = Tensor::from_values(&[1, 1], vec![x_val]).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 0.05,
            momentum: 0.0,
            batch_size: 1,
            seed: 0,
        };
        let (trained, trace) = train_network(net, &inputs, &[0], &cfg).unwrap();

        // independent scalar simulation of w - lr*g
        let (mut w0, mut w1, mut b0, mut b1) = (0.3f64, -0.2f64, 0.1f64, 0.0f64);
        let lr = 0.05;
        let mut expected_trace = Vec::new();
        for _ in 0..5 {
            let z0 = w0 * x_val + b0;
            let z1 = w1 * x_val + b1;
            let m = z0.max(z1);
            let e0 = (z0 - m).exp();
            let e1 = (z1 - m).exp();
            let p0 = e0 / (e0 + e1);
            let p1 = e1 / (e0 + e1);
            expected_trace.push(-p0.ln());
            let (g0, g1) = (p0 - 1.0, p1);
            w0 -= lr * g0 * x_val;
            w1 -= lr * g1 * x_val;
            b0 -= lr * g0;
            b1 -= lr * g1;
        }
        for (a, b) in trace.iter().zip(&expected_trace) {
            assert!((a - b).abs() < 1e-12, "trace {a} vs {b}");
        }
        let params = trained.params_flat();
        for (got, want) in params.iter().zip(&[w0, w1, b0, b1]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn training_reduces_loss_on_separable_toy() {
        let mut rng = Rng64::from_seed(40);
        let n = 16;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let center = if label == 0 { -2.0 } else { 2.0 };
            for _ in 0..4 {
                values.push(center + 0.3 * rng.approx_normal());
            }
            labels.push(label);
        }
        let inputs = Tensor::from_values(&[n, 4], values).unwrap();
        let net = build_deep_mlp(4, 2, 41).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            seed: 42,
            ..TrainConfig::default()
        };
        let (_, trace) = train_network(net, &inputs, &labels, &cfg).unwrap();
        let min = trace.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            min < trace[0],
            "loss never fell below the first epoch: {trace:?}"
        );
    }

    #[test]
    fn training_is_bit_deterministic() {
        let inputs = random_batch(&[10, 1, 6, 5], 50);
        let labels: Vec<usize> = (0..10).map(|i| i % 3).collect();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 99,
            ..TrainConfig::default()
        };
        let run = || {
            let net = build_sniff_convnet_with(
                &SniffArch {
                    filters1: 2,
                    filters2: 2,
                    kernel: 3,
                    fc_width: 4,
                    column_width: 2,
                },
                6,
                5,
                3,
                77,
            )
            .unwrap();
            train_network(net, &inputs, &labels, &cfg).unwrap()
        };
        let (net_a, trace_a) = run();
        let (net_b, trace_b) = run();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&net_a.params_flat()), bits(&net_b.params_flat()));
        assert_eq!(bits(&trace_a), bits(&trace_b));
    }

    #[test]
    fn predict_argmax_and_tie_rules() {
        let mut net = build_deep_mlp(2, 3, 0).unwrap();
        net.layers = vec![
            Layer::Dense(Dense {
                input_len: 2,
                output_len: 3,
                weights: vec![0.0; 6],
                bias: vec![0.0, 0.5, 0.2],
            }),
            Layer::Softmax,
        ];
        net.input_shape = vec![2];
        net.check_shapes().unwrap();
        let preds = net.predict(&Tensor::zeros(&[1, 2])).unwrap();
        assert_eq!(preds, vec![1]);

        // exact tie: all logits equal -> class 0
        if let Layer::Dense(d) = &mut net.layers[0] {
            d.bias = vec![0.7, 0.7, 0.7];
        }
        assert_eq!(net.predict(&Tensor::zeros(&[1, 2])).unwrap(), vec![0]);

        // shift invariance of the argmax
        if let Layer::Dense(d) = &mut net.layers[0] {
            d.bias = vec![0.1, 0.9, 0.3];
        }
        let base = net.predict(&Tensor::zeros(&[1, 2])).unwrap();
        if let Layer::Dense(d) = &mut net.layers[0] {
            d.bias = vec![100.1, 100.9, 100.3];
        }
        assert_eq!(net.predict(&Tensor::zeros(&[1, 2])).unwrap(), base);
    }

    #[test]
    fn network_json_round_trip_preserves_forward() {
        let net = build_sniff_multinose(10, 3, 2, 8).unwrap();
        let x = random_batch(&[3, 10, 3], 9);
        let before = net.forward(&x).unwrap();
        let loaded = Network::from_json(&net.to_json()).unwrap();
        let after = loaded.forward(&x).unwrap();
        for (a, b) in before.values.iter().zip(&after.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_loss_aborts_with_epoch() {
        let mut net = build_deep_mlp(2, 2, 0).unwrap();
        // poison a weight so the forward pass explodes
        let mut params = net.params_flat();
        params[0] = f64::INFINITY;
        net.set_params_flat(&params).unwrap();
        let inputs = Tensor::from_values(&[2, 2], vec![1.0, 1.0, -1.0, 0.5]).unwrap();
        let err = train_network(net, &inputs, &[0, 1], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, NeuralError::NonFiniteLoss { epoch: 0 }));
    }
}
