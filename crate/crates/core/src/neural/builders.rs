//! Builders for the four benchmark architectures.
//!
//! Filter counts, kernel sizes and FC widths are frozen defaults in
//! [`SniffArch`], sized so desk-scale runs finish in minutes; pass a custom
//! `SniffArch` through the `_with` variants to override them.

use super::layers::{ColumnFusion, Conv2d, Dense, Init, Layer, Padding, ResidualBlock};
use super::network::{Network, NETWORK_FORMAT_VERSION};
use super::NeuralError;
use crate::rng::Rng64;

/// Architecture knobs shared by the Sniff builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SniffArch {
    pub filters1: usize,
    pub filters2: usize,
    pub kernel: usize,
    pub fc_width: usize,
    /// Per-column MLP width in the fusion model.
    pub column_width: usize,
}

impl Default for SniffArch {
    fn default() -> Self {
        SniffArch {
            filters1: 16,
            filters2: 32,
            kernel: 3,
            fc_width: 64,
            column_width: 32,
        }
    }
}

pub const MLP_INPUT_WIDTH: usize = 100;
pub const MLP_HIDDEN_WIDTH: usize = 30;

fn network(
    input_shape: Vec<usize>,
    class_count: usize,
    seed: u64,
    layers: Vec<Layer>,
) -> Result<Network, NeuralError> {
    let net = Network {
        format_version: NETWORK_FORMAT_VERSION,
        input_shape,
        class_count,
        rng_seed: seed,
        layers,
    };
    net.check_shapes()?;
    Ok(net)
}

/// Eight weight layers: `in -> 100`, six hidden layers ending at width 30,
/// then `30 -> classes` under softmax, ReLU everywhere else.
pub fn build_deep_mlp(
    input_len: usize,
    classes: usize,
    seed: u64,
) -> Result<Network, NeuralError> {
    if input_len < 1 {
        return Err(NeuralError::InvalidParameter(
            "input_len must be >= 1".into(),
        ));
    }
    if classes < 2 {
        return Err(NeuralError::InvalidParameter("classes must be >= 2".into()));
    }
    let mut rng = Rng64::derive(seed, "deep_mlp");
    let mut widths = vec![input_len, MLP_INPUT_WIDTH];
    widths.extend(std::iter::repeat(MLP_HIDDEN_WIDTH).take(6));
    let mut layers = Vec::new();
    for pair in widths.windows(2) {
        layers.push(Layer::Dense(Dense::init(pair[0], pair[1], Init::He, &mut rng)));
        layers.push(Layer::Relu);
    }
    layers.push(Layer::Dense(Dense::init(
        MLP_HIDDEN_WIDTH,
        classes,
        Init::Glorot,
        &mut rng,
    )));
    layers.push(Layer::Softmax);
    network(vec![input_len], classes, seed, layers)
}

/// Two valid 3x3 convolution+ReLU stages, then two FC layers.
pub fn build_sniff_convnet(
    rows: usize,
    cols: usize,
    classes: usize,
    seed: u64,
) -> Result<Network, NeuralError> {
    build_sniff_convnet_with(&SniffArch::default(), rows, cols, classes, seed)
}

pub fn build_sniff_convnet_with(
    arch: &SniffArch,
    rows: usize,
    cols: usize,
    classes: usize,
    seed: u64,
) -> Result<Network, NeuralError> {
    check_common(rows, cols, classes)?;
    let shrink = 2 * (arch.kernel - 1);
    if rows <= shrink || cols <= shrink {
        return Err(NeuralError::InputTooSmall { rows, cols });
    }
    let mut rng = Rng64::derive(seed, "sniff_convnet");
    let (oh, ow) = (rows - shrink, cols - shrink);
    let flat = arch.filters2 * oh * ow;
    let layers = vec![
        Layer::Conv2d(Conv2d::init(
            1,
            arch.filters1,
            arch.kernel,
            arch.kernel,
            Padding::Valid,
            Init::He,
            &mut rng,
        )),
        Layer::Relu,
        Layer::Conv2d(Conv2d::init(
            arch.filters1,
            arch.filters2,
            arch.kernel,
            arch.kernel,
            Padding::Valid,
            Init::He,
            &mut rng,
        )),
        Layer::Relu,
        Layer::Flatten,
        Layer::Dense(Dense::init(flat, arch.fc_width, Init::He, &mut rng)),
        Layer::Relu,
        Layer::Dense(Dense::init(arch.fc_width, classes, Init::Glorot, &mut rng)),
        Layer::Softmax,
    ];
    network(vec![1, rows, cols], classes, seed, layers)
}

/// Two residual blocks (same-padded convolutions, projection on channel
/// change), then two FC layers.
pub fn build_sniff_resnet(
    rows: usize,
    cols: usize,
    classes: usize,
    seed: u64,
) -> Result<Network, NeuralError> {
    build_sniff_resnet_with(&SniffArch::default(), rows, cols, classes, seed)
}

pub fn build_sniff_resnet_with(
    arch: &SniffArch,
    rows: usize,
    cols: usize,
    classes: usize,
    seed: u64,
) -> Result<Network, NeuralError> {
    check_common(rows, cols, classes)?;
    if rows < 5 || cols < 2 {
        return Err(NeuralError::InputTooSmall { rows, cols });
    }
    let mut rng = Rng64::derive(seed, "sniff_resnet");
    let flat = arch.filters2 * rows * cols;
    // ReLU lives inside each block (between its convolutions); nothing
    // follows the skip addition, so zero-weight blocks pass input through.
    let layers = vec![
        Layer::Residual(ResidualBlock::init(1, arch.filters1, arch.kernel, &mut rng)),
        Layer::Residual(ResidualBlock::init(
            arch.filters1,
            arch.filters2,
            arch.kernel,
            &mut rng,
        )),
        Layer::Flatten,
        Layer::Dense(Dense::init(flat, arch.fc_width, Init::He, &mut rng)),
        Layer::Relu,
        Layer::Dense(Dense::init(arch.fc_width, classes, Init::Glorot, &mut rng)),
        Layer::Softmax,
    ];
    network(vec![1, rows, cols], classes, seed, layers)
}

/// One small MLP per sensor column, outputs concatenated into a head MLP.
pub fn build_sniff_multinose(
    rows: usize,
    cols: usize,
    classes: usize,
    seed: u64,
) -> Result<Network, NeuralError> {
    build_sniff_multinose_with(&SniffArch::default(), rows, cols, classes, seed)
}

pub fn build_sniff_multinose_with(
    arch: &SniffArch,
    rows: usize,
    cols: usize,
    classes: usize,
    seed: u64,
) -> Result<Network, NeuralError> {
    check_common(rows, cols, classes)?;
    let mut rng = Rng64::derive(seed, "sniff_multinose");
    let columns = (0..cols)
        .map(|_| Dense::init(rows, arch.column_width, Init::He, &mut rng))
        .collect();
    let concat = arch.column_width * cols;
    let layers = vec![
        Layer::ColumnFusion(ColumnFusion { rows, columns }),
        Layer::Dense(Dense::init(concat, arch.fc_width, Init::He, &mut rng)),
        Layer::Relu,
        Layer::Dense(Dense::init(arch.fc_width, classes, Init::Glorot, &mut rng)),
        Layer::Softmax,
    ];
    network(vec![rows, cols], classes, seed, layers)
}

fn check_common(rows: usize, cols: usize, classes: usize) -> Result<(), NeuralError> {
    if rows == 0 || cols == 0 {
        return Err(NeuralError::InvalidParameter(
            "rows and cols must be >= 1".into(),
        ));
    }
    if classes < 2 {
        return Err(NeuralError::InvalidParameter("classes must be >= 2".into()));
    }
    Ok(())
}
