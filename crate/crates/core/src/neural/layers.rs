//! Layer implementations with hand-coded forward and backward passes.
//!
//! Layout conventions:
//! - Dense weights are `[input_len * output_len]`, `w[i * out + o]`.
//! - Conv weights are `[oc][ic][kh][kw]` flattened row-major; inputs and
//!   feature maps are `[batch, channels, height, width]`.
//! - Gradients are summed over the batch; the `1/B` of the mean loss
//!   arrives through the loss gradient itself.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::rng::Rng64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// No padding; output shrinks by `kernel - 1`.
    Valid,
    /// Zero padding preserving spatial dims (odd kernels).
    Same,
}

/// Weight init scheme, matching the activation that follows the layer.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// He-uniform, for layers feeding ReLU.
    He,
    /// Glorot-uniform, for the softmax output layer.
    Glorot,
}

fn init_limit(init: Init, fan_in: usize, fan_out: usize) -> f64 {
    match init {
        Init::He => (6.0 / fan_in as f64).sqrt(),
        Init::Glorot => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input_len: usize,
    pub output_len: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn init(input_len: usize, output_len: usize, init: Init, rng: &mut Rng64) -> Dense {
        let limit = init_limit(init, input_len, output_len);
        Dense {
            input_len,
            output_len,
            weights: (0..input_len * output_len)
                .map(|_| rng.uniform_symmetric(limit))
                .collect(),
            bias: vec![0.0; output_len],
        }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let batch = x.batch();
        let (i_len, o_len) = (self.input_len, self.output_len);
        debug_assert_eq!(x.inner_len(), i_len);
        let mut out = vec![0.0; batch * o_len];
        for b in 0..batch {
            let xin = &x.values[b * i_len..(b + 1) * i_len];
            let row = &mut out[b * o_len..(b + 1) * o_len];
            row.copy_from_slice(&self.bias);
            for (i, &xv) in xin.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wrow = &self.weights[i * o_len..(i + 1) * o_len];
                for (o, &w) in wrow.iter().enumerate() {
                    row[o] += xv * w;
                }
            }
        }
        Tensor {
            shape: vec![batch, o_len],
            values: out,
        }
    }

    fn backward(&self, input: &Tensor, grad_out: &Tensor) -> (Tensor, Vec<f64>, Vec<f64>) {
        let batch = input.batch();
        let (i_len, o_len) = (self.input_len, self.output_len);
        let mut dw = vec![0.0; i_len * o_len];
        let mut db = vec![0.0; o_len];
        let mut dx = vec![0.0; batch * i_len];
        for b in 0..batch {
            let xin = &input.values[b * i_len..(b + 1) * i_len];
            let g = &grad_out.values[b * o_len..(b + 1) * o_len];
            for (o, &gv) in g.iter().enumerate() {
                db[o] += gv;
            }
            for (i, &xv) in xin.iter().enumerate() {
                let wrow = &self.weights[i * o_len..(i + 1) * o_len];
                let dwrow = &mut dw[i * o_len..(i + 1) * o_len];
                let mut acc = 0.0;
                for (o, &gv) in g.iter().enumerate() {
                    dwrow[o] += xv * gv;
                    acc += gv * wrow[o];
                }
                dx[b * i_len + i] = acc;
            }
        }
        (
            Tensor {
                shape: input.shape.clone(),
                values: dx,
            },
            dw,
            db,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub padding: Padding,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn init(
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        padding: Padding,
        init: Init,
        rng: &mut Rng64,
    ) -> Conv2d {
        let fan_in = in_channels * kernel_h * kernel_w;
        let fan_out = out_channels * kernel_h * kernel_w;
        let limit = init_limit(init, fan_in, fan_out);
        Conv2d {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            padding,
            weights: (0..out_channels * in_channels * kernel_h * kernel_w)
                .map(|_| rng.uniform_symmetric(limit))
                .collect(),
            bias: vec![0.0; out_channels],
        }
    }

    /// `(pad_h, pad_w)` applied on the top/left (odd kernels are symmetric).
    fn pads(&self) -> (isize, isize) {
        match self.padding {
            Padding::Valid => (0, 0),
            Padding::Same => (
                (self.kernel_h as isize - 1) / 2,
                (self.kernel_w as isize - 1) / 2,
            ),
        }
    }

    /// Output spatial dims for an input map; `None` when a valid conv
    /// would produce an empty map.
    pub fn output_dims(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        match self.padding {
            Padding::Valid => {
                let oh = h.checked_sub(self.kernel_h - 1)?;
                let ow = w.checked_sub(self.kernel_w - 1)?;
                (oh >= 1 && ow >= 1).then_some((oh, ow))
            }
            Padding::Same => Some((h, w)),
        }
    }

    #[inline]
    fn w_at(&self, oc: usize, ic: usize, kh: usize, kw: usize) -> f64 {
        self.weights[((oc * self.in_channels + ic) * self.kernel_h + kh) * self.kernel_w + kw]
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let (batch, ic, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
        debug_assert_eq!(ic, self.in_channels);
        let (oh, ow) = self.output_dims(h, w).expect("builder validated dims");
        let oc = self.out_channels;
        let (ph, pw) = self.pads();
        let mut out = vec![0.0; batch * oc * oh * ow];
        for b in 0..batch {
            for o in 0..oc {
                let out_base = (b * oc + o) * oh * ow;
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut acc = self.bias[o];
                        for i in 0..ic {
                            let in_base = (b * ic + i) * h * w;
                            for kh in 0..self.kernel_h {
                                let iy = y as isize + kh as isize - ph;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kw in 0..self.kernel_w {
                                    let ix = xo as isize + kw as isize - pw;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += self.w_at(o, i, kh, kw)
                                        * x.values[in_base + iy as usize * w + ix as usize];
                                }
                            }
                        }
                        out[out_base + y * ow + xo] = acc;
                    }
                }
            }
        }
        Tensor {
            shape: vec![batch, oc, oh, ow],
            values: out,
        }
    }

    fn backward(&self, input: &Tensor, grad_out: &Tensor) -> (Tensor, Vec<f64>, Vec<f64>) {
        let (batch, ic, h, w) = (
            input.shape[0],
            input.shape[1],
            input.shape[2],
            input.shape[3],
        );
        let (oh, ow) = (grad_out.shape[2], grad_out.shape[3]);
        let oc = self.out_channels;
        let (ph, pw) = self.pads();
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; oc];
        let mut dx = vec![0.0; input.values.len()];
        for b in 0..batch {
            for o in 0..oc {
                let g_base = (b * oc + o) * oh * ow;
                for y in 0..oh {
                    for xo in 0..ow {
                        let g = grad_out.values[g_base + y * ow + xo];
                        if g == 0.0 {
                            continue;
                        }
                        db[o] += g;
                        for i in 0..ic {
                            let in_base = (b * ic + i) * h * w;
                            for kh in 0..self.kernel_h {
                                let iy = y as isize + kh as isize - ph;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kw in 0..self.kernel_w {
                                    let ix = xo as isize + kw as isize - pw;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let widx = ((o * ic + i) * self.kernel_h + kh)
                                        * self.kernel_w
                                        + kw;
                                    let xidx = in_base + iy as usize * w + ix as usize;
                                    dw[widx] += g * input.values[xidx];
                                    dx[xidx] += g * self.weights[widx];
                                }
                            }
                        }
                    }
                }
            }
        }
        (
            Tensor {
                shape: input.shape.clone(),
                values: dx,
            },
            dw,
            db,
        )
    }
}

/// Two same-padded convolutions with a skip from the block input added to
/// the second convolution's output. A 1x1 projection convolution carries
/// the skip when the channel count changes; no activation follows the
/// addition, so a zero-weight block is exactly the identity (or the
/// projection) of its input map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub projection: Option<Conv2d>,
}

impl ResidualBlock {
    pub fn init(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut Rng64) -> Self {
        let conv1 = Conv2d::init(
            in_channels,
            out_channels,
            kernel,
            kernel,
            Padding::Same,
            Init::He,
            rng,
        );
        let conv2 = Conv2d::init(
            out_channels,
            out_channels,
            kernel,
            kernel,
            Padding::Same,
            Init::He,
            rng,
        );
        let projection = (in_channels != out_channels).then(|| {
            Conv2d::init(in_channels, out_channels, 1, 1, Padding::Same, Init::He, rng)
        });
        ResidualBlock {
            conv1,
            conv2,
            projection,
        }
    }
}

/// Per-sensor-column dense sublayers with built-in ReLU, concatenated.
/// Input is `[batch, rows, columns.len()]`; output `[batch, width * C]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnFusion {
    pub rows: usize,
    pub columns: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    Relu,
    Flatten,
    Softmax,
    Residual(ResidualBlock),
    ColumnFusion(ColumnFusion),
}

/// Per-layer state captured by the training forward pass.
pub enum LayerCache {
    Dense {
        input: Tensor,
    },
    Conv {
        input: Tensor,
    },
    Relu {
        input: Tensor,
    },
    Flatten {
        input_shape: Vec<usize>,
    },
    Softmax {
        output: Tensor,
    },
    Residual {
        input: Tensor,
        pre1: Tensor,
        act1: Tensor,
    },
    ColumnFusion {
        input: Tensor,
        pre: Vec<Tensor>,
    },
}

/// Parameter gradients, mirroring each layer's parameter blocks.
#[derive(Debug, Clone)]
pub enum LayerGrads {
    None,
    Dense {
        dw: Vec<f64>,
        db: Vec<f64>,
    },
    Conv {
        dw: Vec<f64>,
        db: Vec<f64>,
    },
    Residual {
        conv1: (Vec<f64>, Vec<f64>),
        conv2: (Vec<f64>, Vec<f64>),
        projection: Option<(Vec<f64>, Vec<f64>)>,
    },
    ColumnFusion {
        columns: Vec<(Vec<f64>, Vec<f64>)>,
    },
}

pub(crate) fn softmax_rows(x: &Tensor) -> Tensor {
    let batch = x.batch();
    let k = x.inner_len();
    let mut out = x.values.clone();
    for b in 0..batch {
        let row = &mut out[b * k..(b + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Tensor {
        shape: vec![batch, k],
        values: out,
    }
}

fn relu(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        values: x.values.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
    }
}

fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    Tensor {
        shape: input.shape.clone(),
        values: input
            .values
            .iter()
            .zip(&grad_out.values)
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
    }
}

fn add(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.shape, b.shape);
    Tensor {
        shape: a.shape.clone(),
        values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
    }
}

impl Layer {
    /// Output shape (without batch) for a given per-sample input shape, or
    /// `None` when shapes do not compose. Used by builders and validation.
    pub fn output_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match self {
            Layer::Dense(d) => {
                (input.iter().product::<usize>() == d.input_len && input.len() == 1)
                    .then(|| vec![d.output_len])
            }
            Layer::Conv2d(c) => {
                if input.len() != 3 || input[0] != c.in_channels {
                    return None;
                }
                let (oh, ow) = c.output_dims(input[1], input[2])?;
                Some(vec![c.out_channels, oh, ow])
            }
            Layer::Relu | Layer::Softmax => Some(input.to_vec()),
            Layer::Flatten => Some(vec![input.iter().product()]),
            Layer::Residual(r) => {
                if input.len() != 3 || input[0] != r.conv1.in_channels {
                    return None;
                }
                Some(vec![r.conv2.out_channels, input[1], input[2]])
            }
            Layer::ColumnFusion(f) => {
                if input.len() != 2 || input[0] != f.rows || input[1] != f.columns.len() {
                    return None;
                }
                let width: usize = f.columns.iter().map(|d| d.output_len).sum();
                Some(vec![width])
            }
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        self.forward_train(x).0
    }

    pub fn forward_train(&self, x: &Tensor) -> (Tensor, LayerCache) {
        match self {
            Layer::Dense(d) => (
                d.forward(x),
                LayerCache::Dense { input: x.clone() },
            ),
            Layer::Conv2d(c) => (
                c.forward(x),
                LayerCache::Conv { input: x.clone() },
            ),
            Layer::Relu => (relu(x), LayerCache::Relu { input: x.clone() }),
            Layer::Flatten => {
                let batch = x.batch();
                let flat = x
                    .clone()
                    .reshaped(&[batch, x.inner_len()])
                    .expect("flatten preserves element count");
                (
                    flat,
                    LayerCache::Flatten {
                        input_shape: x.shape.clone(),
                    },
                )
            }
            Layer::Softmax => {
                let out = softmax_rows(x);
                (
                    out.clone(),
                    LayerCache::Softmax { output: out },
                )
            }
            Layer::Residual(r) => {
                let pre1 = r.conv1.forward(x);
                let act1 = relu(&pre1);
                let main = r.conv2.forward(&act1);
                let skip = match &r.projection {
                    Some(p) => p.forward(x),
                    None => x.clone(),
                };
                (
                    add(&main, &skip),
                    LayerCache::Residual {
                        input: x.clone(),
                        pre1,
                        act1,
                    },
                )
            }
            Layer::ColumnFusion(f) => {
                let batch = x.batch();
                let (rows, cols) = (f.rows, f.columns.len());
                let width = f.columns[0].output_len;
                let mut out = vec![0.0; batch * width * cols];
                let mut pre = Vec::with_capacity(cols);
                for (c, dense) in f.columns.iter().enumerate() {
                    let mut col = vec![0.0; batch * rows];
                    for b in 0..batch {
                        for r in 0..rows {
                            col[b * rows + r] = x.values[(b * rows + r) * cols + c];
                        }
                    }
                    let col_t = Tensor {
                        shape: vec![batch, rows],
                        values: col,
                    };
                    let pre_c = dense.forward(&col_t);
                    for b in 0..batch {
                        for o in 0..width {
                            let v = pre_c.values[b * width + o];
                            out[b * width * cols + c * width + o] =
                                if v > 0.0 { v } else { 0.0 };
                        }
                    }
                    pre.push(pre_c);
                }
                (
                    Tensor {
                        shape: vec![batch, width * cols],
                        values: out,
                    },
                    LayerCache::ColumnFusion {
                        input: x.clone(),
                        pre,
                    },
                )
            }
        }
    }

    /// Gradient of the loss with respect to this layer's input and
    /// parameters, given the gradient with respect to its output.
    pub fn backward(&self, cache: &LayerCache, grad_out: &Tensor) -> (Tensor, LayerGrads) {
        match (self, cache) {
            (Layer::Dense(d), LayerCache::Dense { input }) => {
                let (dx, dw, db) = d.backward(input, grad_out);
                (dx, LayerGrads::Dense { dw, db })
            }
            (Layer::Conv2d(c), LayerCache::Conv { input }) => {
                let (dx, dw, db) = c.backward(input, grad_out);
                (dx, LayerGrads::Conv { dw, db })
            }
            (Layer::Relu, LayerCache::Relu { input }) => {
                (relu_backward(input, grad_out), LayerGrads::None)
            }
            (Layer::Flatten, LayerCache::Flatten { input_shape }) => (
                grad_out
                    .clone()
                    .reshaped(input_shape)
                    .expect("flatten round trip"),
                LayerGrads::None,
            ),
            (Layer::Softmax, LayerCache::Softmax { output }) => {
                // dx_i = p_i * (g_i - sum_j g_j p_j), row-wise
                let batch = output.batch();
                let k = output.inner_len();
                let mut dx = vec![0.0; batch * k];
                for b in 0..batch {
                    let p = &output.values[b * k..(b + 1) * k];
                    let g = &grad_out.values[b * k..(b + 1) * k];
                    let dot: f64 = p.iter().zip(g).map(|(pi, gi)| pi * gi).sum();
                    for i in 0..k {
                        dx[b * k + i] = p[i] * (g[i] - dot);
                    }
                }
                (
                    Tensor {
                        shape: output.shape.clone(),
                        values: dx,
                    },
                    LayerGrads::None,
                )
            }
            (Layer::Residual(r), LayerCache::Residual { input, pre1, act1 }) => {
                let (d_act1, dw2, db2) = r.conv2.backward(act1, grad_out);
                let d_pre1 = relu_backward(pre1, &d_act1);
                let (dx_main, dw1, db1) = r.conv1.backward(input, &d_pre1);
                let (dx_skip, proj_grads) = match &r.projection {
                    Some(p) => {
                        let (dx, dw, db) = p.backward(input, grad_out);
                        (dx, Some((dw, db)))
                    }
                    None => (grad_out.clone(), None),
                };
                (
                    add(&dx_main, &dx_skip),
                    LayerGrads::Residual {
                        conv1: (dw1, db1),
                        conv2: (dw2, db2),
                        projection: proj_grads,
                    },
                )
            }
            (Layer::ColumnFusion(f), LayerCache::ColumnFusion { input, pre }) => {
                let batch = input.batch();
                let (rows, cols) = (f.rows, f.columns.len());
                let width = f.columns[0].output_len;
                let mut dx = vec![0.0; input.values.len()];
                let mut col_grads = Vec::with_capacity(cols);
                for (c, dense) in f.columns.iter().enumerate() {
                    // slice this column's chunk of the concatenated gradient
                    let mut g_col = vec![0.0; batch * width];
                    for b in 0..batch {
                        for o in 0..width {
                            g_col[b * width + o] =
                                grad_out.values[b * width * cols + c * width + o];
                        }
                    }
                    let g_col = relu_backward(
                        &pre[c],
                        &Tensor {
                            shape: vec![batch, width],
                            values: g_col,
                        },
                    );
                    // rebuild the column input the forward pass used
                    let mut col = vec![0.0; batch * rows];
                    for b in 0..batch {
                        for r in 0..rows {
                            col[b * rows + r] = input.values[(b * rows + r) * cols + c];
                        }
                    }
                    let col_t = Tensor {
                        shape: vec![batch, rows],
                        values: col,
                    };
                    let (d_col, dw, db) = dense.backward(&col_t, &g_col);
                    for b in 0..batch {
                        for r in 0..rows {
                            dx[(b * rows + r) * cols + c] = d_col.values[b * rows + r];
                        }
                    }
                    col_grads.push((dw, db));
                }
                (
                    Tensor {
                        shape: input.shape.clone(),
                        values: dx,
                    },
                    LayerGrads::ColumnFusion { columns: col_grads },
                )
            }
            _ => unreachable!("cache kind always matches its layer"),
        }
    }

    /// Parameter blocks in update order (read-only).
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense(d) => vec![&d.weights, &d.bias],
            Layer::Conv2d(c) => vec![&c.weights, &c.bias],
            Layer::Relu | Layer::Flatten | Layer::Softmax => vec![],
            Layer::Residual(r) => {
                let mut blocks = vec![
                    r.conv1.weights.as_slice(),
                    r.conv1.bias.as_slice(),
                    r.conv2.weights.as_slice(),
                    r.conv2.bias.as_slice(),
                ];
                if let Some(p) = &r.projection {
                    blocks.push(&p.weights);
                    blocks.push(&p.bias);
                }
                blocks
            }
            Layer::ColumnFusion(f) => f
                .columns
                .iter()
                .flat_map(|d| [d.weights.as_slice(), d.bias.as_slice()])
                .collect(),
        }
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
            Layer::Conv2d(c) => vec![&mut c.weights, &mut c.bias],
            Layer::Relu | Layer::Flatten | Layer::Softmax => vec![],
            Layer::Residual(r) => {
                let mut blocks = vec![
                    &mut r.conv1.weights,
                    &mut r.conv1.bias,
                    &mut r.conv2.weights,
                    &mut r.conv2.bias,
                ];
                if let Some(p) = &mut r.projection {
                    blocks.push(&mut p.weights);
                    blocks.push(&mut p.bias);
                }
                blocks
            }
            Layer::ColumnFusion(f) => {
                let mut blocks = Vec::with_capacity(f.columns.len() * 2);
                for d in &mut f.columns {
                    blocks.push(&mut d.weights);
                    blocks.push(&mut d.bias);
                }
                blocks
            }
        }
    }
}

impl LayerGrads {
    /// Gradient blocks in the same order as [`Layer::param_blocks`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        match self {
            LayerGrads::None => vec![],
            LayerGrads::Dense { dw, db } | LayerGrads::Conv { dw, db } => vec![dw, db],
            LayerGrads::Residual {
                conv1,
                conv2,
                projection,
            } => {
                let mut blocks = vec![
                    conv1.0.as_slice(),
                    conv1.1.as_slice(),
                    conv2.0.as_slice(),
                    conv2.1.as_slice(),
                ];
                if let Some((dw, db)) = projection {
                    blocks.push(dw);
                    blocks.push(db);
                }
                blocks
            }
            LayerGrads::ColumnFusion { columns } => columns
                .iter()
                .flat_map(|(dw, db)| [dw.as_slice(), db.as_slice()])
                .collect(),
        }
    }
}
