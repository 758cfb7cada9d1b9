//! Reverse-mode automatic differentiation on a flat computation tape.
//!
//! A [`Tape`] records every operation in execution order, which is already
//! a topological order, so the backward pass is a single reverse sweep.
//! Values are 64-bit throughout; checkpoints narrow to 32-bit on disk.
//!
//! Spatial tensors are channel-first `[C, H, W]`. Convolution kernels are
//! `[F, C, kH, kW]` with one bias per filter.

use crate::error::{Error, Result};

/// Dense n-dimensional value array, optionally carrying a gradient of the
/// same length. The gradient is only populated on tensors extracted from a
/// tape after a backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    /// Builds a tensor, checking that the extents multiply out to the value count.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || expected != values.len() {
            return Err(Error::Shape {
                op: "tensor",
                details: format!("shape {shape:?} does not hold {} values", values.len()),
            });
        }
        Ok(Tensor {
            shape,
            values,
            grad: None,
        })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            values: vec![0.0; len],
            grad: None,
        }
    }

    /// Scalar (rank-0) tensor.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            values: vec![value],
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Gradient populated by [`Tape::extract`], if any.
    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Option<Vec<f64>>) {
        self.grad = grad;
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValueId(usize);

/// One recorded operation. Saved fields are whatever backward needs.
enum Op {
    Leaf,
    Conv2d {
        input: ValueId,
        kernels: ValueId,
        bias: ValueId,
        stride: usize,
        padding: usize,
    },
    MaxPool2d {
        input: ValueId,
        /// Flat input index of the (first, row-major) maximum per output cell.
        argmax: Vec<usize>,
    },
    Relu {
        input: ValueId,
    },
    Dense {
        input: ValueId,
        weights: ValueId,
        bias: ValueId,
    },
    Softmax {
        input: ValueId,
    },
    CrossEntropy {
        predicted: ValueId,
        target: Vec<f64>,
    },
    Dropout {
        input: ValueId,
        mask: Vec<f64>,
    },
    ConcatChannels {
        inputs: Vec<ValueId>,
    },
    Flatten {
        input: ValueId,
    },
    Add {
        lhs: ValueId,
        rhs: ValueId,
    },
    Mul {
        lhs: ValueId,
        rhs: ValueId,
    },
    Scale {
        input: ValueId,
        factor: f64,
    },
    Sum {
        input: ValueId,
    },
    Select {
        input: ValueId,
        index: usize,
    },
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Vec<f64>,
}

/// Clamp added inside the cross-entropy logarithm so one-hot matches never
/// produce an infinite loss.
pub const CROSS_ENTROPY_CLAMP: f64 = 1e-12;

/// Soft-target cross entropy on plain probability vectors:
/// `-sum(target_k * ln(predicted_k + clamp))`.
pub fn cross_entropy_soft(predicted: &[f64], target: &[f64]) -> f64 {
    debug_assert_eq!(predicted.len(), target.len());
    -predicted
        .iter()
        .zip(target)
        .map(|(p, t)| t * (p + CROSS_ENTROPY_CLAMP).ln())
        .sum::<f64>()
}

/// Append-only record of a forward computation.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, values: Vec<f64>) -> ValueId {
        self.nodes.push(Node {
            op,
            shape,
            values,
            grad: Vec::new(),
        });
        ValueId(self.nodes.len() - 1)
    }

    /// Records an input or parameter tensor.
    pub fn leaf(&mut self, tensor: &Tensor) -> ValueId {
        self.push(Op::Leaf, tensor.shape.clone(), tensor.values.clone())
    }

    pub fn shape(&self, id: ValueId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn values(&self, id: ValueId) -> &[f64] {
        &self.nodes[id.0].values
    }

    /// Gradient of the last backward target with respect to this value.
    /// Empty until [`Tape::backward`] runs.
    pub fn grad(&self, id: ValueId) -> &[f64] {
        &self.nodes[id.0].grad
    }

    /// Copies a recorded value out as a tensor, attaching its gradient when
    /// a backward pass has run.
    pub fn extract(&self, id: ValueId) -> Tensor {
        let node = &self.nodes[id.0];
        Tensor {
            shape: node.shape.clone(),
            values: node.values.clone(),
            grad: if node.grad.is_empty() {
                None
            } else {
                Some(node.grad.clone())
            },
        }
    }

    /// Two-dimensional convolution with zero padding.
    ///
    /// Output extent per axis is `floor((H + 2*padding - kH) / stride) + 1`.
    pub fn conv2d(
        &mut self,
        input: ValueId,
        kernels: ValueId,
        bias: ValueId,
        stride: usize,
        padding: usize,
    ) -> Result<ValueId> {
        let in_shape = self.shape(input).to_vec();
        let k_shape = self.shape(kernels).to_vec();
        let b_shape = self.shape(bias).to_vec();
        if in_shape.len() != 3 || k_shape.len() != 4 {
            return Err(Error::Shape {
                op: "conv2d",
                details: format!("need [C,H,W] input and [F,C,kH,kW] kernels, got {in_shape:?} and {k_shape:?}"),
            });
        }
        let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
        let (f, kc, kh, kw) = (k_shape[0], k_shape[1], k_shape[2], k_shape[3]);
        if kc != c {
            return Err(Error::Shape {
                op: "conv2d",
                details: format!("kernel expects {kc} input channels, input has {c}"),
            });
        }
        if b_shape != [f] {
            return Err(Error::Shape {
                op: "conv2d",
                details: format!("bias shape {b_shape:?} does not match {f} filters"),
            });
        }
        if stride == 0 {
            return Err(Error::Shape {
                op: "conv2d",
                details: "stride must be positive".into(),
            });
        }
        if kh > h + 2 * padding || kw > w + 2 * padding {
            return Err(Error::Shape {
                op: "conv2d",
                details: format!(
                    "kernel {kh}x{kw} exceeds padded extent {}x{}",
                    h + 2 * padding,
                    w + 2 * padding
                ),
            });
        }
        let oh = (h + 2 * padding - kh) / stride + 1;
        let ow = (w + 2 * padding - kw) / stride + 1;

        let x = self.values(input);
        let k = self.values(kernels);
        let b = self.values(bias);
        let mut out = vec![0.0; f * oh * ow];
        for fi in 0..f {
            let k_f = &k[fi * c * kh * kw..(fi + 1) * c * kh * kw];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[fi];
                    for ci in 0..c {
                        let x_c = &x[ci * h * w..(ci + 1) * h * w];
                        let k_c = &k_f[ci * kh * kw..(ci + 1) * kh * kw];
                        for ky in 0..kh {
                            // Padded coordinate; skip rows falling in the zero border.
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let row = &x_c[iy as usize * w..(iy as usize + 1) * w];
                            let k_row = &k_c[ky * kw..(ky + 1) * kw];
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += row[ix as usize] * k_row[kx];
                            }
                        }
                    }
                    out[fi * oh * ow + oy * ow + ox] = acc;
                }
            }
        }
        Ok(self.push(
            Op::Conv2d {
                input,
                kernels,
                bias,
                stride,
                padding,
            },
            vec![f, oh, ow],
            out,
        ))
    }

    /// Max pooling; backward routes each cell's gradient to the first
    /// (row-major) maximal element of its window.
    pub fn maxpool2d(&mut self, input: ValueId, window: usize, stride: usize) -> Result<ValueId> {
        let in_shape = self.shape(input).to_vec();
        if in_shape.len() != 3 {
            return Err(Error::Shape {
                op: "maxpool2d",
                details: format!("need [C,H,W] input, got {in_shape:?}"),
            });
        }
        let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
        if window == 0 || stride == 0 || window > h || window > w {
            return Err(Error::Shape {
                op: "maxpool2d",
                details: format!("window {window} stride {stride} invalid for {h}x{w} input"),
            });
        }
        let oh = (h - window) / stride + 1;
        let ow = (w - window) / stride + 1;
        let x = self.values(input);
        let mut out = vec![0.0; c * oh * ow];
        let mut argmax = vec![0usize; c * oh * ow];
        for ci in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for wy in 0..window {
                        for wx in 0..window {
                            let idx = ci * h * w + (oy * stride + wy) * w + (ox * stride + wx);
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out[ci * oh * ow + oy * ow + ox] = best;
                    argmax[ci * oh * ow + oy * ow + ox] = best_idx;
                }
            }
        }
        Ok(self.push(Op::MaxPool2d { input, argmax }, vec![c, oh, ow], out))
    }

    /// Elementwise `max(0, x)`; gradient passes only where `x > 0`.
    pub fn relu(&mut self, input: ValueId) -> ValueId {
        let values: Vec<f64> = self.values(input).iter().map(|&v| v.max(0.0)).collect();
        let shape = self.shape(input).to_vec();
        self.push(Op::Relu { input }, shape, values)
    }

    /// Affine layer `weights . input + bias` for `[M,N]` weights on an `[N]` input.
    pub fn dense(&mut self, input: ValueId, weights: ValueId, bias: ValueId) -> Result<ValueId> {
        let in_shape = self.shape(input).to_vec();
        let w_shape = self.shape(weights).to_vec();
        let b_shape = self.shape(bias).to_vec();
        if in_shape.len() != 1 || w_shape.len() != 2 || w_shape[1] != in_shape[0] {
            return Err(Error::Shape {
                op: "dense",
                details: format!("weights {w_shape:?} incompatible with input {in_shape:?}"),
            });
        }
        let (m, n) = (w_shape[0], w_shape[1]);
        if b_shape != [m] {
            return Err(Error::Shape {
                op: "dense",
                details: format!("bias shape {b_shape:?} does not match {m} rows"),
            });
        }
        let x = self.values(input);
        let w = self.values(weights);
        let b = self.values(bias);
        let mut out = vec![0.0; m];
        for (i, out_i) in out.iter_mut().enumerate() {
            let row = &w[i * n..(i + 1) * n];
            *out_i = b[i] + row.iter().zip(x).map(|(wv, xv)| wv * xv).sum::<f64>();
        }
        Ok(self.push(
            Op::Dense {
                input,
                weights,
                bias,
            },
            vec![m],
            out,
        ))
    }

    /// Max-subtraction stabilized softmax over a rank-1 tensor.
    pub fn softmax(&mut self, input: ValueId) -> Result<ValueId> {
        let shape = self.shape(input).to_vec();
        if shape.len() != 1 || shape[0] < 2 {
            return Err(Error::Shape {
                op: "softmax",
                details: format!("need a rank-1 tensor of length >= 2, got {shape:?}"),
            });
        }
        let x = self.values(input);
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let values: Vec<f64> = exps.iter().map(|&e| e / total).collect();
        Ok(self.push(Op::Softmax { input }, shape, values))
    }

    /// Scalar cross entropy of a predicted probability vector against a
    /// constant target distribution.
    pub fn cross_entropy(&mut self, predicted: ValueId, target: &[f64]) -> Result<ValueId> {
        let shape = self.shape(predicted).to_vec();
        if shape.len() != 1 || shape[0] != target.len() {
            return Err(Error::Shape {
                op: "cross_entropy",
                details: format!("predicted {shape:?} vs target of length {}", target.len()),
            });
        }
        let loss = cross_entropy_soft(self.values(predicted), target);
        Ok(self.push(
            Op::CrossEntropy {
                predicted,
                target: target.to_vec(),
            },
            vec![],
            vec![loss],
        ))
    }

    /// Inverted dropout with a precomputed mask of factors
    /// (0 for dropped units, `1/(1-rate)` for kept ones).
    pub fn dropout(&mut self, input: ValueId, mask: Vec<f64>) -> Result<ValueId> {
        if mask.len() != self.values(input).len() {
            return Err(Error::Shape {
                op: "dropout",
                details: format!(
                    "mask length {} does not match input length {}",
                    mask.len(),
                    self.values(input).len()
                ),
            });
        }
        let values: Vec<f64> = self
            .values(input)
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        let shape = self.shape(input).to_vec();
        Ok(self.push(Op::Dropout { input, mask }, shape, values))
    }

    /// Concatenates `[C,H,W]` tensors along the channel axis.
    pub fn concat_channels(&mut self, inputs: &[ValueId]) -> Result<ValueId> {
        if inputs.is_empty() {
            return Err(Error::Shape {
                op: "concat_channels",
                details: "no inputs".into(),
            });
        }
        let first = self.shape(inputs[0]).to_vec();
        if first.len() != 3 {
            return Err(Error::Shape {
                op: "concat_channels",
                details: format!("need [C,H,W] inputs, got {first:?}"),
            });
        }
        let (h, w) = (first[1], first[2]);
        let mut channels = 0;
        for &id in inputs {
            let s = self.shape(id);
            if s.len() != 3 || s[1] != h || s[2] != w {
                return Err(Error::Shape {
                    op: "concat_channels",
                    details: format!("spatial extents differ: {first:?} vs {s:?}"),
                });
            }
            channels += s[0];
        }
        let mut values = Vec::with_capacity(channels * h * w);
        for &id in inputs {
            values.extend_from_slice(self.values(id));
        }
        Ok(self.push(
            Op::ConcatChannels {
                inputs: inputs.to_vec(),
            },
            vec![channels, h, w],
            values,
        ))
    }

    /// Reshapes to rank 1, preserving element order.
    pub fn flatten(&mut self, input: ValueId) -> ValueId {
        let values = self.values(input).to_vec();
        let len = values.len();
        self.push(Op::Flatten { input }, vec![len], values)
    }

    /// Elementwise addition of same-shape tensors.
    pub fn add(&mut self, lhs: ValueId, rhs: ValueId) -> Result<ValueId> {
        if self.shape(lhs) != self.shape(rhs) {
            return Err(Error::Shape {
                op: "add",
                details: format!("{:?} vs {:?}", self.shape(lhs), self.shape(rhs)),
            });
        }
        let values: Vec<f64> = self
            .values(lhs)
            .iter()
            .zip(self.values(rhs))
            .map(|(a, b)| a + b)
            .collect();
        let shape = self.shape(lhs).to_vec();
        Ok(self.push(Op::Add { lhs, rhs }, shape, values))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, lhs: ValueId, rhs: ValueId) -> Result<ValueId> {
        if self.shape(lhs) != self.shape(rhs) {
            return Err(Error::Shape {
                op: "mul",
                details: format!("{:?} vs {:?}", self.shape(lhs), self.shape(rhs)),
            });
        }
        let values: Vec<f64> = self
            .values(lhs)
            .iter()
            .zip(self.values(rhs))
            .map(|(a, b)| a * b)
            .collect();
        let shape = self.shape(lhs).to_vec();
        Ok(self.push(Op::Mul { lhs, rhs }, shape, values))
    }

    /// Multiplies every element by a constant.
    pub fn scale(&mut self, input: ValueId, factor: f64) -> ValueId {
        let values: Vec<f64> = self.values(input).iter().map(|&v| v * factor).collect();
        let shape = self.shape(input).to_vec();
        self.push(Op::Scale { input, factor }, shape, values)
    }

    /// Scalar sum of all elements.
    pub fn sum(&mut self, input: ValueId) -> ValueId {
        let total: f64 = self.values(input).iter().sum();
        self.push(Op::Sum { input }, vec![], vec![total])
    }

    /// Extracts one element of a rank-1 tensor as a scalar.
    pub fn select(&mut self, input: ValueId, index: usize) -> Result<ValueId> {
        let shape = self.shape(input);
        if shape.len() != 1 || index >= shape[0] {
            return Err(Error::Shape {
                op: "select",
                details: format!("index {index} invalid for shape {shape:?}"),
            });
        }
        let value = self.values(input)[index];
        Ok(self.push(Op::Select { input, index }, vec![], vec![value]))
    }

    /// Reverse sweep from a scalar target. Gradients accumulate additively
    /// across fan-out; earlier gradients on the tape are cleared first.
    pub fn backward(&mut self, target: ValueId) -> Result<()> {
        if !self.nodes[target.0].shape.is_empty() {
            return Err(Error::Shape {
                op: "backward",
                details: format!(
                    "target must be scalar, got shape {:?}",
                    self.nodes[target.0].shape
                ),
            });
        }
        for node in &mut self.nodes {
            node.grad = vec![0.0; node.values.len()];
        }
        self.nodes[target.0].grad[0] = 1.0;

        for i in (0..=target.0).rev() {
            // Temporarily take the node to appease the borrow checker while
            // writing into its input nodes.
            let grad = std::mem::take(&mut self.nodes[i].grad);
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Conv2d {
                    input,
                    kernels,
                    bias,
                    stride,
                    padding,
                } => {
                    let (input, kernels, bias) = (*input, *kernels, *bias);
                    let (stride, padding) = (*stride, *padding);
                    let in_shape = self.nodes[input.0].shape.clone();
                    let k_shape = self.nodes[kernels.0].shape.clone();
                    let out_shape = self.nodes[i].shape.clone();
                    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
                    let (f, kh, kw) = (k_shape[0], k_shape[2], k_shape[3]);
                    let (oh, ow) = (out_shape[1], out_shape[2]);

                    let x = self.nodes[input.0].values.clone();
                    let k = self.nodes[kernels.0].values.clone();
                    {
                        let gi = &mut self.nodes[input.0].grad;
                        let gk_len = f * c * kh * kw;
                        let mut gk = vec![0.0; gk_len];
                        let mut gb = vec![0.0; f];
                        for fi in 0..f {
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    let go = grad[fi * oh * ow + oy * ow + ox];
                                    if go == 0.0 {
                                        continue;
                                    }
                                    gb[fi] += go;
                                    for ci in 0..c {
                                        for ky in 0..kh {
                                            let iy =
                                                (oy * stride + ky) as isize - padding as isize;
                                            if iy < 0 || iy >= h as isize {
                                                continue;
                                            }
                                            for kx in 0..kw {
                                                let ix =
                                                    (ox * stride + kx) as isize - padding as isize;
                                                if ix < 0 || ix >= w as isize {
                                                    continue;
                                                }
                                                let xi =
                                                    ci * h * w + iy as usize * w + ix as usize;
                                                let ki = fi * c * kh * kw
                                                    + ci * kh * kw
                                                    + ky * kw
                                                    + kx;
                                                gi[xi] += go * k[ki];
                                                gk[ki] += go * x[xi];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        for (dst, src) in self.nodes[kernels.0].grad.iter_mut().zip(&gk) {
                            *dst += src;
                        }
                        for (dst, src) in self.nodes[bias.0].grad.iter_mut().zip(&gb) {
                            *dst += src;
                        }
                    }
                }
                Op::MaxPool2d { input, argmax } => {
                    let input = *input;
                    let argmax = argmax.clone();
                    let gi = &mut self.nodes[input.0].grad;
                    for (out_idx, &in_idx) in argmax.iter().enumerate() {
                        gi[in_idx] += grad[out_idx];
                    }
                }
                Op::Relu { input } => {
                    let input = *input;
                    let x = self.nodes[input.0].values.clone();
                    let gi = &mut self.nodes[input.0].grad;
                    for (j, &g) in grad.iter().enumerate() {
                        if x[j] > 0.0 {
                            gi[j] += g;
                        }
                    }
                }
                Op::Dense {
                    input,
                    weights,
                    bias,
                } => {
                    let (input, weights, bias) = (*input, *weights, *bias);
                    let n = self.nodes[input.0].values.len();
                    let x = self.nodes[input.0].values.clone();
                    let w = self.nodes[weights.0].values.clone();
                    for (row, &g) in grad.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        self.nodes[bias.0].grad[row] += g;
                        for col in 0..n {
                            self.nodes[weights.0].grad[row * n + col] += g * x[col];
                            self.nodes[input.0].grad[col] += g * w[row * n + col];
                        }
                    }
                }
                Op::Softmax { input } => {
                    let input = *input;
                    let y = self.nodes[i].values.clone();
                    let dot: f64 = grad.iter().zip(&y).map(|(g, yv)| g * yv).sum();
                    let gi = &mut self.nodes[input.0].grad;
                    for (j, yv) in y.iter().enumerate() {
                        gi[j] += yv * (grad[j] - dot);
                    }
                }
                Op::CrossEntropy { predicted, target } => {
                    let predicted = *predicted;
                    let target = target.clone();
                    let p = self.nodes[predicted.0].values.clone();
                    let gi = &mut self.nodes[predicted.0].grad;
                    for (j, &t) in target.iter().enumerate() {
                        gi[j] += grad[0] * (-t / (p[j] + CROSS_ENTROPY_CLAMP));
                    }
                }
                Op::Dropout { input, mask } => {
                    let input = *input;
                    let mask = mask.clone();
                    let gi = &mut self.nodes[input.0].grad;
                    for (j, &m) in mask.iter().enumerate() {
                        gi[j] += grad[j] * m;
                    }
                }
                Op::ConcatChannels { inputs } => {
                    let inputs = inputs.clone();
                    let mut offset = 0;
                    for id in inputs {
                        let len = self.nodes[id.0].values.len();
                        let gi = &mut self.nodes[id.0].grad;
                        for (dst, src) in gi.iter_mut().zip(&grad[offset..offset + len]) {
                            *dst += src;
                        }
                        offset += len;
                    }
                }
                Op::Flatten { input } => {
                    let input = *input;
                    let gi = &mut self.nodes[input.0].grad;
                    for (dst, src) in gi.iter_mut().zip(&grad) {
                        *dst += src;
                    }
                }
                Op::Add { lhs, rhs } => {
                    let (lhs, rhs) = (*lhs, *rhs);
                    for (dst, src) in self.nodes[lhs.0].grad.iter_mut().zip(&grad) {
                        *dst += src;
                    }
                    for (dst, src) in self.nodes[rhs.0].grad.iter_mut().zip(&grad) {
                        *dst += src;
                    }
                }
                Op::Mul { lhs, rhs } => {
                    let (lhs, rhs) = (*lhs, *rhs);
                    let a = self.nodes[lhs.0].values.clone();
                    let b = self.nodes[rhs.0].values.clone();
                    for (j, &g) in grad.iter().enumerate() {
                        self.nodes[lhs.0].grad[j] += g * b[j];
                        self.nodes[rhs.0].grad[j] += g * a[j];
                    }
                }
                Op::Scale { input, factor } => {
                    let (input, factor) = (*input, *factor);
                    let gi = &mut self.nodes[input.0].grad;
                    for (dst, src) in gi.iter_mut().zip(&grad) {
                        *dst += src * factor;
                    }
                }
                Op::Sum { input } => {
                    let input = *input;
                    let gi = &mut self.nodes[input.0].grad;
                    for dst in gi.iter_mut() {
                        *dst += grad[0];
                    }
                }
                Op::Select { input, index } => {
                    let (input, index) = (*input, *index);
                    self.nodes[input.0].grad[index] += grad[0];
                }
            }
            self.nodes[i].grad = grad;
        }
        Ok(())
    }
}
