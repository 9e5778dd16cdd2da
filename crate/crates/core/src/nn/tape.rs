//! Reverse-mode differentiation over a linear tape.
//!
//! Every primitive appends one node holding its forward value and whatever it
//! needs for the backward pass. Nodes only ever refer to earlier nodes, so the
//! tape order is a topological order and backward is a single reverse sweep.

use super::{NnError, Scalar, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<S> {
    Leaf,
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    DepthwiseConv {
        input: Var,
        kernel: Var,
        bias: Var,
    },
    LayerNorm {
        input: Var,
        gain: Var,
        shift: Var,
        normed: Vec<S>,
        inv_std: Vec<S>,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Gelu {
        input: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale {
        input: Var,
        factor: S,
    },
    MaskRows {
        input: Var,
        mask: Vec<S>,
    },
    ConcatCols {
        inputs: Vec<(Var, usize)>,
    },
    SumSquaredError(Var, Var),
    Sum {
        input: Var,
    },
}

#[derive(Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    needs_grad: bool,
}

/// Record of applied primitives for one computation graph.
///
/// A tape is single-threaded; independent tapes share nothing and may live on
/// different threads.
#[derive(Debug, Default)]
pub struct Tape<S = f32> {
    nodes: Vec<Node<S>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
    shapes: Vec<Vec<usize>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, var: Var) -> Option<&Tensor<S>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros of its shape when the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Tensor<S> {
        match self.get(var) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }
}

fn gelu_parts<S: Scalar>(x: S) -> (S, S) {
    let c = S::of((2.0 / std::f64::consts::PI).sqrt());
    let a = S::of(0.044715);
    let half = S::of(0.5);
    let one = S::one();
    let u = c * (x + a * x * x * x);
    let th = u.tanh();
    let y = half * x * (one + th);
    let dy = half * (one + th) + half * x * (one - th * th) * c * (one + S::of(3.0) * a * x * x);
    (y, dy)
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor<S> {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].needs_grad
    }

    fn matrix_dims(&self, var: Var, op: &'static str) -> Result<(usize, usize), NnError> {
        let shape = self.value(var).shape();
        match shape {
            [r, c] => Ok((*r, *c)),
            _ => Err(NnError::Rank {
                op,
                expected: 2,
                shape: shape.to_vec(),
            }),
        }
    }

    fn vector_len(&self, var: Var, op: &'static str) -> Result<usize, NnError> {
        let shape = self.value(var).shape();
        match shape {
            [n] => Ok(*n),
            _ => Err(NnError::Rank {
                op,
                expected: 1,
                shape: shape.to_vec(),
            }),
        }
    }

    /// Adds an input tensor. Gradients are kept only when `requires_grad` is set.
    pub fn leaf(&mut self, value: Tensor<S>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.leaf(value, false)
    }

    /// Row lookup: `out[t] = table[ids[t]]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var, NnError> {
        let (vocab, dim) = self.matrix_dims(table, "embedding")?;
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            if id >= vocab {
                return Err(NnError::IndexOutOfRange { index: id, bound: vocab });
            }
            out.extend_from_slice(&src[id * dim..(id + 1) * dim]);
        }
        let value = Tensor::from_parts(vec![ids.len(), dim], out);
        let needs = self.needs(table);
        Ok(self.push(
            value,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            needs,
        ))
    }

    /// Per-channel temporal convolution with zero "same" padding.
    ///
    /// `input` is `T × C`, `kernel` is `C × k` with `k` odd, `bias` is `C`.
    pub fn conv1d_depthwise(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var, NnError> {
        let op = "conv1d_depthwise";
        let (t_len, channels) = self.matrix_dims(input, op)?;
        let (k_channels, k) = self.matrix_dims(kernel, op)?;
        let b_len = self.vector_len(bias, op)?;
        if k_channels != channels {
            return Err(NnError::Dimension {
                op,
                axis: "kernel channels",
                expected: channels,
                got: k_channels,
            });
        }
        if b_len != channels {
            return Err(NnError::Dimension {
                op,
                axis: "bias channels",
                expected: channels,
                got: b_len,
            });
        }
        if k % 2 == 0 {
            return Err(NnError::EvenKernel { size: k });
        }
        let radius = (k - 1) / 2;
        let x = self.value(input).data();
        let w = self.value(kernel).data();
        let b = self.value(bias).data();
        let mut out = Vec::with_capacity(t_len * channels);
        for t in 0..t_len {
            for c in 0..channels {
                let mut acc = b[c];
                for j in 0..k {
                    let src = t + j;
                    if src < radius || src - radius >= t_len {
                        continue;
                    }
                    acc += x[(src - radius) * channels + c] * w[c * k + j];
                }
                out.push(acc);
            }
        }
        let needs = self.needs(input) || self.needs(kernel) || self.needs(bias);
        Ok(self.push(
            Tensor::from_parts(vec![t_len, channels], out),
            Op::DepthwiseConv { input, kernel, bias },
            needs,
        ))
    }

    /// Normalizes each row over the channel axis, then applies `gain` and `shift`.
    pub fn layer_norm(&mut self, input: Var, gain: Var, shift: Var, eps: S) -> Result<Var, NnError> {
        let op = "layer_norm";
        let (rows, channels) = self.matrix_dims(input, op)?;
        for (var, axis) in [(gain, "gain channels"), (shift, "shift channels")] {
            let n = self.vector_len(var, op)?;
            if n != channels {
                return Err(NnError::Dimension {
                    op,
                    axis,
                    expected: channels,
                    got: n,
                });
            }
        }
        if channels == 0 {
            return Err(NnError::Dimension {
                op,
                axis: "channels",
                expected: 1,
                got: 0,
            });
        }
        let x = self.value(input).data();
        let g = self.value(gain).data();
        let s = self.value(shift).data();
        let n = S::of(channels as f64);
        let mut normed = Vec::with_capacity(rows * channels);
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(rows * channels);
        for r in 0..rows {
            let row = &x[r * channels..(r + 1) * channels];
            let mean = row.iter().copied().sum::<S>() / n;
            let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<S>() / n;
            let inv = S::one() / (var + eps).sqrt();
            inv_std.push(inv);
            for c in 0..channels {
                let z = (row[c] - mean) * inv;
                normed.push(z);
                out.push(z * g[c] + s[c]);
            }
        }
        let needs = self.needs(input) || self.needs(gain) || self.needs(shift);
        Ok(self.push(
            Tensor::from_parts(vec![rows, channels], out),
            Op::LayerNorm {
                input,
                gain,
                shift,
                normed,
                inv_std,
            },
            needs,
        ))
    }

    /// `input · weight + bias` with `input: T × in`, `weight: in × out`, `bias: out`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var, NnError> {
        let op = "linear";
        let (rows, fan_in) = self.matrix_dims(input, op)?;
        let (w_in, fan_out) = self.matrix_dims(weight, op)?;
        let b_len = self.vector_len(bias, op)?;
        if w_in != fan_in {
            return Err(NnError::Dimension {
                op,
                axis: "weight input features",
                expected: fan_in,
                got: w_in,
            });
        }
        if b_len != fan_out {
            return Err(NnError::Dimension {
                op,
                axis: "bias features",
                expected: fan_out,
                got: b_len,
            });
        }
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let b = self.value(bias).data();
        let mut out = Vec::with_capacity(rows * fan_out);
        for r in 0..rows {
            let start = out.len();
            out.extend_from_slice(b);
            let acc = &mut out[start..];
            for (i, &xv) in x[r * fan_in..(r + 1) * fan_in].iter().enumerate() {
                let w_row = &w[i * fan_out..(i + 1) * fan_out];
                for (a, &wv) in acc.iter_mut().zip(w_row) {
                    *a += xv * wv;
                }
            }
        }
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            Tensor::from_parts(vec![rows, fan_out], out),
            Op::Linear { input, weight, bias },
            needs,
        ))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, input: Var) -> Var {
        let value = self.value(input).map(|x| gelu_parts(x).0);
        let needs = self.needs(input);
        self.push(value, Op::Gelu { input }, needs)
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<(), NnError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NnError::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), needs))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape(a, b, "mul")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), needs))
    }

    pub fn scale(&mut self, input: Var, factor: S) -> Var {
        let value = self.value(input).map(|x| x * factor);
        let needs = self.needs(input);
        self.push(value, Op::Scale { input, factor }, needs)
    }

    /// Multiplies row `t` of a `T × C` matrix by `mask[t]`.
    pub fn mask_rows(&mut self, input: Var, mask: &[S]) -> Result<Var, NnError> {
        let (rows, cols) = self.matrix_dims(input, "mask_rows")?;
        if mask.len() != rows {
            return Err(NnError::Dimension {
                op: "mask_rows",
                axis: "rows",
                expected: rows,
                got: mask.len(),
            });
        }
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(rows * cols);
        for (r, &m) in mask.iter().enumerate() {
            out.extend(x[r * cols..(r + 1) * cols].iter().map(|v| *v * m));
        }
        let needs = self.needs(input);
        Ok(self.push(
            Tensor::from_parts(vec![rows, cols], out),
            Op::MaskRows {
                input,
                mask: mask.to_vec(),
            },
            needs,
        ))
    }

    /// Concatenates matrices with equal row counts along the channel axis.
    pub fn concat_cols(&mut self, inputs: &[Var]) -> Result<Var, NnError> {
        let first = *inputs.first().ok_or(NnError::Empty { op: "concat_cols" })?;
        let (rows, _) = self.matrix_dims(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let (r, c) = self.matrix_dims(v, "concat_cols")?;
            if r != rows {
                return Err(NnError::Dimension {
                    op: "concat_cols",
                    axis: "rows",
                    expected: rows,
                    got: r,
                });
            }
            widths.push((v, c));
        }
        let total: usize = widths.iter().map(|(_, c)| c).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &(v, c) in &widths {
                out.extend_from_slice(&self.value(v).data()[r * c..(r + 1) * c]);
            }
        }
        let needs = inputs.iter().any(|v| self.needs(*v));
        Ok(self.push(
            Tensor::from_parts(vec![rows, total], out),
            Op::ConcatCols { inputs: widths },
            needs,
        ))
    }

    /// `Σ (a − b)²` as a scalar.
    pub fn sum_squared_error(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape(a, b, "sum_squared_error")?;
        let total = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (*x - *y) * (*x - *y))
            .sum::<S>();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::scalar(total), Op::SumSquaredError(a, b), needs))
    }

    /// Mean squared error as a scalar.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let n = self.value(a).numel();
        if n == 0 {
            return Err(NnError::Empty { op: "mse" });
        }
        let sse = self.sum_squared_error(a, b)?;
        Ok(self.scale(sse, S::one() / S::of(n as f64)))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).data().iter().copied().sum::<S>();
        let needs = self.needs(input);
        self.push(Tensor::scalar(total), Op::Sum { input }, needs)
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Nodes that do not depend on any `requires_grad` leaf are skipped, so
    /// constants (frozen weights) pass gradient through to their consumers
    /// without accumulating a gradient of their own.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>, NnError> {
        let loss_value = self.value(loss);
        if loss_value.numel() != 1 {
            return Err(NnError::NotScalar {
                shape: loss_value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].needs_grad {
            grads[loss.0] = Some(vec![S::one()]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| {
                g.filter(|_| node.needs_grad)
                    .map(|data| Tensor::from_parts(node.value.shape().to_vec(), data))
            })
            .collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate<'g>(&self, grads: &'g mut [Option<Vec<S>>], var: Var) -> Option<&'g mut Vec<S>> {
        if !self.needs(var) {
            return None;
        }
        let slot = &mut grads[var.0];
        if slot.is_none() {
            *slot = Some(vec![S::zero(); self.nodes[var.0].value.numel()]);
        }
        slot.as_mut()
    }

    fn backprop_node(&self, idx: usize, g: &[S], grads: &mut [Option<Vec<S>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Embedding { table, ids } => {
                let dim = self.value(*table).cols();
                if let Some(gt) = self.accumulate(grads, *table) {
                    for (t, &id) in ids.iter().enumerate() {
                        for c in 0..dim {
                            gt[id * dim + c] += g[t * dim + c];
                        }
                    }
                }
            }
            Op::DepthwiseConv { input, kernel, bias } => {
                let x = self.value(*input);
                let (t_len, channels) = (x.rows(), x.cols());
                let w = self.value(*kernel).data();
                let k = self.value(*kernel).cols();
                let radius = (k - 1) / 2;
                let xd = x.data();
                if let Some(gx) = self.accumulate(grads, *input) {
                    for t in 0..t_len {
                        for j in 0..k {
                            let src = t + j;
                            if src < radius || src - radius >= t_len {
                                continue;
                            }
                            let s = src - radius;
                            for c in 0..channels {
                                gx[s * channels + c] += g[t * channels + c] * w[c * k + j];
                            }
                        }
                    }
                }
                if let Some(gw) = self.accumulate(grads, *kernel) {
                    for t in 0..t_len {
                        for j in 0..k {
                            let src = t + j;
                            if src < radius || src - radius >= t_len {
                                continue;
                            }
                            let s = src - radius;
                            for c in 0..channels {
                                gw[c * k + j] += g[t * channels + c] * xd[s * channels + c];
                            }
                        }
                    }
                }
                if let Some(gb) = self.accumulate(grads, *bias) {
                    for t in 0..t_len {
                        for c in 0..channels {
                            gb[c] += g[t * channels + c];
                        }
                    }
                }
            }
            Op::LayerNorm {
                input,
                gain,
                shift,
                normed,
                inv_std,
            } => {
                let channels = self.value(*input).cols();
                let rows = inv_std.len();
                let gd = self.value(*gain).data();
                if let Some(gg) = self.accumulate(grads, *gain) {
                    for r in 0..rows {
                        for c in 0..channels {
                            gg[c] += g[r * channels + c] * normed[r * channels + c];
                        }
                    }
                }
                if let Some(gs) = self.accumulate(grads, *shift) {
                    for r in 0..rows {
                        for c in 0..channels {
                            gs[c] += g[r * channels + c];
                        }
                    }
                }
                if let Some(gx) = self.accumulate(grads, *input) {
                    let n = S::of(channels as f64);
                    let mut gn = vec![S::zero(); channels];
                    for r in 0..rows {
                        let base = r * channels;
                        let mut mean_gn = S::zero();
                        let mut mean_gn_z = S::zero();
                        for c in 0..channels {
                            gn[c] = g[base + c] * gd[c];
                            mean_gn += gn[c];
                            mean_gn_z += gn[c] * normed[base + c];
                        }
                        mean_gn = mean_gn / n;
                        mean_gn_z = mean_gn_z / n;
                        for c in 0..channels {
                            gx[base + c] +=
                                inv_std[r] * (gn[c] - mean_gn - normed[base + c] * mean_gn_z);
                        }
                    }
                }
            }
            Op::Linear { input, weight, bias } => {
                let x = self.value(*input);
                let (rows, fan_in) = (x.rows(), x.cols());
                let w = self.value(*weight).data();
                let fan_out = self.value(*weight).cols();
                if let Some(gx) = self.accumulate(grads, *input) {
                    for r in 0..rows {
                        let g_row = &g[r * fan_out..(r + 1) * fan_out];
                        for i in 0..fan_in {
                            let w_row = &w[i * fan_out..(i + 1) * fan_out];
                            let mut acc = S::zero();
                            for (gv, wv) in g_row.iter().zip(w_row) {
                                acc += *gv * *wv;
                            }
                            gx[r * fan_in + i] += acc;
                        }
                    }
                }
                if let Some(gw) = self.accumulate(grads, *weight) {
                    let xd = x.data();
                    for r in 0..rows {
                        let g_row = &g[r * fan_out..(r + 1) * fan_out];
                        for i in 0..fan_in {
                            let xv = xd[r * fan_in + i];
                            for (gwv, gv) in gw[i * fan_out..(i + 1) * fan_out].iter_mut().zip(g_row) {
                                *gwv += xv * *gv;
                            }
                        }
                    }
                }
                if let Some(gb) = self.accumulate(grads, *bias) {
                    for r in 0..rows {
                        for o in 0..fan_out {
                            gb[o] += g[r * fan_out + o];
                        }
                    }
                }
            }
            Op::Gelu { input } => {
                let x = self.value(*input).data();
                if let Some(gx) = self.accumulate(grads, *input) {
                    for (i, xv) in x.iter().enumerate() {
                        gx[i] += g[i] * gelu_parts(*xv).1;
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = self.accumulate(grads, v) {
                        gv.iter_mut().zip(g).for_each(|(d, s)| *d += *s);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.accumulate(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(d, s)| *d += *s);
                }
                if let Some(gb) = self.accumulate(grads, *b) {
                    gb.iter_mut().zip(g).for_each(|(d, s)| *d -= *s);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(ga) = self.accumulate(grads, *a) {
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                }
                if let Some(gb) = self.accumulate(grads, *b) {
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
            }
            Op::Scale { input, factor } => {
                if let Some(gx) = self.accumulate(grads, *input) {
                    gx.iter_mut().zip(g).for_each(|(d, s)| *d += *s * *factor);
                }
            }
            Op::MaskRows { input, mask } => {
                let cols = self.value(*input).cols();
                if let Some(gx) = self.accumulate(grads, *input) {
                    for (r, &m) in mask.iter().enumerate() {
                        for c in 0..cols {
                            gx[r * cols + c] += g[r * cols + c] * m;
                        }
                    }
                }
            }
            Op::ConcatCols { inputs } => {
                let total: usize = inputs.iter().map(|(_, c)| c).sum();
                let rows = node.value.rows();
                let mut offset = 0;
                for &(v, c) in inputs {
                    if let Some(gv) = self.accumulate(grads, v) {
                        for r in 0..rows {
                            for j in 0..c {
                                gv[r * c + j] += g[r * total + offset + j];
                            }
                        }
                    }
                    offset += c;
                }
            }
            Op::SumSquaredError(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let two = S::of(2.0) * g[0];
                if let Some(ga) = self.accumulate(grads, *a) {
                    for i in 0..av.len() {
                        ga[i] += two * (av[i] - bv[i]);
                    }
                }
                if let Some(gb) = self.accumulate(grads, *b) {
                    for i in 0..av.len() {
                        gb[i] -= two * (av[i] - bv[i]);
                    }
                }
            }
            Op::Sum { input } => {
                if let Some(gx) = self.accumulate(grads, *input) {
                    gx.iter_mut().for_each(|d| *d += g[0]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Tensor<f64> {
        Tensor::new(vec![rows, cols], data.to_vec()).unwrap()
    }

    fn vec1(data: &[f64]) -> Tensor<f64> {
        Tensor::new(vec![data.len()], data.to_vec()).unwrap()
    }

    #[test]
    fn conv_identity_kernel() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(mat(3, 2, &[1.0, -2.0, 3.5, 0.25, -1.0, 7.0]));
        let k = tape.constant(Tensor::full(&[2, 1], 1.0));
        let b = tape.constant(Tensor::zeros(&[2]));
        let y = tape.conv1d_depthwise(x, k, b).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn conv_zero_input_gives_bias_rows() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[4, 3]));
        let k = tape.constant(Tensor::full(&[3, 5], 0.7));
        let b = tape.constant(vec1(&[0.5, -1.5, 2.0]));
        let y = tape.conv1d_depthwise(x, k, b).unwrap();
        for t in 0..4 {
            assert_eq!(tape.value(y).row(t), &[0.5, -1.5, 2.0]);
        }
    }

    #[test]
    fn conv_matches_hand_summation() {
        // x = [1, 2, 3], kernel = [10, 20, 30], bias = 0.5, zero padding:
        // y0 = 20*1 + 30*2 + 0.5 = 80.5
        // y1 = 10*1 + 20*2 + 30*3 + 0.5 = 140.5
        // y2 = 10*2 + 20*3 + 0.5 = 80.5
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(mat(3, 1, &[1.0, 2.0, 3.0]));
        let k = tape.constant(mat(1, 3, &[10.0, 20.0, 30.0]));
        let b = tape.constant(vec1(&[0.5]));
        let y = tape.conv1d_depthwise(x, k, b).unwrap();
        assert_eq!(tape.value(y).data(), &[80.5, 140.5, 80.5]);
    }

    #[test]
    fn conv_reports_offending_axis() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[3, 2]));
        let k = tape.constant(Tensor::zeros(&[3, 3]));
        let b = tape.constant(Tensor::zeros(&[2]));
        let err = tape.conv1d_depthwise(x, k, b).unwrap_err();
        assert!(matches!(err, NnError::Dimension { axis: "kernel channels", expected: 2, got: 3, .. }));

        let k = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[5]));
        let err = tape.conv1d_depthwise(x, k, b).unwrap_err();
        assert!(matches!(err, NnError::Dimension { axis: "bias channels", .. }));

        let k = tape.constant(Tensor::zeros(&[2, 4]));
        let b = tape.constant(Tensor::zeros(&[2]));
        assert!(matches!(tape.conv1d_depthwise(x, k, b), Err(NnError::EvenKernel { size: 4 })));
    }

    #[test]
    fn layer_norm_constant_row_is_zero() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(mat(1, 4, &[3.0; 4]));
        let g = tape.constant(Tensor::full(&[4], 1.0));
        let s = tape.constant(Tensor::zeros(&[4]));
        let y = tape.layer_norm(x, g, s, 1e-5).unwrap();
        assert!(tape.value(y).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn layer_norm_two_point_row() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(mat(1, 2, &[1.0, -1.0]));
        let g = tape.constant(Tensor::full(&[2], 1.0));
        let s = tape.constant(Tensor::zeros(&[2]));
        let y = tape.layer_norm(x, g, s, 1e-12).unwrap();
        let out = tape.value(y).data();
        assert!((out[0] - 1.0).abs() < 1e-10 && (out[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn layer_norm_zero_gain_gives_shift() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(mat(2, 3, &[1.0, 5.0, -2.0, 0.1, 0.2, 9.0]));
        let g = tape.constant(Tensor::zeros(&[3]));
        let s = tape.constant(Tensor::full(&[3], 0.75));
        let y = tape.layer_norm(x, g, s, 1e-5).unwrap();
        assert!(tape.value(y).data().iter().all(|v| *v == 0.75));
    }

    #[test]
    fn layer_norm_output_is_standardized() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(mat(2, 4, &[0.3, -1.2, 4.0, 2.2, 10.0, 11.0, 9.5, 8.0]));
        let g = tape.constant(Tensor::full(&[4], 1.0));
        let s = tape.constant(Tensor::zeros(&[4]));
        let y = tape.layer_norm(x, g, s, 1e-12).unwrap();
        for r in 0..2 {
            let row = tape.value(y).row(r);
            let mean: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(3.0), true);
        let y = tape.mul(x, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.wrt(x).item().unwrap(), 6.0);
    }

    #[test]
    fn mse_with_itself_has_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(mat(2, 2, &[1.0, 2.0, -3.0, 4.0]), true);
        let loss = tape.mse(x, x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.wrt(x).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn disconnected_leaf_gets_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(2.0), true);
        let unused = tape.leaf(mat(1, 2, &[1.0, 1.0]), true);
        let y = tape.mul(x, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert!(grads.get(unused).is_none());
        assert_eq!(grads.wrt(unused), Tensor::zeros(&[1, 2]));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(&[2]), true);
        assert!(matches!(tape.backward(x), Err(NnError::NotScalar { .. })));
    }

    #[test]
    fn embedding_gradient_counts_ids() {
        let mut tape = Tape::<f64>::new();
        let table = tape.leaf(Tensor::zeros(&[3, 2]), true);
        let e = tape.embedding(table, &[0, 2, 0, 0]).unwrap();
        let s = tape.sum(e);
        let g = tape.backward(s).unwrap().wrt(table);
        assert_eq!(g.data(), &[3.0, 3.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn embedding_rejects_large_id() {
        let mut tape = Tape::<f64>::new();
        let table = tape.leaf(Tensor::zeros(&[3, 2]), true);
        assert!(matches!(
            tape.embedding(table, &[3]),
            Err(NnError::IndexOutOfRange { index: 3, bound: 3 })
        ));
    }

    #[test]
    fn frozen_leaf_passes_gradient_without_keeping_one() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(mat(1, 2, &[1.0, 2.0]), true);
        let w = tape.constant(mat(2, 1, &[3.0, -1.0]));
        let b = tape.constant(vec1(&[0.0]));
        let y = tape.linear(x, w, b).unwrap();
        let s = tape.sum(y);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.wrt(x).data(), &[3.0, -1.0]);
        assert!(grads.get(w).is_none());
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let run = || {
            let mut tape = Tape::<f32>::new();
            let x = tape.constant(Tensor::from_fn(5, 3, |r, c| (r as f32 * 0.37 - c as f32).sin()));
            let k = tape.constant(Tensor::from_fn(3, 3, |r, c| (r + c) as f32 * 0.1));
            let b = tape.constant(Tensor::full(&[3], 0.2));
            let y = tape.conv1d_depthwise(x, k, b).unwrap();
            let g = tape.constant(Tensor::full(&[3], 1.1));
            let n = tape.layer_norm(y, g, b, 1e-5).unwrap();
            let a = tape.gelu(n);
            tape.value(a).clone()
        };
        assert!(run().bits_eq(&run()));
    }
}
