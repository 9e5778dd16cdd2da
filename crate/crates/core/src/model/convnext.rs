use rand::Rng;

use super::normal_tensor;
use crate::nn::{NnError, Parameter, Scalar, Tape, Tensor, Var};

const NORM_EPS: f64 = 1e-6;

/// Weight initialization for one block.
#[derive(Clone, Copy, Debug)]
pub struct BlockInit {
    /// Fixed std for all weights; `None` scales each weight by `1/sqrt(fan_in)`.
    pub weight_std: Option<f64>,
    /// Multiplier on the project map's std; `0.0` makes the block an identity.
    pub project_gain: f64,
    pub trainable: bool,
}

/// Residual ConvNeXt-1D block:
/// `x + Project(GELU(Expand(Norm(DepthwiseConv(x)))))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNextBlock<S = f32> {
    pub dw_kernel: Parameter<S>,
    pub dw_bias: Parameter<S>,
    pub norm_gain: Parameter<S>,
    pub norm_shift: Parameter<S>,
    pub expand_weight: Parameter<S>,
    pub expand_bias: Parameter<S>,
    pub project_weight: Parameter<S>,
    pub project_bias: Parameter<S>,
}

#[derive(Clone, Debug)]
pub struct BoundBlock {
    vars: [Var; 8],
}

impl BoundBlock {
    pub fn vars(&self) -> &[Var; 8] {
        &self.vars
    }
}

impl ConvNextBlock<f32> {
    pub fn init<R: Rng>(
        prefix: &str,
        channels: usize,
        kernel_size: usize,
        expansion: usize,
        init: BlockInit,
        rng: &mut R,
    ) -> Self {
        let hidden = channels * expansion;
        let std = |fan_in: usize| init.weight_std.unwrap_or(1.0 / (fan_in as f64).sqrt());
        let p = |name: &str, t: Tensor<f32>| Parameter::new(format!("{prefix}.{name}"), t, init.trainable);
        let dw_kernel = normal_tensor(rng, &[channels, kernel_size], std(kernel_size));
        let expand = normal_tensor(rng, &[channels, hidden], std(channels));
        let project = if init.project_gain == 0.0 {
            Tensor::zeros(&[hidden, channels])
        } else {
            normal_tensor(rng, &[hidden, channels], std(hidden) * init.project_gain)
        };
        Self {
            dw_kernel: p("dwconv.weight", dw_kernel),
            dw_bias: p("dwconv.bias", Tensor::zeros(&[channels])),
            norm_gain: p("norm.gain", Tensor::full(&[channels], 1.0)),
            norm_shift: p("norm.shift", Tensor::zeros(&[channels])),
            expand_weight: p("expand.weight", expand),
            expand_bias: p("expand.bias", Tensor::zeros(&[hidden])),
            project_weight: p("project.weight", project),
            project_bias: p("project.bias", Tensor::zeros(&[channels])),
        }
    }
}

impl<S: Scalar> ConvNextBlock<S> {
    pub fn parameters(&self) -> [&Parameter<S>; 8] {
        [
            &self.dw_kernel,
            &self.dw_bias,
            &self.norm_gain,
            &self.norm_shift,
            &self.expand_weight,
            &self.expand_bias,
            &self.project_weight,
            &self.project_bias,
        ]
    }

    pub fn parameters_mut(&mut self) -> [&mut Parameter<S>; 8] {
        [
            &mut self.dw_kernel,
            &mut self.dw_bias,
            &mut self.norm_gain,
            &mut self.norm_shift,
            &mut self.expand_weight,
            &mut self.expand_bias,
            &mut self.project_weight,
            &mut self.project_bias,
        ]
    }

    pub fn bind(&self, tape: &mut Tape<S>) -> BoundBlock {
        BoundBlock {
            vars: self.parameters().map(|p| p.bind(tape)),
        }
    }

    pub fn forward(&self, tape: &mut Tape<S>, bound: &BoundBlock, x: Var) -> Result<Var, NnError> {
        let [dw_k, dw_b, gain, shift, ew, eb, pw, pb] = bound.vars;
        let h = tape.conv1d_depthwise(x, dw_k, dw_b)?;
        let h = tape.layer_norm(h, gain, shift, S::of(NORM_EPS))?;
        let h = tape.linear(h, ew, eb)?;
        let h = tape.gelu(h);
        let h = tape.linear(h, pw, pb)?;
        tape.add(x, h)
    }

    pub fn cast<T: Scalar>(&self) -> ConvNextBlock<T> {
        let [a, b, c, d, e, f, g, h] = self.parameters().map(|p| p.cast());
        ConvNextBlock {
            dw_kernel: a,
            dw_bias: b,
            norm_gain: c,
            norm_shift: d,
            expand_weight: e,
            expand_bias: f,
            project_weight: g,
            project_bias: h,
        }
    }
}
