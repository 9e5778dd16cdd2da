use serde::{Deserialize, Serialize};

use super::{normal_tensor, seeded_rng, BlockInit, BoundBlock, ConvNextBlock, ModelError};
use crate::nn::{Parameter, Scalar, Tape, Tensor, Var};
use crate::text::{LanguageMask, TextSequence};

const INIT_STD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub n_blocks: usize,
    pub kernel_size: usize,
    pub expansion_factor: usize,
    pub seed: u64,
    /// Linear map `embed_dim → hidden_dim` ahead of the blocks.
    #[serde(default)]
    pub input_projection: bool,
}

impl AdapterConfig {
    /// Small CPU-trainable defaults: 32 channels, 2 blocks, kernel 7.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 32,
            hidden_dim: 32,
            n_blocks: 2,
            kernel_size: 7,
            expansion_factor: 2,
            seed: 0,
            input_projection: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return fail("vocab_size, embed_dim and hidden_dim must be positive");
        }
        if self.embed_dim != self.hidden_dim && !self.input_projection {
            return fail("embed_dim differs from hidden_dim without an input projection");
        }
        if self.kernel_size.is_multiple_of(2) {
            return fail("kernel_size must be odd");
        }
        if self.n_blocks == 0 {
            return fail("n_blocks must be at least 1");
        }
        if self.expansion_factor == 0 {
            return fail("expansion_factor must be positive");
        }
        Ok(())
    }

    /// Positions farther than this from `t` cannot influence output `t`.
    pub fn receptive_radius(&self) -> usize {
        self.n_blocks * (self.kernel_size - 1) / 2
    }
}

/// Romanian input adapter: embedding table followed by a ConvNeXt-1D stack.
#[derive(Clone, Debug, PartialEq)]
pub struct Adapter<S = f32> {
    config: AdapterConfig,
    pub embedding: Parameter<S>,
    pub input_projection: Option<(Parameter<S>, Parameter<S>)>,
    pub blocks: Vec<ConvNextBlock<S>>,
}

/// Adapter parameters registered on one tape, in [`Adapter::parameters`] order.
#[derive(Clone, Debug)]
pub struct BoundAdapter {
    embedding: Var,
    input_projection: Option<(Var, Var)>,
    blocks: Vec<BoundBlock>,
}

impl BoundAdapter {
    pub fn vars(&self) -> Vec<Var> {
        let mut out = vec![self.embedding];
        if let Some((w, b)) = self.input_projection {
            out.extend([w, b]);
        }
        for block in &self.blocks {
            out.extend_from_slice(block.vars());
        }
        out
    }
}

impl Adapter<f32> {
    /// Seeded initialization. Project maps start at zero so the stack is the
    /// identity and the adapter initially outputs its raw embeddings.
    pub fn new(config: AdapterConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let embedding = Parameter::new(
            "embedding.weight",
            normal_tensor(&mut rng, &[config.vocab_size, config.embed_dim], INIT_STD),
            true,
        );
        let input_projection = config.input_projection.then(|| {
            (
                Parameter::new(
                    "input_proj.weight",
                    normal_tensor(&mut rng, &[config.embed_dim, config.hidden_dim], INIT_STD),
                    true,
                ),
                Parameter::new("input_proj.bias", Tensor::zeros(&[config.hidden_dim]), true),
            )
        });
        let init = BlockInit {
            weight_std: Some(INIT_STD),
            project_gain: 0.0,
            trainable: true,
        };
        let blocks = (0..config.n_blocks)
            .map(|i| {
                ConvNextBlock::init(
                    &format!("blocks.{i}"),
                    config.hidden_dim,
                    config.kernel_size,
                    config.expansion_factor,
                    init,
                    &mut rng,
                )
            })
            .collect();
        Ok(Self {
            config,
            embedding,
            input_projection,
            blocks,
        })
    }
}

impl<S: Scalar> Adapter<S> {
    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut out = vec![&self.embedding];
        if let Some((w, b)) = &self.input_projection {
            out.extend([w, b]);
        }
        for block in &self.blocks {
            out.extend(block.parameters());
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<S>> {
        let mut out = vec![&mut self.embedding];
        if let Some((w, b)) = &mut self.input_projection {
            out.push(w);
            out.push(b);
        }
        for block in &mut self.blocks {
            out.extend(block.parameters_mut());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|p| p.tensor.numel()).sum()
    }

    /// All parameter values concatenated in [`Adapter::parameters`] order.
    pub fn flatten(&self) -> Vec<S> {
        self.parameters()
            .iter()
            .flat_map(|p| p.tensor.data().iter().copied())
            .collect()
    }

    pub fn load_flat(&mut self, values: &[S]) -> Result<(), ModelError> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(ModelError::FlatLength {
                what: "adapter parameters",
                expected,
                got: values.len(),
            });
        }
        let mut offset = 0;
        for p in self.parameters_mut() {
            let n = p.tensor.numel();
            p.tensor.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> Adapter<T> {
        Adapter {
            config: self.config.clone(),
            embedding: self.embedding.cast(),
            input_projection: self
                .input_projection
                .as_ref()
                .map(|(w, b)| (w.cast(), b.cast())),
            blocks: self.blocks.iter().map(ConvNextBlock::cast).collect(),
        }
    }

    pub fn bind(&self, tape: &mut Tape<S>) -> BoundAdapter {
        BoundAdapter {
            embedding: self.embedding.bind(tape),
            input_projection: self
                .input_projection
                .as_ref()
                .map(|(w, b)| (w.bind(tape), b.bind(tape))),
            blocks: self.blocks.iter().map(|b| b.bind(tape)).collect(),
        }
    }

    /// `h0 = E_R(ids)`.
    pub fn embed_on(&self, tape: &mut Tape<S>, bound: &BoundAdapter, ids: &[usize]) -> Result<Var, ModelError> {
        Ok(tape.embedding(bound.embedding, ids)?)
    }

    /// Runs the block stack on `h0`. With a mask, rows where it is zero are
    /// zeroed before the first block.
    pub fn contextualize_on(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundAdapter,
        h0: Var,
        mask: Option<&[S]>,
    ) -> Result<Var, ModelError> {
        let mut x = match mask {
            Some(m) => tape.mask_rows(h0, m)?,
            None => h0,
        };
        if let Some((w, b)) = bound.input_projection {
            x = tape.linear(x, w, b)?;
        }
        for (block, vars) in self.blocks.iter().zip(&bound.blocks) {
            x = block.forward(tape, vars, x)?;
        }
        Ok(x)
    }

    pub fn forward_on(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundAdapter,
        ids: &[usize],
        mask: Option<&[S]>,
    ) -> Result<Var, ModelError> {
        let h0 = self.embed_on(tape, bound, ids)?;
        self.contextualize_on(tape, bound, h0, mask)
    }

    pub fn embed(&self, seq: &TextSequence) -> Result<Tensor<S>, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = self.embed_on(&mut tape, &bound, &seq.ids)?;
        Ok(tape.value(out).clone())
    }

    pub fn contextualize(&self, h0: &Tensor<S>, mask: Option<&LanguageMask>) -> Result<Tensor<S>, ModelError> {
        let mask = romanian_weights(mask, h0.rows())?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let x = tape.constant(h0.clone());
        let out = self.contextualize_on(&mut tape, &bound, x, mask.as_deref())?;
        Ok(tape.value(out).clone())
    }

    /// `ConvNeXt(E_R(seq))`, optionally restricted to Romanian positions.
    pub fn forward(&self, seq: &TextSequence, mask: Option<&LanguageMask>) -> Result<Tensor<S>, ModelError> {
        let mask = romanian_weights(mask, seq.len())?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = self.forward_on(&mut tape, &bound, &seq.ids, mask.as_deref())?;
        Ok(tape.value(out).clone())
    }
}

pub(crate) fn romanian_weights<S: Scalar>(
    mask: Option<&LanguageMask>,
    len: usize,
) -> Result<Option<Vec<S>>, ModelError> {
    mask.map(|m| {
        if m.len() != len {
            return Err(ModelError::MaskLength { mask: m.len(), seq: len });
        }
        Ok(m.romanian().into_iter().map(|v| S::of(f64::from(v))).collect())
    })
    .transpose()
}
