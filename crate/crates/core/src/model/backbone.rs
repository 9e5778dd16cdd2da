use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::flow::MelSample;
use super::{normal_tensor, seeded_rng, BlockInit, BoundBlock, ConvNextBlock, ModelError};
use crate::nn::{Parameter, Scalar, Tape, Tensor, Var};
use crate::text::{LanguageMask, TextSequence};

/// Frozen velocity-field network configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    pub vocab_size: usize,
    pub text_dim: usize,
    pub mel_dim: usize,
    pub time_dim: usize,
    pub n_blocks: usize,
    pub kernel_size: usize,
    pub expansion_factor: usize,
    pub seed: u64,
    /// Coefficient of the `−x_t` term added to the head output.
    pub mel_skip: f64,
}

impl BackboneConfig {
    /// Desk defaults: 16 mel channels, 2 mixer blocks, 16-dim time embedding.
    pub fn desk(vocab_size: usize, text_dim: usize) -> Self {
        Self {
            vocab_size,
            text_dim,
            mel_dim: 16,
            time_dim: 16,
            n_blocks: 2,
            kernel_size: 7,
            expansion_factor: 2,
            seed: 0xF5,
            mel_skip: 1.0,
        }
    }

    pub fn channels(&self) -> usize {
        self.mel_dim + self.text_dim + self.time_dim
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.vocab_size == 0 || self.text_dim == 0 || self.mel_dim == 0 {
            return fail("vocab_size, text_dim and mel_dim must be positive");
        }
        if !self.time_dim.is_multiple_of(2) {
            return fail("time_dim must be even");
        }
        if self.kernel_size.is_multiple_of(2) {
            return fail("kernel_size must be odd");
        }
        if self.expansion_factor == 0 {
            return fail("expansion_factor must be positive");
        }
        Ok(())
    }
}

/// Immutable stand-in for the pretrained TTS model.
///
/// Velocity prediction: the noisy mel, the text conditioning and a sinusoidal
/// time embedding are concatenated along channels, mixed by ConvNeXt blocks,
/// and projected to mel channels; `mel_skip · x_t` is subtracted so the
/// network points from the current state toward its text-driven estimate.
///
/// There is no mutable access to the parameters.
#[derive(Clone, Debug)]
pub struct FrozenBackbone<S = f32> {
    config: BackboneConfig,
    text_embedding: Parameter<S>,
    blocks: Vec<ConvNextBlock<S>>,
    head_weight: Parameter<S>,
    head_bias: Parameter<S>,
    hash_at_load: String,
}

#[derive(Clone, Debug)]
pub struct BoundBackbone {
    text_embedding: Var,
    blocks: Vec<BoundBlock>,
    head_weight: Var,
    head_bias: Var,
}

impl FrozenBackbone<f32> {
    pub fn from_seed(config: BackboneConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let channels = config.channels();
        let text_embedding = Parameter::new(
            "text_embedding.weight",
            normal_tensor(&mut rng, &[config.vocab_size, config.text_dim], 1.0),
            false,
        );
        let init = BlockInit {
            weight_std: None,
            project_gain: 0.5,
            trainable: false,
        };
        let blocks = (0..config.n_blocks)
            .map(|i| {
                ConvNextBlock::init(
                    &format!("mixer.{i}"),
                    channels,
                    config.kernel_size,
                    config.expansion_factor,
                    init,
                    &mut rng,
                )
            })
            .collect();
        let head_weight = Parameter::new(
            "head.weight",
            normal_tensor(&mut rng, &[channels, config.mel_dim], 1.0 / (channels as f64).sqrt()),
            false,
        );
        let head_bias = Parameter::new("head.bias", Tensor::zeros(&[config.mel_dim]), false);
        Ok(Self::assemble(config, text_embedding, blocks, head_weight, head_bias))
    }
}

impl<S: Scalar> FrozenBackbone<S> {
    fn assemble(
        config: BackboneConfig,
        text_embedding: Parameter<S>,
        blocks: Vec<ConvNextBlock<S>>,
        head_weight: Parameter<S>,
        head_bias: Parameter<S>,
    ) -> Self {
        let mut out = Self {
            config,
            text_embedding,
            blocks,
            head_weight,
            head_bias,
            hash_at_load: String::new(),
        };
        out.hash_at_load = out.content_hash();
        out
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut out = vec![&self.text_embedding];
        for block in &self.blocks {
            out.extend(block.parameters());
        }
        out.extend([&self.head_weight, &self.head_bias]);
        out
    }

    pub fn text_embedding(&self) -> &Tensor<S> {
        &self.text_embedding.tensor
    }

    /// SHA-256 over every parameter's name, shape and little-endian bytes.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for p in self.parameters() {
            hasher.update((p.name.len() as u64).to_le_bytes());
            hasher.update(p.name.as_bytes());
            hasher.update((p.tensor.rank() as u64).to_le_bytes());
            for d in p.tensor.shape() {
                hasher.update((*d as u64).to_le_bytes());
            }
            hasher.update(p.tensor.le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Hash computed when the backbone was built.
    pub fn hash_at_load(&self) -> &str {
        &self.hash_at_load
    }

    pub fn cast<T: Scalar>(&self) -> FrozenBackbone<T> {
        FrozenBackbone::assemble(
            self.config.clone(),
            self.text_embedding.cast(),
            self.blocks.iter().map(ConvNextBlock::cast).collect(),
            self.head_weight.cast(),
            self.head_bias.cast(),
        )
    }

    /// Registers all weights as constants: gradients flow through them to
    /// the conditioning but are never kept for them.
    pub fn bind(&self, tape: &mut Tape<S>) -> BoundBackbone {
        BoundBackbone {
            text_embedding: self.text_embedding.bind(tape),
            blocks: self.blocks.iter().map(|b| b.bind(tape)).collect(),
            head_weight: self.head_weight.bind(tape),
            head_bias: self.head_bias.bind(tape),
        }
    }

    /// `E_TTS(ids) ⊙ m_E`: embed the whole sequence, then zero rows outside
    /// the English mask.
    pub fn embed_frozen_on(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundBackbone,
        ids: &[usize],
        english: &[S],
    ) -> Result<Var, ModelError> {
        if english.len() != ids.len() {
            return Err(ModelError::MaskLength {
                mask: english.len(),
                seq: ids.len(),
            });
        }
        let e = tape.embedding(bound.text_embedding, ids)?;
        Ok(tape.mask_rows(e, english)?)
    }

    pub fn embed_frozen(&self, seq: &TextSequence, mask: &LanguageMask) -> Result<Tensor<S>, ModelError> {
        let english: Vec<S> = mask.english().into_iter().map(|v| S::of(f64::from(v))).collect();
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = self.embed_frozen_on(&mut tape, &bound, &seq.ids, &english)?;
        Ok(tape.value(out).clone())
    }

    /// Sinusoidal embedding of `t`, repeated over `rows`.
    fn time_embedding(&self, t: S, rows: usize) -> Tensor<S> {
        let half = self.config.time_dim / 2;
        let mut row = Vec::with_capacity(self.config.time_dim);
        let scaled = t.to_f64_lossy() * 1000.0;
        let freqs: Vec<f64> = (0..half)
            .map(|i| (-(10000f64.ln()) * i as f64 / half.max(1) as f64).exp())
            .collect();
        row.extend(freqs.iter().map(|f| S::of((scaled * f).sin())));
        row.extend(freqs.iter().map(|f| S::of((scaled * f).cos())));
        Tensor::from_fn(rows, self.config.time_dim, |_, c| row[c])
    }

    pub fn velocity_on(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundBackbone,
        xt: Var,
        t: S,
        h_text: Var,
    ) -> Result<Var, ModelError> {
        if !(t >= S::zero() && t <= S::one()) {
            return Err(ModelError::TimeOutOfRange(t.to_f64_lossy()));
        }
        let rows = tape.value(xt).rows();
        let time = tape.constant(self.time_embedding(t, rows));
        let mut x = tape.concat_cols(&[xt, h_text, time])?;
        for (block, vars) in self.blocks.iter().zip(&bound.blocks) {
            x = block.forward(tape, vars, x)?;
        }
        let head = tape.linear(x, bound.head_weight, bound.head_bias)?;
        let skip = tape.scale(xt, S::of(self.config.mel_skip));
        Ok(tape.sub(head, skip)?)
    }

    pub fn predict_velocity(&self, xt: &Tensor<S>, t: S, h_text: &Tensor<S>) -> Result<Tensor<S>, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let x = tape.constant(xt.clone());
        let h = tape.constant(h_text.clone());
        let v = self.velocity_on(&mut tape, &bound, x, t, h)?;
        Ok(tape.value(v).clone())
    }

    /// Euler integration of the velocity field from noise at `t = 0` to `t = 1`.
    pub fn sample(&self, h_text: &Tensor<S>, n_frames: usize, n_steps: usize, seed: u64) -> Result<MelSample<S>, ModelError> {
        if n_steps == 0 {
            return Err(ModelError::Config("n_steps must be at least 1".into()));
        }
        if h_text.rows() != n_frames || h_text.rank() != 2 {
            return Err(ModelError::Nn(crate::nn::NnError::Dimension {
                op: "sample",
                axis: "frames",
                expected: n_frames,
                got: h_text.rows(),
            }));
        }
        let mut rng = seeded_rng(seed);
        let mut x: Tensor<S> = normal_tensor(&mut rng, &[n_frames, self.config.mel_dim], 1.0);
        let dt = S::one() / S::of(n_steps as f64);
        for i in 0..n_steps {
            let t = S::of(i as f64) / S::of(n_steps as f64);
            let v = self.predict_velocity(&x, t, h_text)?;
            x = x.zip_map(&v, |a, b| a + dt * b)?;
        }
        MelSample::new(x)
    }
}
