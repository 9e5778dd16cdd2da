//! Flow-matching training of the adapter against the frozen backbone.

mod batching;
mod corpus;
mod loop_;
mod optim;

pub use batching::batch_by_frames;
pub use corpus::{
    make_synthetic_corpus, read_mel, write_mel, CorpusEntry, CorpusManifest, MelHeader, SyntheticCorpusSpec,
    TrainingExample, TrainingSet,
};
pub use loop_::{train, TrainProgress};
pub use optim::AdamW;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;
use crate::text::TextError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("sample {id} has {frames} frames, more than the batch budget of {budget}")]
    OversizedSample { id: String, frames: usize, budget: usize },
    #[error("non-finite loss at step {step} on batch [{batch}]")]
    NonFiniteLoss { step: usize, batch: String },
    #[error("optimizer was handed frozen parameter {0}")]
    FrozenParameter(String),
    #[error("backbone content hash changed from {before} to {after}")]
    BackboneModified { before: String, after: String },
    #[error("invalid training configuration: {0}")]
    Config(String),
}

impl TrainError {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        TrainError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

/// Optimization settings. Defaults reproduce the reference recipe: lr 1e-4,
/// 40500 steps, 16384-frame batches capped at 128 samples, 50 warmup updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub warmup_updates: usize,
    pub frame_budget: usize,
    pub max_samples_per_batch: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Emit a checkpoint every this many steps; 0 disables periodic saves.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_steps: 40_500,
            warmup_updates: 50,
            frame_budget: 16_384,
            max_samples_per_batch: 128,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail("learning_rate must be finite and non-negative");
        }
        if self.frame_budget == 0 || self.max_samples_per_batch == 0 {
            return fail("frame_budget and max_samples_per_batch must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return fail("eps must be positive");
        }
        Ok(())
    }
}

/// Learning rate for update number `step` (1-based; step 0 is "before any
/// update"): linear ramp from 0 over `warmup_updates`, constant afterwards.
pub fn lr_at(step: usize, config: &TrainConfig) -> f64 {
    if config.warmup_updates == 0 || step >= config.warmup_updates {
        config.learning_rate
    } else {
        config.learning_rate * step as f64 / config.warmup_updates as f64
    }
}
