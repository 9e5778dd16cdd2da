//! Trainable adapter, frozen backbone and the flow-matching objective.

mod adapter;
mod backbone;
mod convnext;
mod flow;

pub use adapter::{Adapter, AdapterConfig, BoundAdapter};
pub use backbone::{BackboneConfig, BoundBackbone, FrozenBackbone};
pub use convnext::{BlockInit, BoundBlock, ConvNextBlock};
pub use flow::{cfm_loss, cfm_loss_with, CfmItem, FlowState, MelSample};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::nn::{NnError, Scalar, Tensor};
use crate::text::TextError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("flow time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("mask covers {mask} positions but the sequence has {seq}")]
    MaskLength { mask: usize, seq: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("{what}: expected {expected} values, got {got}")]
    FlatLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("mel sample: {0}")]
    BadMel(String),
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows × cols` tensor of independent `N(0, std²)` draws.
pub(crate) fn normal_tensor<S: Scalar, R: rand::Rng>(rng: &mut R, shape: &[usize], std: f64) -> Tensor<S> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            S::of(z * std)
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches draw count")
}
