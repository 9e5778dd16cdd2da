//! Frozen-backbone language adaptation for a flow-matching TTS model.
//!
//! A trainable character embedding followed by a ConvNeXt-1D stack produces
//! conditioning for a frozen velocity-field network. Only the adapter is ever
//! updated. The crate also carries the text codec with code-switch parsing,
//! the training loop, checkpoints, and objective evaluation metrics.

pub mod checkpoint;
pub mod codeswitch;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod text;
pub mod train;
