//! Merging the trainable Romanian path with the frozen English path.
//!
//! `h_R = ConvNeXt(E_R(x) ⊙ m_R)`, `h_E = E_TTS(x) ⊙ m_E`, `h_cs = h_R + h_E`.
//! The sum is taken everywhere, so after training the adapter also
//! contributes at English positions (it sees zeros there, not nothing).

use crate::model::{Adapter, FrozenBackbone, MelSample, ModelError};
use crate::nn::{Scalar, Tape, Tensor};
use crate::text::{parse_code_switch, CodeSwitchText, Language, Vocab};

/// Merged conditioning plus the language each row came from.
#[derive(Clone, Debug, PartialEq)]
pub struct MergedEmbedding<S = f32> {
    pub h_cs: Tensor<S>,
    pub provenance: Vec<Language>,
}

pub fn merge<S: Scalar>(
    text: &CodeSwitchText,
    adapter: &Adapter<S>,
    backbone: &FrozenBackbone<S>,
) -> Result<MergedEmbedding<S>, ModelError> {
    let len = text.mask.len();
    for seq_len in [text.romanian.len(), text.english.len()] {
        if seq_len != len {
            return Err(ModelError::MaskLength { mask: len, seq: seq_len });
        }
    }
    let to_weights = |v: Vec<u8>| -> Vec<S> { v.into_iter().map(|m| S::of(f64::from(m))).collect() };
    let romanian = to_weights(text.mask.romanian());
    let english = to_weights(text.mask.english());

    let mut tape = Tape::new();
    let bound_adapter = adapter.bind(&mut tape);
    let bound_backbone = backbone.bind(&mut tape);
    let h_r = adapter.forward_on(&mut tape, &bound_adapter, &text.romanian.ids, Some(&romanian))?;
    let h_e = backbone.embed_frozen_on(&mut tape, &bound_backbone, &text.english.ids, &english)?;
    let h_cs = tape.add(h_r, h_e)?;
    Ok(MergedEmbedding {
        h_cs: tape.value(h_cs).clone(),
        provenance: text.mask.languages().to_vec(),
    })
}

/// Both vocabularies needed to parse mixed text.
#[derive(Clone, Copy, Debug)]
pub struct Vocabs<'a> {
    pub romanian: &'a Vocab,
    pub english: &'a Vocab,
}

/// Parse, pad to `frames_per_char` frames per character, merge, sample.
pub fn synthesize_cs<S: Scalar>(
    text: &str,
    vocabs: Vocabs<'_>,
    adapter: &Adapter<S>,
    backbone: &FrozenBackbone<S>,
    frames_per_char: usize,
    n_steps: usize,
    seed: u64,
) -> Result<MelSample<S>, ModelError> {
    let parsed = parse_code_switch(text, vocabs.romanian, vocabs.english)?;
    let n_frames = parsed.len() * frames_per_char.max(1);
    let padded = parsed.pad_to_frames(n_frames, vocabs.romanian, vocabs.english)?;
    let merged = merge(&padded, adapter, backbone)?;
    backbone.sample(&merged.h_cs, n_frames, n_steps, seed)
}

/// Monolingual path: encode against the adapter vocabulary, pad, run the
/// adapter alone, sample.
pub fn synthesize<S: Scalar>(
    text: &str,
    vocab: &Vocab,
    adapter: &Adapter<S>,
    backbone: &FrozenBackbone<S>,
    frames_per_char: usize,
    n_steps: usize,
    seed: u64,
) -> Result<MelSample<S>, ModelError> {
    let seq = vocab.encode(text)?;
    let n_frames = seq.len() * frames_per_char.max(1);
    let padded = seq.pad_to_frames(n_frames, vocab)?;
    let h = adapter.forward(&padded, None)?;
    backbone.sample(&h, n_frames, n_steps, seed)
}
