//! Single-file checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  "TTSADPT\0"     8 bytes
//! version u32            currently 1
//! count   u32            number of sections
//! section*: name_len u32, name (utf-8), payload_len u64, payload
//! ```
//!
//! Sections: `train` (JSON), `vocab` (JSON), `adapter` (binary, see
//! [`encode_adapter`]), `backbone` (JSON with config, vocabulary and content
//! hash). The backbone weights are not stored; they are rebuilt from the seed
//! in the config and must hash to the recorded value.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Adapter, AdapterConfig, BackboneConfig, FrozenBackbone, ModelError};
use crate::nn::{Parameter, Tensor};
use crate::text::{TextError, Vocab, VocabFile};
use crate::train::TrainConfig;

pub const MAGIC: &[u8; 8] = b"TTSADPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint has no {0:?} section")]
    MissingSection(&'static str),
    #[error("backbone hash mismatch: checkpoint records {stored}, rebuilt weights hash to {computed}")]
    HashMismatch { stored: String, computed: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Text(#[from] TextError),
}

/// Training bookkeeping stored in the `train` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub config: TrainConfig,
    pub step: usize,
    pub loss_history: Vec<f32>,
    /// Frames generated per input character at synthesis time.
    pub frames_per_char: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneRecord {
    pub config: BackboneConfig,
    pub vocab: VocabFile,
    pub content_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub train: TrainRecord,
    pub vocab: Vocab,
    pub adapter: Adapter<f32>,
    pub backbone: BackboneRecord,
}

impl Checkpoint {
    pub fn new(train: TrainRecord, vocab: Vocab, adapter: Adapter<f32>, backbone: &FrozenBackbone<f32>, backbone_vocab: &Vocab) -> Self {
        Self {
            train,
            vocab,
            adapter,
            backbone: BackboneRecord {
                config: backbone.config().clone(),
                vocab: backbone_vocab.to_file(),
                content_hash: backbone.content_hash(),
            },
        }
    }

    /// Rebuilds the frozen backbone and refuses it unless it hashes to the
    /// recorded value.
    pub fn backbone(&self) -> Result<FrozenBackbone<f32>, CheckpointError> {
        let backbone = FrozenBackbone::from_seed(self.backbone.config.clone())?;
        let computed = backbone.content_hash();
        if computed != self.backbone.content_hash {
            return Err(CheckpointError::HashMismatch {
                stored: self.backbone.content_hash.clone(),
                computed,
            });
        }
        Ok(backbone)
    }

    pub fn backbone_vocab(&self) -> Result<Vocab, CheckpointError> {
        Ok(Vocab::from_file(&self.backbone.vocab)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let sections: [(&str, Vec<u8>); 4] = [
            ("train", serde_json::to_vec(&self.train).expect("record serializes")),
            ("vocab", self.vocab.to_json().into_bytes()),
            ("adapter", encode_adapter(&self.adapter)),
            ("backbone", serde_json::to_vec(&self.backbone).expect("record serializes")),
        ];
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for (name, payload) in &sections {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(payload);
        }
        out
    }

    /// Parses and validates, including the backbone hash check.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != MAGIC {
            return Err(CheckpointError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Format(format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut sections = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| CheckpointError::Format("section name is not utf-8".into()))?
                .to_string();
            let len = usize::try_from(r.u64()?).map_err(|_| CheckpointError::Format("section too large".into()))?;
            sections.insert(name, r.take(len)?);
        }
        if !r.is_done() {
            return Err(CheckpointError::Format("trailing bytes after last section".into()));
        }
        let get = |name: &'static str| sections.get(name).copied().ok_or(CheckpointError::MissingSection(name));
        let parse_json = |name: &'static str| -> Result<serde_json::Value, CheckpointError> {
            serde_json::from_slice(get(name)?).map_err(|e| CheckpointError::Format(format!("{name}: {e}")))
        };
        let train: TrainRecord = serde_json::from_value(parse_json("train")?)
            .map_err(|e| CheckpointError::Format(format!("train: {e}")))?;
        let vocab_file: VocabFile = serde_json::from_value(parse_json("vocab")?)
            .map_err(|e| CheckpointError::Format(format!("vocab: {e}")))?;
        let backbone: BackboneRecord = serde_json::from_value(parse_json("backbone")?)
            .map_err(|e| CheckpointError::Format(format!("backbone: {e}")))?;
        let checkpoint = Self {
            train,
            vocab: Vocab::from_file(&vocab_file)?,
            adapter: decode_adapter(get("adapter")?)?,
            backbone,
        };
        if checkpoint.adapter.config().vocab_size != checkpoint.vocab.len() {
            return Err(CheckpointError::Format(format!(
                "adapter vocab_size {} but vocabulary has {} entries",
                checkpoint.adapter.config().vocab_size,
                checkpoint.vocab.len()
            )));
        }
        checkpoint.backbone()?;
        Ok(checkpoint)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        // Write-then-rename so a crash never leaves a truncated checkpoint.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| io_err(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            CheckpointError::Format(m) => CheckpointError::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// `adapter` payload: u32 config length, config JSON, u32 parameter count,
/// then per parameter u32 name length, name, u32 rank, u64 dims, f32 data.
pub fn encode_adapter(adapter: &Adapter<f32>) -> Vec<u8> {
    let config = serde_json::to_vec(adapter.config()).expect("config serializes");
    let params = adapter.parameters();
    let mut out = Vec::new();
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.tensor.rank() as u32).to_le_bytes());
        for d in p.tensor.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        out.extend_from_slice(&p.tensor.le_bytes());
    }
    out
}

pub fn decode_adapter(bytes: &[u8]) -> Result<Adapter<f32>, CheckpointError> {
    let mut r = Reader::new(bytes);
    let config_len = r.u32()? as usize;
    let config: AdapterConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| CheckpointError::Format(format!("adapter config: {e}")))?;
    let mut adapter = Adapter::new(config)?;
    let count = r.u32()? as usize;
    let mut slots: Vec<&mut Parameter<f32>> = adapter.parameters_mut();
    if count != slots.len() {
        return Err(CheckpointError::Format(format!(
            "{count} parameter blobs, config implies {}",
            slots.len()
        )));
    }
    for slot in slots.iter_mut() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| CheckpointError::Format("parameter name is not utf-8".into()))?;
        if name != slot.name {
            return Err(CheckpointError::Format(format!("expected parameter {}, found {name}", slot.name)));
        }
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(usize::try_from(r.u64()?).map_err(|_| CheckpointError::Format("dimension too large".into()))?);
        }
        if shape != slot.tensor.shape() {
            return Err(CheckpointError::Format(format!(
                "{name}: stored shape {shape:?}, config implies {:?}",
                slot.tensor.shape()
            )));
        }
        let n = slot.tensor.numel();
        let raw = r.take(n * 4)?;
        for (dst, b) in slot.tensor.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
    }
    if !r.is_done() {
        return Err(CheckpointError::Format("trailing bytes in adapter section".into()));
    }
    Ok(adapter)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Writes a tensor as u32 rank, u32 dims, then little-endian f32 data.
pub fn write_tensor(path: &Path, tensor: &Tensor<f32>) -> Result<(), CheckpointError> {
    std::fs::write(path, tensor_bytes(tensor)).map_err(|e| io_err(path, e))
}

pub fn tensor_bytes(tensor: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * tensor.rank() + 4 * tensor.numel());
    out.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
    for d in tensor.shape() {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    out.extend_from_slice(&tensor.le_bytes());
    out
}

pub fn read_tensor(path: &Path) -> Result<Tensor<f32>, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut r = Reader::new(&bytes);
    let rank = r.u32()? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.u32()? as usize);
    }
    let n: usize = shape.iter().product();
    let data = r
        .take(n * 4)?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if !r.is_done() {
        return Err(CheckpointError::Format(format!("{}: trailing bytes", path.display())));
    }
    Tensor::new(shape, data).map_err(|e| CheckpointError::Format(e.to_string()))
}
