use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::{normal_tensor, seeded_rng};
use crate::nn::Tensor;
use crate::text::{TextSequence, Vocab, SWITCH_CHAR};

/// One line of the JSON-lines manifest. `mel_path` is relative to the
/// manifest's directory unless absolute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub id: String,
    pub text: String,
    pub mel_path: String,
    pub n_frames: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<CorpusEntry>,
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn read(path: &Path) -> Result<Self, TrainError> {
        let raw = fs::read_to_string(path).map_err(|e| TrainError::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CorpusEntry = serde_json::from_str(line)
                .map_err(|e| TrainError::io(path, format!("line {}: {e}", lineno + 1)))?;
            if entry.text.is_empty() {
                return Err(TrainError::io(path, format!("line {}: empty text", lineno + 1)));
            }
            entries.push(entry);
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { entries, base_dir })
    }

    pub fn write(&self, path: &Path) -> Result<(), TrainError> {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| TrainError::io(path, e))
    }

    pub fn mel_path(&self, entry: &CorpusEntry) -> PathBuf {
        self.base_dir.join(&entry.mel_path)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MelHeader {
    pub frames: usize,
    pub channels: usize,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `path` (raw little-endian f32) and `path.json` ({frames, channels}).
pub fn write_mel(path: &Path, mel: &Tensor<f32>) -> Result<(), TrainError> {
    if mel.rank() != 2 {
        return Err(TrainError::Format(format!("mel must be rank 2, got {:?}", mel.shape())));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
    }
    fs::write(path, mel.le_bytes()).map_err(|e| TrainError::io(path, e))?;
    let header = MelHeader {
        frames: mel.rows(),
        channels: mel.cols(),
    };
    let side = sidecar(path);
    fs::write(&side, serde_json::to_string(&header).expect("header serializes")).map_err(|e| TrainError::io(&side, e))
}

pub fn read_mel(path: &Path) -> Result<Tensor<f32>, TrainError> {
    let side = sidecar(path);
    let header: MelHeader = serde_json::from_str(&fs::read_to_string(&side).map_err(|e| TrainError::io(&side, e))?)
        .map_err(|e| TrainError::io(&side, e))?;
    let bytes = fs::read(path).map_err(|e| TrainError::io(path, e))?;
    let expected = header.frames * header.channels * 4;
    if bytes.len() != expected {
        return Err(TrainError::io(
            path,
            format!("{} bytes, sidecar implies {expected}", bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Tensor::new(vec![header.frames, header.channels], data).map_err(|e| TrainError::io(path, e))
}

/// Parameters of the letter-to-sound toy corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusSpec {
    pub n_sentences: usize,
    pub charset: Vec<char>,
    pub d_mel: usize,
    pub frames_per_char: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub min_chars: usize,
    pub max_chars: usize,
    pub template_std: f64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            n_sentences: 20,
            charset: "abcdefghijklmnopqrstuvwxyzăâîșț ".chars().collect(),
            d_mel: 16,
            frames_per_char: 2,
            noise_std: 0.05,
            seed: 0,
            min_chars: 8,
            max_chars: 24,
            template_std: 1.0,
        }
    }
}

impl SyntheticCorpusSpec {
    fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.charset.is_empty() || self.charset.contains(&SWITCH_CHAR) {
            return fail("charset must be non-empty and must not contain the switch marker");
        }
        if self.d_mel == 0 || self.frames_per_char == 0 || self.n_sentences == 0 {
            return fail("n_sentences, d_mel and frames_per_char must be positive");
        }
        if self.min_chars == 0 || self.min_chars > self.max_chars {
            return fail("need 1 <= min_chars <= max_chars");
        }
        if !(self.noise_std >= 0.0 && self.template_std > 0.0) {
            return fail("noise_std must be >= 0 and template_std > 0");
        }
        Ok(())
    }

    /// The fixed per-character templates, one `d_mel` row per charset entry.
    pub fn templates(&self) -> Tensor<f32> {
        normal_tensor(&mut seeded_rng(self.seed), &[self.charset.len(), self.d_mel], self.template_std)
    }

    /// Clean mel for `text`: each character's template repeated
    /// `frames_per_char` times.
    pub fn render(&self, text: &str, templates: &Tensor<f32>) -> Result<Tensor<f32>, TrainError> {
        let mut data = Vec::new();
        let mut frames = 0;
        for ch in text.chars() {
            let idx = self
                .charset
                .iter()
                .position(|c| *c == ch)
                .ok_or_else(|| TrainError::Config(format!("character {ch:?} is not in the corpus charset")))?;
            for _ in 0..self.frames_per_char {
                data.extend_from_slice(templates.row(idx));
                frames += 1;
            }
        }
        Tensor::new(vec![frames, self.d_mel], data).map_err(|e| TrainError::Format(e.to_string()))
    }
}

/// Generates sentences, renders their mels under `out_dir/mels/`, and
/// writes `out_dir/manifest.jsonl`.
pub fn make_synthetic_corpus(spec: &SyntheticCorpusSpec, out_dir: &Path) -> Result<CorpusManifest, TrainError> {
    spec.validate()?;
    let templates = spec.templates();
    // Separate streams so the text does not depend on d_mel and vice versa.
    let mut text_rng = seeded_rng(spec.seed ^ 0x7465_7874);
    let mut noise_rng = seeded_rng(spec.seed ^ 0x6e6f_6973);

    let mut entries = Vec::with_capacity(spec.n_sentences);
    for i in 0..spec.n_sentences {
        let len = text_rng.random_range(spec.min_chars..=spec.max_chars);
        let text: String = (0..len)
            .map(|_| spec.charset[text_rng.random_range(0..spec.charset.len())])
            .collect();
        let clean = spec.render(&text, &templates)?;
        let noise: Tensor<f32> = normal_tensor(&mut noise_rng, clean.shape(), spec.noise_std);
        let mel = if spec.noise_std == 0.0 {
            clean
        } else {
            clean.zip_map(&noise, |a, b| a + b).expect("same shape")
        };
        let id = format!("syn{i:04}");
        let rel = format!("mels/{id}.mel");
        write_mel(&out_dir.join(&rel), &mel)?;
        entries.push(CorpusEntry {
            id,
            text,
            mel_path: rel,
            n_frames: mel.rows(),
        });
    }
    let manifest = CorpusManifest {
        entries,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.write(&out_dir.join("manifest.jsonl"))?;
    let spec_path = out_dir.join("corpus_spec.json");
    let mut f = fs::File::create(&spec_path).map_err(|e| TrainError::io(&spec_path, e))?;
    writeln!(f, "{}", serde_json::to_string_pretty(spec).expect("spec serializes")).map_err(|e| TrainError::io(&spec_path, e))?;
    Ok(manifest)
}

/// A loaded sample: text ids padded with the filler to the mel length.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub id: String,
    pub ids: TextSequence,
    pub target: Tensor<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub entries: Vec<CorpusEntry>,
    pub examples: Vec<TrainingExample>,
}

impl TrainingSet {
    /// Loads every mel and checks it against the manifest.
    pub fn load(manifest: &CorpusManifest, vocab: &Vocab) -> Result<Self, TrainError> {
        let mut examples = Vec::with_capacity(manifest.entries.len());
        for entry in &manifest.entries {
            let path = manifest.mel_path(entry);
            let target = read_mel(&path)?;
            if target.rows() != entry.n_frames {
                return Err(TrainError::io(
                    &path,
                    format!("{} frames on disk, manifest says {}", target.rows(), entry.n_frames),
                ));
            }
            let ids = vocab.encode(&entry.text)?.pad_to_frames(entry.n_frames, vocab)?;
            examples.push(TrainingExample {
                id: entry.id.clone(),
                ids,
                target,
            });
        }
        Ok(Self {
            entries: manifest.entries.clone(),
            examples,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn mel_dim(&self) -> Option<usize> {
        self.examples.first().map(|e| e.target.cols())
    }
}
