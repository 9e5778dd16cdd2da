//! Character vocabulary, encoding, filler padding and code-switch parsing.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Control character that toggles the active language. Never embedded.
pub const SWITCH_CHAR: char = '~';

/// Default padding character; chosen so it never collides with text.
pub const DEFAULT_FILLER: char = '\u{2581}';

/// Lowercase and uppercase Romanian letters (both comma- and cedilla-below
/// variants of ș/ț), digits, and common punctuation.
pub fn romanian_charset() -> Vec<char> {
    let mut chars: Vec<char> = ('a'..='z').chain('A'..='Z').chain('0'..='9').collect();
    chars.extend("ăâîșțşţĂÂÎȘȚŞŢ".chars());
    chars.extend(" .,;:!?'\"-()…„”".chars());
    chars
}

/// Printable ASCII without the switch character: the frozen model's alphabet.
pub fn ascii_charset() -> Vec<char> {
    (0x20u8..=0x7e)
        .map(char::from)
        .filter(|c| *c != SWITCH_CHAR)
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error("charset is empty")]
    EmptyCharset,
    #[error("character {0:?} appears more than once in the charset")]
    DuplicateChar(char),
    #[error("the switch character '~' cannot be part of a vocabulary")]
    SwitchInVocab,
    #[error("character {ch:?} at position {position} is not in the vocabulary")]
    UnknownChar { ch: char, position: usize },
    #[error("text is empty after parsing")]
    Empty,
    #[error("token id {id} out of range for vocabulary of {size}")]
    BadId { id: usize, size: usize },
    #[error("cannot pad {len} tokens to {n_frames} frames")]
    TooLong { len: usize, n_frames: usize },
    #[error("vocabulary file: {0}")]
    Io(String),
}

/// Which language a position belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Romanian,
    English,
}

impl Language {
    pub fn toggled(self) -> Self {
        match self {
            Language::Romanian => Language::English,
            Language::English => Language::Romanian,
        }
    }
}

/// On-disk form: `{"chars": [...], "filler": "…"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabFile {
    pub chars: Vec<char>,
    pub filler: char,
}

/// Dense character-to-id map. Ids are assigned in code-point order.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    chars: Vec<char>,
    ids: HashMap<char, usize>,
    filler_id: usize,
}

impl Vocab {
    /// Builds a vocabulary from `charset`, adding `filler` if it is not already
    /// present. Case-sensitive.
    pub fn build(charset: &[char], filler: char) -> Result<Self, TextError> {
        if charset.is_empty() {
            return Err(TextError::EmptyCharset);
        }
        let mut set = BTreeSet::new();
        for &c in charset {
            if c == SWITCH_CHAR {
                return Err(TextError::SwitchInVocab);
            }
            if !set.insert(c) {
                return Err(TextError::DuplicateChar(c));
            }
        }
        if filler == SWITCH_CHAR {
            return Err(TextError::SwitchInVocab);
        }
        set.insert(filler);
        let chars: Vec<char> = set.into_iter().collect();
        let ids: HashMap<char, usize> = chars.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let filler_id = ids[&filler];
        Ok(Self {
            chars,
            ids,
            filler_id,
        })
    }

    pub fn romanian() -> Self {
        Self::build(&romanian_charset(), DEFAULT_FILLER).expect("builtin charset is valid")
    }

    pub fn ascii() -> Self {
        Self::build(&ascii_charset(), DEFAULT_FILLER).expect("builtin charset is valid")
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn filler_id(&self) -> usize {
        self.filler_id
    }

    pub fn filler(&self) -> char {
        self.chars[self.filler_id]
    }

    pub fn id(&self, c: char) -> Option<usize> {
        self.ids.get(&c).copied()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn contains(&self, c: char) -> bool {
        self.ids.contains_key(&c)
    }

    /// One id per character; `~` is skipped.
    pub fn encode(&self, text: &str) -> Result<TextSequence, TextError> {
        let mut ids = Vec::with_capacity(text.len());
        for (position, ch) in text.chars().enumerate() {
            if ch == SWITCH_CHAR {
                continue;
            }
            ids.push(self.id(ch).ok_or(TextError::UnknownChar { ch, position })?);
        }
        if ids.is_empty() {
            return Err(TextError::Empty);
        }
        Ok(TextSequence { ids })
    }

    /// Like [`Vocab::encode`] but maps unknown characters to the filler id.
    pub fn encode_lossy(&self, text: &str) -> Vec<usize> {
        text.chars()
            .filter(|c| *c != SWITCH_CHAR)
            .map(|c| self.id(c).unwrap_or(self.filler_id))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<String, TextError> {
        ids.iter()
            .map(|&id| {
                self.chars.get(id).copied().ok_or(TextError::BadId {
                    id,
                    size: self.len(),
                })
            })
            .collect()
    }

    pub fn to_file(&self) -> VocabFile {
        VocabFile {
            chars: self
                .chars
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != self.filler_id)
                .map(|(_, c)| *c)
                .collect(),
            filler: self.filler(),
        }
    }

    pub fn from_file(file: &VocabFile) -> Result<Self, TextError> {
        Self::build(&file.chars, file.filler)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("vocab serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, TextError> {
        let file: VocabFile = serde_json::from_str(json).map_err(|e| TextError::Io(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| TextError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }
}

/// Token ids of one utterance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextSequence {
    pub ids: Vec<usize>,
}

impl TextSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Extends with the filler id up to `n_frames` positions.
    pub fn pad_to_frames(&self, n_frames: usize, vocab: &Vocab) -> Result<TextSequence, TextError> {
        if n_frames < self.len() {
            return Err(TextError::TooLong {
                len: self.len(),
                n_frames,
            });
        }
        let mut ids = self.ids.clone();
        ids.resize(n_frames, vocab.filler_id());
        Ok(TextSequence { ids })
    }
}

/// Per-position language membership. `romanian[t] != english[t]` everywhere.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguageMask {
    languages: Vec<Language>,
}

impl LanguageMask {
    pub fn uniform(len: usize, language: Language) -> Self {
        Self {
            languages: vec![language; len],
        }
    }

    pub fn from_languages(languages: Vec<Language>) -> Self {
        Self { languages }
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn languages(&self) -> &[Language] {
        &self.languages
    }

    /// Indicator vector for `language` (1 where the position belongs to it).
    pub fn indicator(&self, language: Language) -> Vec<u8> {
        self.languages.iter().map(|l| u8::from(*l == language)).collect()
    }

    pub fn romanian(&self) -> Vec<u8> {
        self.indicator(Language::Romanian)
    }

    pub fn english(&self) -> Vec<u8> {
        self.indicator(Language::English)
    }

    /// Filler positions belong to the Romanian (adapter) path.
    pub fn pad_to_frames(&self, n_frames: usize) -> Result<LanguageMask, TextError> {
        if n_frames < self.len() {
            return Err(TextError::TooLong {
                len: self.len(),
                n_frames,
            });
        }
        let mut languages = self.languages.clone();
        languages.resize(n_frames, Language::Romanian);
        Ok(Self { languages })
    }
}

/// Result of parsing `~`-annotated text.
///
/// Every position is encoded against both vocabularies so either embedding
/// can be evaluated over the whole sequence and masked afterwards; characters
/// missing from a vocabulary fall back to its filler id.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeSwitchText {
    /// Ids in the adapter (Romanian) vocabulary.
    pub romanian: TextSequence,
    /// Ids in the frozen model's vocabulary.
    pub english: TextSequence,
    pub mask: LanguageMask,
}

impl CodeSwitchText {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Id each position is actually encoded with: Romanian ids on Romanian
    /// positions, frozen-vocabulary ids on English positions.
    pub fn active_ids(&self) -> Vec<usize> {
        self.mask
            .languages()
            .iter()
            .enumerate()
            .map(|(t, l)| match l {
                Language::Romanian => self.romanian.ids[t],
                Language::English => self.english.ids[t],
            })
            .collect()
    }

    pub fn pad_to_frames(
        &self,
        n_frames: usize,
        vocab_r: &Vocab,
        vocab_tts: &Vocab,
    ) -> Result<CodeSwitchText, TextError> {
        Ok(Self {
            romanian: self.romanian.pad_to_frames(n_frames, vocab_r)?,
            english: self.english.pad_to_frames(n_frames, vocab_tts)?,
            mask: self.mask.pad_to_frames(n_frames)?,
        })
    }
}

/// Parses text where each `~` flips between Romanian (the starting language)
/// and English. `~` produces no position.
pub fn parse_code_switch(text: &str, vocab_r: &Vocab, vocab_tts: &Vocab) -> Result<CodeSwitchText, TextError> {
    let mut active = Language::Romanian;
    let mut languages = Vec::new();
    let mut plain = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch == SWITCH_CHAR {
            active = active.toggled();
        } else {
            languages.push(active);
            plain.push(ch);
        }
    }
    if languages.is_empty() {
        return Err(TextError::Empty);
    }
    Ok(CodeSwitchText {
        romanian: TextSequence {
            ids: vocab_r.encode_lossy(&plain),
        },
        english: TextSequence {
            ids: vocab_tts.encode_lossy(&plain),
        },
        mask: LanguageMask::from_languages(languages),
    })
}
