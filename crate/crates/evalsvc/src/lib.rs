//! Blind MUSHRA-style listening tests.
//!
//! A campaign is built from a manifest naming the task, the sentences and one
//! audio file per (sentence, system). Each listener gets every trial with the
//! stimuli in a listener-specific order under opaque keys, so nothing that
//! reaches the browser identifies a system. Ratings (integers 0–100) go to an
//! append-only JSON-lines log that is replayed on startup.

pub mod aggregate;
pub mod campaign;
pub mod http;
pub mod log;
pub mod service;

pub use aggregate::{aggregate, Aggregate, Cell, SystemSummary};
pub use campaign::{build_campaign, Campaign, CampaignManifest, Role, Stimulus, SystemEntry, Task, Trial};
pub use log::{LogRecord, RatingLog, ScoredStimulus};
pub use service::{assignment, Ack, Assignment, NextTrial, RatingSubmission, Service, StimulusView, TrialPayload};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid campaign manifest: {0}")]
    Manifest(String),
    #[error("missing audio files: {}", format_missing(.0))]
    MissingAudio(Vec<(usize, String)>),
    #[error("unknown campaign {0}")]
    UnknownCampaign(String),
    #[error("unknown listener {0}")]
    UnknownListener(String),
    #[error("unknown trial {0}")]
    UnknownTrial(String),
    #[error("unknown stimulus key {0}")]
    UnknownKey(String),
    #[error("score for {key} must be an integer in [0, 100], got {value}")]
    ScoreOutOfRange { key: String, value: String },
    #[error("stimulus {0} was not rated")]
    Unrated(String),
    #[error("corrupt log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
}

fn format_missing(missing: &[(usize, String)]) -> String {
    missing
        .iter()
        .map(|(sentence, system)| format!("(sentence {sentence}, system {system})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl EvalError {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        EvalError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
