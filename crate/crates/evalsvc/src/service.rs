//! Campaign state: listener registration, blinded trial serving and rating
//! intake. Transport-agnostic; [`crate::http`] wraps it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{aggregate, Aggregate};
use crate::campaign::Campaign;
use crate::log::{now_ms, LogRecord, RatingLog, ScoredStimulus};
use crate::EvalError;

/// What one listener sees for one trial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    /// Indices into the trial's canonical stimulus list, in presentation order.
    pub order: Vec<usize>,
    /// Opaque key for each presented stimulus, parallel to `order`.
    pub keys: Vec<String>,
    pub reference_key: Option<String>,
}

fn trial_rng(campaign: &Campaign, listener: &str, trial_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(campaign.seed.to_le_bytes());
    for part in [campaign.id.as_str(), listener, trial_id] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let digest = h.finalize();
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")))
}

fn opaque_key(rng: &mut ChaCha8Rng, forbidden: &[String]) -> String {
    loop {
        let key = format!("{:016x}", rng.random::<u64>());
        // Hex digits can spell short names such as "a1"; never hand those out.
        if !forbidden.iter().any(|n| key.contains(n.as_str())) {
            return key;
        }
    }
}

/// Deterministic per (campaign seed, listener, trial): a refresh shows the
/// same order under the same keys.
pub fn assignment(campaign: &Campaign, listener: &str, trial_index: usize) -> Assignment {
    let trial = &campaign.trials[trial_index];
    let mut rng = trial_rng(campaign, listener, &trial.id);
    let mut order: Vec<usize> = (0..trial.stimuli.len()).collect();
    order.shuffle(&mut rng);
    let forbidden: Vec<String> = campaign.system_names().map(str::to_lowercase).collect();
    let mut keys: Vec<String> = Vec::with_capacity(order.len());
    while keys.len() < order.len() {
        let k = opaque_key(&mut rng, &forbidden);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let reference_key = trial.reference.as_ref().map(|_| opaque_key(&mut rng, &forbidden));
    Assignment {
        order,
        keys,
        reference_key,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusView {
    pub key: String,
    pub url: String,
}

/// Listener-facing trial. Contains nothing that identifies a system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPayload {
    pub trial_id: String,
    /// 1-based position for progress display.
    pub index: usize,
    pub total: usize,
    pub prompt: String,
    pub sentence: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_url: Option<String>,
    pub stimuli: Vec<StimulusView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTrial {
    Trial(TrialPayload),
    Complete { total: usize },
}

/// Body of a rating submission. Scores stay raw JSON so that fractional or
/// out-of-range values can be rejected by key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingSubmission {
    pub listener: String,
    pub trial_id: String,
    pub scores: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub status: String,
    pub trial_id: String,
    pub remaining: usize,
}

#[derive(Clone, Debug)]
struct KeyTarget {
    path: PathBuf,
}

#[derive(Debug)]
pub struct Service {
    campaigns: BTreeMap<String, Campaign>,
    listeners: BTreeMap<String, String>,
    records: Vec<LogRecord>,
    log: RatingLog,
    audio: HashMap<String, KeyTarget>,
    done: HashSet<(String, String, String)>,
}

fn sanitize_handle(handle: &str) -> String {
    let s: String = handle
        .chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == '_')
        .take(32)
        .collect();
    if s.is_empty() {
        "listener".to_string()
    } else {
        s
    }
}

impl Service {
    /// Opens the log at `log_path` and replays it.
    pub fn open(campaigns: Vec<Campaign>, log_path: &Path) -> Result<Self, EvalError> {
        let (log, records) = RatingLog::open(log_path)?;
        let mut service = Self {
            campaigns: campaigns.into_iter().map(|c| (c.id.clone(), c)).collect(),
            listeners: BTreeMap::new(),
            records: Vec::new(),
            log,
            audio: HashMap::new(),
            done: HashSet::new(),
        };
        for record in records {
            service.apply(record);
        }
        Ok(service)
    }

    fn apply(&mut self, record: LogRecord) {
        match &record {
            LogRecord::Listener { listener_id, handle, .. } => {
                self.listeners.insert(listener_id.clone(), handle.clone());
                self.index_audio(listener_id.clone());
            }
            LogRecord::Ratings {
                campaign,
                listener_id,
                trial_id,
                ..
            } => {
                self.done.insert((campaign.clone(), listener_id.clone(), trial_id.clone()));
            }
        }
        self.records.push(record);
    }

    fn index_audio(&mut self, listener: String) {
        for campaign in self.campaigns.values() {
            for (i, trial) in campaign.trials.iter().enumerate() {
                let a = assignment(campaign, &listener, i);
                for (key, idx) in a.keys.iter().zip(&a.order) {
                    self.audio.insert(
                        key.clone(),
                        KeyTarget {
                            path: trial.stimuli[*idx].path.clone(),
                        },
                    );
                }
                if let (Some(key), Some(path)) = (a.reference_key, &trial.reference) {
                    self.audio.insert(key, KeyTarget { path: path.clone() });
                }
            }
        }
    }

    pub fn campaign(&self, id: &str) -> Result<&Campaign, EvalError> {
        self.campaigns.get(id).ok_or_else(|| EvalError::UnknownCampaign(id.to_string()))
    }

    pub fn campaigns(&self) -> impl Iterator<Item = &Campaign> {
        self.campaigns.values()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    pub fn register(&mut self, handle: &str) -> Result<String, EvalError> {
        let handle = sanitize_handle(handle);
        let mut rng = rand::rng();
        let id = loop {
            let candidate = format!("{handle}-{:08x}", rng.random::<u32>());
            if !self.listeners.contains_key(&candidate) {
                break candidate;
            }
        };
        let record = LogRecord::Listener {
            listener_id: id.clone(),
            handle,
            timestamp_ms: now_ms(),
        };
        self.log.append(&record)?;
        self.apply(record);
        Ok(id)
    }

    fn check_listener(&self, listener: &str) -> Result<(), EvalError> {
        if self.listeners.contains_key(listener) {
            Ok(())
        } else {
            Err(EvalError::UnknownListener(listener.to_string()))
        }
    }

    pub fn next_trial(&self, campaign_id: &str, listener: &str) -> Result<NextTrial, EvalError> {
        let campaign = self.campaign(campaign_id)?;
        self.check_listener(listener)?;
        let total = campaign.trials.len();
        let pending = campaign.trials.iter().position(|t| {
            !self
                .done
                .contains(&(campaign.id.clone(), listener.to_string(), t.id.clone()))
        });
        let Some(i) = pending else {
            return Ok(NextTrial::Complete { total });
        };
        let trial = &campaign.trials[i];
        let a = assignment(campaign, listener, i);
        Ok(NextTrial::Trial(TrialPayload {
            trial_id: trial.id.clone(),
            index: i + 1,
            total,
            prompt: campaign.prompt.clone(),
            sentence: trial.sentence.clone(),
            reference_url: a.reference_key.map(|k| format!("/audio/{k}")),
            stimuli: a
                .keys
                .into_iter()
                .map(|key| StimulusView {
                    url: format!("/audio/{key}"),
                    key,
                })
                .collect(),
        }))
    }

    /// Validates and logs one trial's scores. A repeat submission for the
    /// same (listener, trial) supersedes the earlier one.
    pub fn submit(&mut self, campaign_id: &str, submission: &RatingSubmission) -> Result<Ack, EvalError> {
        let campaign = self.campaign(campaign_id)?;
        self.check_listener(&submission.listener)?;
        let (index, trial) = campaign
            .trial(&submission.trial_id)
            .ok_or_else(|| EvalError::UnknownTrial(submission.trial_id.clone()))?;
        let a = assignment(campaign, &submission.listener, index);

        for (key, value) in &submission.scores {
            if !a.keys.contains(key) {
                return Err(EvalError::UnknownKey(key.clone()));
            }
            match value.as_u64() {
                Some(v) if v <= 100 => {}
                _ => {
                    return Err(EvalError::ScoreOutOfRange {
                        key: key.clone(),
                        value: value.to_string(),
                    })
                }
            }
        }
        let mut scores = Vec::with_capacity(a.keys.len());
        for (key, idx) in a.keys.iter().zip(&a.order) {
            let value = submission
                .scores
                .get(key)
                .ok_or_else(|| EvalError::Unrated(key.clone()))?;
            scores.push(ScoredStimulus {
                key: key.clone(),
                system: trial.stimuli[*idx].system.clone(),
                score: value.as_u64().expect("validated above") as u8,
            });
        }

        let record = LogRecord::Ratings {
            campaign: campaign.id.clone(),
            listener_id: submission.listener.clone(),
            trial_id: trial.id.clone(),
            scores,
            timestamp_ms: now_ms(),
        };
        let total = campaign.trials.len();
        let campaign_id = campaign.id.clone();
        self.log.append(&record)?;
        self.apply(record);
        let completed = self
            .done
            .iter()
            .filter(|(c, l, _)| *c == campaign_id && *l == submission.listener)
            .count();
        Ok(Ack {
            status: "ok".to_string(),
            trial_id: submission.trial_id.clone(),
            remaining: total - completed,
        })
    }

    pub fn aggregate(&self, campaign_id: &str) -> Result<Aggregate, EvalError> {
        Ok(aggregate(self.campaign(campaign_id)?, &self.records))
    }

    pub fn audio_path(&self, key: &str) -> Option<&Path> {
        self.audio.get(key).map(|t| t.path.as_path())
    }
}
