//! Campaign manifests and trial construction.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::EvalError;

pub const MIN_STIMULI: usize = 3;
pub const MAX_STIMULI: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    SpeakerSimilarity,
    Naturalness,
    CodeSwitching,
}

impl Task {
    /// Instruction shown to listeners unless the manifest overrides it.
    pub fn canonical_prompt(self) -> &'static str {
        match self {
            Task::SpeakerSimilarity => {
                "Please rate each audio sample according to how similar the speaker sounds to the reference speaker"
            }
            Task::Naturalness => {
                "Please rate each audio sample based on the pronunciation of the words and how natural it sounds"
            }
            Task::CodeSwitching => {
                "Please rate each audio sample based on how natural the transition between Romanian and English is"
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Candidate,
    LowAnchor,
    HighAnchor,
    /// The original recording, used as the hidden reference.
    Natural,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemEntry {
    pub name: String,
    pub role: Role,
    /// Audio path per sentence, keyed by the sentence's 0-based index.
    pub files: BTreeMap<String, PathBuf>,
}

/// On-disk campaign description. Relative paths resolve against the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignManifest {
    #[serde(default)]
    pub id: Option<String>,
    pub task: Task,
    #[serde(default)]
    pub prompt_override: Option<String>,
    pub sentences: Vec<String>,
    pub systems: Vec<SystemEntry>,
    pub seed: u64,
    /// Reference recordings, one per sentence; required for speaker similarity.
    #[serde(default)]
    pub references: Option<Vec<PathBuf>>,
}

impl CampaignManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), EvalError> {
        let raw = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        let manifest: Self = serde_json::from_str(&raw).map_err(|e| EvalError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub system: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub id: String,
    pub sentence: String,
    pub reference: Option<PathBuf>,
    /// Canonical (roster) order; listeners see a permutation of it.
    pub stimuli: Vec<Stimulus>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemInfo {
    pub name: String,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: String,
    pub task: Task,
    pub prompt: String,
    pub seed: u64,
    pub systems: Vec<SystemInfo>,
    pub trials: Vec<Trial>,
}

impl Campaign {
    pub fn trial(&self, trial_id: &str) -> Option<(usize, &Trial)> {
        self.trials.iter().enumerate().find(|(_, t)| t.id == trial_id)
    }

    pub fn role_of(&self, system: &str) -> Option<Role> {
        self.systems.iter().find(|s| s.name == system).map(|s| s.role)
    }

    /// Every roster name; none of these may reach a listener.
    pub fn system_names(&self) -> impl Iterator<Item = &str> {
        self.systems.iter().map(|s| s.name.as_str())
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Validates the manifest and produces one trial per sentence.
pub fn build_campaign(manifest: &CampaignManifest, base_dir: &Path) -> Result<Campaign, EvalError> {
    let fail = |m: String| Err(EvalError::Manifest(m));
    let n_systems = manifest.systems.len();
    if !(MIN_STIMULI..=MAX_STIMULI).contains(&n_systems) {
        return fail(format!(
            "{n_systems} systems; each trial needs between {MIN_STIMULI} and {MAX_STIMULI} stimuli"
        ));
    }
    if manifest.sentences.is_empty() {
        return fail("no sentences".into());
    }
    let mut names = BTreeSet::new();
    for s in &manifest.systems {
        if s.name.trim().is_empty() {
            return fail("system names must be non-empty".into());
        }
        if !names.insert(s.name.as_str()) {
            return fail(format!("duplicate system name {}", s.name));
        }
        let extra: Vec<&String> = s
            .files
            .keys()
            .filter(|k| k.parse::<usize>().map_or(true, |i| i >= manifest.sentences.len()))
            .collect();
        if !extra.is_empty() {
            return fail(format!("system {} lists files for unknown sentences {extra:?}", s.name));
        }
    }

    let id = manifest.id.clone().unwrap_or_else(|| "campaign".to_string());
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return fail(format!("campaign id {id:?} must be non-empty ASCII letters, digits, '-' or '_'"));
    }

    let prompt = manifest
        .prompt_override
        .clone()
        .unwrap_or_else(|| manifest.task.canonical_prompt().to_string());
    // Listener-facing text must not leak a system identity.
    for name in &names {
        if id.contains(name) {
            return fail(format!("system name {name:?} appears in the campaign id"));
        }
        let leaks_prompt = prompt.contains(name);
        if let Some(i) = manifest.sentences.iter().position(|s| s.contains(name)) {
            return fail(format!("system name {name:?} appears in sentence {i}; rename the system"));
        }
        if leaks_prompt {
            return fail(format!("system name {name:?} appears in the prompt; rename the system"));
        }
    }

    let references = match (manifest.task, &manifest.references) {
        (Task::SpeakerSimilarity, None) => return fail("speaker_similarity requires references".into()),
        (Task::SpeakerSimilarity, Some(_)) if !manifest.systems.iter().any(|s| s.role == Role::Natural) => {
            return fail("speaker_similarity requires a system with role \"natural\"".into())
        }
        (_, Some(refs)) if refs.len() != manifest.sentences.len() => {
            return fail(format!(
                "{} references for {} sentences",
                refs.len(),
                manifest.sentences.len()
            ))
        }
        (_, refs) => refs.as_ref(),
    };

    let mut missing = Vec::new();
    let mut trials = Vec::with_capacity(manifest.sentences.len());
    for (i, sentence) in manifest.sentences.iter().enumerate() {
        let mut stimuli = Vec::with_capacity(n_systems);
        for s in &manifest.systems {
            match s.files.get(&i.to_string()).map(|p| resolve(base_dir, p)) {
                Some(path) if path.is_file() => stimuli.push(Stimulus {
                    system: s.name.clone(),
                    path,
                }),
                _ => missing.push((i, s.name.clone())),
            }
        }
        let reference = match references {
            Some(refs) => {
                let path = resolve(base_dir, &refs[i]);
                if !path.is_file() {
                    missing.push((i, "reference".to_string()));
                }
                Some(path)
            }
            None => None,
        };
        trials.push(Trial {
            id: format!("t{:02}", i + 1),
            sentence: sentence.clone(),
            reference,
            stimuli,
        });
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingAudio(missing));
    }

    Ok(Campaign {
        id,
        task: manifest.task,
        prompt,
        seed: manifest.seed,
        systems: manifest
            .systems
            .iter()
            .map(|s| SystemInfo {
                name: s.name.clone(),
                role: s.role,
            })
            .collect(),
        trials,
    })
}
