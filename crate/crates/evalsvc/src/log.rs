//! Append-only JSON-lines rating log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::EvalError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredStimulus {
    pub key: String,
    pub system: String,
    pub score: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Listener {
        listener_id: String,
        handle: String,
        timestamp_ms: u64,
    },
    Ratings {
        campaign: String,
        listener_id: String,
        trial_id: String,
        scores: Vec<ScoredStimulus>,
        timestamp_ms: u64,
    },
}

/// Single writer; every append is flushed and synced before returning.
#[derive(Debug)]
pub struct RatingLog {
    path: PathBuf,
    file: File,
}

impl RatingLog {
    /// Opens (creating if needed) and returns the records already present.
    pub fn open(path: &Path) -> Result<(Self, Vec<LogRecord>), EvalError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
        }
        let records = if path.exists() { Self::read(path)? } else { Vec::new() };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| EvalError::io(path, e))?;
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    pub fn read(path: &Path) -> Result<Vec<LogRecord>, EvalError> {
        let file = File::open(path).map_err(|e| EvalError::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| EvalError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| EvalError::CorruptLog {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(record);
        }
        Ok(out)
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), EvalError> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| EvalError::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub(crate) fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
