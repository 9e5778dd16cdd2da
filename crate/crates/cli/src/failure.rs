use std::fmt::Display;

use listening_test::EvalError;
use tts_adapter::checkpoint::CheckpointError;
use tts_adapter::metrics::MetricsError;
use tts_adapter::model::ModelError;
use tts_adapter::text::TextError;
use tts_adapter::train::TrainError;

/// A command failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or invalid input content (exit 1).
    Usage(String),
    /// I/O or other failure while doing valid work (exit 2).
    Runtime(String),
}

impl Failure {
    pub fn usage(m: impl Display) -> Self {
        Failure::Usage(m.to_string())
    }

    pub fn runtime(m: impl Display) -> Self {
        Failure::Runtime(m.to_string())
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<TextError> for Failure {
    fn from(e: TextError) -> Self {
        match e {
            TextError::Io(_) => Failure::runtime(e),
            _ => Failure::usage(e),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Text(t) => t.into(),
            ModelError::Config(_) | ModelError::TimeOutOfRange(_) => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io { .. } | TrainError::NonFiniteLoss { .. } | TrainError::BackboneModified { .. } => {
                Failure::runtime(e)
            }
            TrainError::Model(m) => m.into(),
            TrainError::Text(t) => t.into(),
            _ => Failure::usage(e),
        }
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io { .. } => Failure::runtime(e),
            _ => Failure::usage(e),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::usage(e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } => Failure::runtime(e),
            _ => Failure::usage(e),
        }
    }
}
