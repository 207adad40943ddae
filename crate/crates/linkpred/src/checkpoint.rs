//! Resumable streaming state as JSON. Floats are written in shortest
//! round-trip form and parsed exactly, so a resumed replay is bit-identical
//! to an uninterrupted one.

use std::fs;
use std::path::Path;

use linkpred_core::adaptive::{ExactRlsSnapshot, LmsSnapshot, MonitorSnapshot, RlsSnapshot};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::EstimatorSpec;

pub const CHECKPOINT_FORMAT: &str = "linkpred-checkpoint/1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format `{0}`")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSnapshot {
    Lms(LmsSnapshot),
    Rls(RlsSnapshot),
    ExactRls(ExactRlsSnapshot),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub generator: String,
    pub basis: String,
    pub block: usize,
    pub spec: EstimatorSpec,
    /// Samples consumed; a resumed replay continues at this offset.
    pub samples: u64,
    pub breakdowns: u64,
    pub estimator: EstimatorSnapshot,
    pub monitor: MonitorSnapshot,
    pub dataset_sha256: Option<String>,
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let c: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(c.format));
        }
        Ok(c)
    }
}
