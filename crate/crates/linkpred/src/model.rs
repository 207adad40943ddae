//! JSON model files.

use std::fs;
use std::path::Path;

use linkpred_core::regress::{ModelWeights, RegressError};
use linkpred_core::FeatureKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_FORMAT: &str = "linkpred-model/1";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format `{0}`")]
    Format(String),
    #[error("unknown basis `{0}`")]
    Basis(String),
    #[error(transparent)]
    Weights(#[from] RegressError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub generator: String,
    /// `linear4` or `bernstein`.
    pub basis: String,
    /// Bernstein order; absent for `linear4`.
    pub order: Option<u32>,
    pub alpha: f64,
    pub theta: Vec<f64>,
    pub trained_on: usize,
    /// SHA-256 of the training dataset file.
    pub dataset_sha256: String,
    /// Full resolved configuration of the run that produced the model.
    pub config: serde_json::Value,
}

impl ModelFile {
    pub fn new(w: &ModelWeights, dataset_sha256: String, config: serde_json::Value) -> Self {
        let (basis, order) = match w.kind() {
            FeatureKind::QueueFeatures => ("linear4".to_string(), None),
            FeatureKind::Bernstein { order } => ("bernstein".to_string(), Some(order)),
        };
        Self {
            format: MODEL_FORMAT.into(),
            generator: crate::TOOL.into(),
            basis,
            order,
            alpha: w.ridge(),
            theta: w.theta().to_vec(),
            trained_on: w.trained_on(),
            dataset_sha256,
            config,
        }
    }

    pub fn kind(&self) -> Result<FeatureKind, ModelFileError> {
        match (self.basis.as_str(), self.order) {
            ("linear4", None) => Ok(FeatureKind::QueueFeatures),
            ("bernstein", Some(order)) => Ok(FeatureKind::Bernstein { order }),
            _ => Err(ModelFileError::Basis(format!("{} (order {:?})", self.basis, self.order))),
        }
    }

    pub fn weights(&self) -> Result<ModelWeights, ModelFileError> {
        Ok(ModelWeights::new(self.kind()?, self.theta.clone(), self.alpha, self.trained_on)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        let m: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.format != MODEL_FORMAT {
            return Err(ModelFileError::Format(m.format));
        }
        m.weights()?;
        Ok(m)
    }
}
