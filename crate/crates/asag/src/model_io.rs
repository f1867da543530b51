//! Type-tagged JSON model files shared by both model families.
//!
//! A file carries the model kind, all parameters, the feature names the
//! model was trained on, the rating offset, and a fingerprint of the
//! training configuration. JSON float round-tripping is exact, so save
//! followed by load reproduces logits bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::logreg::LogRegModel;
use crate::nam::NamModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFile {
    Nam {
        model: NamModel,
        feature_names: Vec<String>,
        rating_min: i32,
        config_fingerprint: String,
    },
    Logreg {
        model: LogRegModel,
        feature_names: Vec<String>,
        rating_min: i32,
        config_fingerprint: String,
    },
}

impl ModelFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFile::Nam { .. } => "nam",
            ModelFile::Logreg { .. } => "logreg",
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            ModelFile::Nam { feature_names, .. } | ModelFile::Logreg { feature_names, .. } => {
                feature_names
            }
        }
    }

    pub fn rating_min(&self) -> i32 {
        match self {
            ModelFile::Nam { rating_min, .. } | ModelFile::Logreg { rating_min, .. } => *rating_min,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ModelFile::Nam { model, .. } => model.num_classes,
            ModelFile::Logreg { model, .. } => model.num_classes(),
        }
    }
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(file)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let data = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&data)?)
}

/// Loads a model file and checks its kind tag.
pub fn load_model_expecting(path: &Path, expected: &str) -> Result<ModelFile> {
    let file = load_model(path)?;
    if file.kind() != expected {
        return Err(Error::ModelKindMismatch {
            path: path.display().to_string(),
            found: file.kind().to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(file)
}
