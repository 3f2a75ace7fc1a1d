//! Versioned JSON model documents.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wellsvm_core::WellsvmModel;

use crate::scale::MinMaxScaler;

pub const FORMAT: &str = "wellsvm-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("not a model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model document `{format}` version {version}")]
    Version { format: String, version: u32 },
}

/// Floats are written with the shortest round-tripping decimal form, so a
/// saved model reloads bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub model: WellsvmModel,
    /// Scaling fitted on the training data, applied before prediction.
    #[serde(default)]
    pub scaler: Option<MinMaxScaler>,
}

impl ModelDocument {
    pub fn new(model: WellsvmModel, scaler: Option<MinMaxScaler>) -> Self {
        ModelDocument {
            format: FORMAT.to_string(),
            version: VERSION,
            model,
            scaler,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != FORMAT || doc.version != VERSION {
            return Err(ModelError::Version {
                format: doc.format,
                version: doc.version,
            });
        }
        Ok(doc)
    }
}
