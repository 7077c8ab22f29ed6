use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LossConfig, TrainError, TrainRunConfig};
use crate::context::ContextConfig;
use crate::model::ModelSpec;

/// Everything a training run needs, as one TOML document with the
/// sections `[model]`, `[context]`, `[loss]` and `[run]`.
///
/// Missing keys take their defaults; unknown keys are rejected. Context
/// mode, keep probability and dropout appear in two sections and must
/// agree.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub context: ContextConfig,
    pub loss: LossConfig,
    pub run: TrainRunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serialises")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.model.validate()?;
        self.context.validate()?;
        self.loss.validate()?;
        self.run.validate()?;
        let mismatch = |what: &str| Err(TrainError::Config(format!("{what} differ between sections")));
        if self.context.mode != self.loss.context_mode {
            return mismatch("context.mode and loss.context_mode");
        }
        if self.context.keep_prob != self.loss.keep_prob {
            return mismatch("context.keep_prob and loss.keep_prob");
        }
        if self.model.dropout != self.run.dropout {
            return mismatch("model.dropout and run.dropout");
        }
        Ok(())
    }
}
