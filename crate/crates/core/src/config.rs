//! The run configuration file: one TOML table per pipeline stage. Every key
//! is optional and defaults as documented on the section types; unknown keys
//! are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::signal::SignalConfig;
use crate::sync::SyncConfig;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { folds: 5 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub signal: SignalConfig,
    pub sync: SyncConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub cv: CvConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            field: "config file".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.signal.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if !(self.sync.window_hours > 0.0) {
            return Err(Error::config("sync.window_hours", "must be positive"));
        }
        if self.cv.folds < 2 {
            return Err(Error::config("cv.folds", "needs at least 2 folds"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Writes the configuration next to a run's outputs.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RESOLVED_CONFIG_FILE);
        fs::write(&path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}
