use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::train::{SynthConfig, TrainConfig};

/// Input files of a command. Flags on the command line take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kb: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

/// Everything a run depends on. Loaded from TOML, overridden by flags and
/// `KBPT_*` environment variables, and written back as `config.toml`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub inputs: Inputs,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig, HarnessError> {
        if !path.exists() {
            return Err(HarnessError::Missing(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        Self::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.train.validate()?;
        Ok(())
    }
}
