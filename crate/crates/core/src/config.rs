//! The structured configuration document: lexicon, intents, response
//! templates, device classes, seed fleet, environment, availability script,
//! permissions and monitor thresholds.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::fabric::{DeviceClass, DeviceSeed, EnvironmentSeed, Grant, OfflineWindow};
use crate::monitor::MonitorConfig;
use crate::nlu::{IntentSpec, LexiconEntrySpec};

/// Shipped default document.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.json");

fn default_lifespan() -> u32 {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_lifespan")]
    pub default_lifespan: u32,
    pub entities: Vec<LexiconEntrySpec>,
    pub intents: Vec<IntentSpec>,
    #[serde(default)]
    pub templates: IndexMap<String, String>,
    #[serde(default)]
    pub device_classes: Vec<DeviceClass>,
    #[serde(default)]
    pub devices: Vec<DeviceSeed>,
    #[serde(default)]
    pub environment: EnvironmentSeed,
    #[serde(default)]
    pub availability_script: Vec<OfflineWindow>,
    #[serde(default)]
    pub permissions: IndexMap<String, Vec<Grant>>,
    #[serde(default)]
    pub monitor: MonitorConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid lexicon or intents: {0}")]
    Nlu(#[from] crate::nlu::NluError),
    #[error("invalid device fleet: {0}")]
    Fabric(#[from] crate::fabric::FabricError),
    #[error("missing response template {0}")]
    MissingTemplate(String),
    #[error("{0}")]
    Invalid(String),
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The shipped configuration.
    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_CONFIG).expect("shipped configuration parses")
    }

    /// Loads `path`, or the shipped document when `None`.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::shipped()),
        }
    }
}
