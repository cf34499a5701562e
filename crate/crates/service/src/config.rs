use std::path::{Path, PathBuf};

use evolad_core::data::SAR_ATTRIBUTES;
use evolad_core::evolution::EvolutionConfig;
use evolad_core::{ClassSet, DetectorConfig, ModelKind};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Epochs close only once every flagged record has a verdict.
    #[default]
    Live,
    /// Epochs also close when the verification timeout lapses, fitting on
    /// the verdicts received so far.
    Replay,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Min–max statistics from the first epoch, kept for the process life.
    #[default]
    Frozen,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Holds `events.jsonl`.
    pub data_dir: PathBuf,
    pub attributes: Vec<String>,
    /// Class names, normal first.
    pub classes: Vec<String>,
    pub mode: Mode,
    pub verification_timeout_secs: u64,
    pub normalization: Normalization,
    /// `fsync` the log at the end of every mutating request.
    pub fsync: bool,
    pub detector: DetectorConfig,
    pub evolution: EvolutionConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("evolad-state"),
            attributes: SAR_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            classes: ClassSet::default().names().to_vec(),
            mode: Mode::Live,
            verification_timeout_secs: 30,
            normalization: Normalization::Frozen,
            fsync: true,
            detector: DetectorConfig {
                model: ModelKind::Mcl21ls,
                ..DetectorConfig::default()
            },
            evolution: EvolutionConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    pub fn class_set(&self) -> Result<ClassSet> {
        Ok(ClassSet::new(self.classes.iter().cloned())?)
    }

    pub fn log_path(&self) -> PathBuf {
        self.data_dir.join("events.jsonl")
    }

    pub fn timeout(&self) -> Option<std::time::Duration> {
        (self.mode == Mode::Replay).then(|| std::time::Duration::from_secs(self.verification_timeout_secs))
    }

    pub fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(ServiceError::Config("attribute list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.attributes.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(ServiceError::Config(format!("attribute `{dup}` listed twice")));
        }
        self.class_set()?;
        if self.evolution.epoch_size == 0 {
            return Err(ServiceError::Config("epoch_size must be positive".into()));
        }
        Ok(())
    }
}
