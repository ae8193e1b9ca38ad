use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::ModelId;
use crate::features::FeatureConfig;
use crate::model::ModelsConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory of per-pool CSV, JSON-lines or stored API-response files.
    pub dir: PathBuf,
    /// Snapshot API base URL used by `fetch`; the environment variable
    /// `POOLBENCH_ENDPOINT` overrides it.
    pub endpoint: Option<String>,
    /// Fetch window, RFC 3339.
    pub from: Option<String>,
    pub to: Option<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: PathBuf::from("data"),
            endpoint: None,
            from: None,
            to: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Boosted-tree dumps, network checkpoints, circuit parameters and Gram matrices.
    pub save_models: bool,
    /// Random-forest dumps run to hundreds of megabytes on a full grid.
    pub save_forest: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            save_models: true,
            save_forest: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Share of each pool's usable rows in the training split.
    pub split_ratio: f64,
    /// Parallel grid cells; 0 uses every available core.
    pub workers: usize,
    pub models: Vec<ModelId>,
    /// Pool addresses to run; empty means every pool found.
    pub pools: Vec<String>,
    pub data: DataConfig,
    pub output: OutputConfig,
    pub features: FeatureConfig,
    pub params: ModelsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            split_ratio: 0.8,
            workers: 0,
            models: ModelId::ALL.to_vec(),
            pools: Vec::new(),
            data: DataConfig::default(),
            output: OutputConfig::default(),
            features: FeatureConfig::default(),
            params: ModelsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!("split_ratio must lie in (0, 1), got {}", self.split_ratio)));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::Config("a model is listed twice".into()));
        }
        if self.features.horizon_steps == 0 {
            return Err(Error::Config("horizon_steps must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn worker_count(&self) -> usize {
        if self.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.workers
        }
    }
}
