//! Optional TOML configuration. Command-line flags win over file values.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use namelink_core::{EngineConfig, GenParams};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub tt: f64,
    pub default_k: usize,
    pub train_on_auto_labels: bool,
}

impl Default for ServiceSection {
    fn default() -> Self {
        let d = namelink_service::ServiceConfig::default();
        ServiceSection {
            tt: d.tt,
            default_k: d.default_k,
            train_on_auto_labels: d.train_on_auto_labels,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub engine: EngineConfig,
    pub gen: GenParams,
    pub service: ServiceSection,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies a global seed to every component that draws random numbers.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed.or(self.seed) {
            self.seed = Some(s);
            self.engine.train.seed = s;
            self.gen.seed = s;
        }
    }
}
