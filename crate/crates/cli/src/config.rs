use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use wae_core::corpus::BuilderConfig;
use wae_core::head::TrainConfig;
use wae_core::selftest::SelftestConfig;

/// Everything a run can be configured with. Command-line flags override
/// values read from `--config`; `--save-config` writes the merged result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub threads: Option<usize>,
    pub log_level: Option<String>,
    pub seed: Option<u64>,
    /// Abort on the first malformed dump record instead of skipping it.
    pub strict: bool,
    pub dump: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub builder: BuilderConfig,
    pub train: TrainConfig,
    pub selftest: SelftestConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing config {}", path.display()))
    }

    /// The seed every random choice derives from.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
