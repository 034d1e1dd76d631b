//! The optional configuration file. One section per command; flags given
//! on the command line override it, and missing keys fall back to the
//! library defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tactislip_core::AugmentationConfig;
use tactislip_nn::EnsembleConfig;
use tactislip_runtime::SessionOptions;
use tactislip_sim::ScenarioGrid;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub generate: ScenarioGrid,
    pub augment: AugmentationConfig,
    pub split: SplitSettings,
    pub train: EnsembleConfig,
    pub eval: EvalSettings,
    pub detect: SessionOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self { ratio: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub latency_bin_ms: f64,
    /// Seed of the domain-shifted test set used in ablation mode.
    pub ablation_seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { latency_bin_ms: 20.0, ablation_seed: 0 }
    }
}

impl FileConfig {
    /// Reads a TOML file, or a JSON file when the extension says so.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let usage = |e: String| CliError::Usage(format!("{}: {e}", path.display()));
        let raw: serde_json::Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| usage(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| usage(e.to_string()))?
        };
        let config: FileConfig = serde_json::from_value(raw.clone()).map_err(|e| usage(e.to_string()))?;
        let known = serde_json::to_value(&config).map_err(|e| usage(e.to_string()))?;
        let mut unknown = Vec::new();
        unknown_keys(&raw, &known, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(usage(format!("unknown keys: {}", unknown.join(", "))));
        }
        Ok(config)
    }
}

/// Keys of `given` with no counterpart in `known`, which is the parsed
/// configuration serialized back. Nested sections are checked too.
fn unknown_keys(given: &serde_json::Value, known: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    let (Some(given), Some(known)) = (given.as_object(), known.as_object()) else { return };
    for (key, value) in given {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match known.get(key) {
            Some(k) => unknown_keys(value, k, &path, out),
            None => out.push(path),
        }
    }
}
