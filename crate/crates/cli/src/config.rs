//! The run configuration file: every section optional, every field defaulted,
//! unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use brain_infomax::analysis::AnalysisConfig;
use brain_infomax::{GeneratorConfig, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Cohort file written by `generate` and read by the other commands.
    pub cohort: Option<PathBuf>,
    /// Directory for training or analysis outputs.
    pub out_dir: Option<PathBuf>,
    /// Checkpoint read by `eval` and `analyze`.
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub training: TrainConfig,
    pub analysis: AnalysisConfig,
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Loads `path` if given, otherwise starts from the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.training.validate()?;
        self.analysis.validate()?;
        Ok(())
    }
}

/// Parses `"8,8"` style width lists.
pub fn parse_widths(s: &str) -> Result<Vec<usize>, String> {
    let widths = s
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad width {w:?}: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if widths.is_empty() || widths.contains(&0) {
        return Err(format!("widths must be positive, got {s:?}"));
    }
    Ok(widths)
}

/// Parses a comma-separated list of ROI indices.
pub fn parse_indices(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad ROI index {w:?}: {e}"))
        })
        .collect()
}

/// The path from `--flag`, else from `paths.key` in the config, else a usage
/// error naming both.
pub fn require_path(
    flag_value: Option<PathBuf>,
    config_value: &Option<PathBuf>,
    flag: &str,
    key: &str,
) -> Result<PathBuf> {
    match flag_value.or_else(|| config_value.clone()) {
        Some(p) => Ok(p),
        None => bail!("missing --{flag} (or paths.{key} in the config file)"),
    }
}
