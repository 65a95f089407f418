//! Scenario configuration file.
//!
//! Relative paths inside the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swarm_avatar::apf::ApfParams;
use swarm_avatar::lstm::TrainConfig;
use swarm_avatar::pose::SkeletonConfig;
use swarm_avatar::sim::{GridStart, SimConfig};

use crate::CliError;

/// Skeleton settings, given inline or as a path to a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SkeletonSource {
    Path(PathBuf),
    Inline(SkeletonConfig),
}

impl Default for SkeletonSource {
    fn default() -> Self {
        SkeletonSource::Inline(SkeletonConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenDataConfig {
    pub n_per_class: usize,
    pub noise: f64,
    /// Emotions to chain into a landmark stream alongside the dataset.
    pub stream_labels: Vec<String>,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self {
            n_per_class: 120,
            noise: swarm_avatar::synthetic::DEFAULT_NOISE,
            stream_labels: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub stride: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { stride: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub stream: Option<PathBuf>,
    /// Skip malformed or out-of-order stream lines instead of failing.
    pub lenient_stream: bool,
    pub skeleton: SkeletonSource,
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sim: SimConfig,
    pub apf: ApfParams,
    pub train: TrainConfig,
    /// Explicit takeoff positions; when absent a seeded grid is used.
    pub initial_positions: Option<Vec<[f64; 3]>>,
    pub grid: GridStart,
    pub classify: ClassifyConfig,
    pub gen_data: GenDataConfig,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.stream,
            &mut self.model,
            &mut self.dataset,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let SkeletonSource::Path(p) = &mut self.skeleton {
            fix(p);
        }
    }

    /// Loads a skeleton file if one is referenced; returns the effective settings.
    pub fn skeleton(&self) -> Result<SkeletonConfig, CliError> {
        match &self.skeleton {
            SkeletonSource::Inline(s) => Ok(s.clone()),
            SkeletonSource::Path(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read skeleton {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("invalid skeleton {}: {e}", p.display())))
            }
        }
    }

    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::config(format!("{what} needs a seed (--seed or \"seed\" in the config)")))
    }
}

/// Fails with a config error when a referenced input file is missing.
pub fn require_file(p: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    let p = p.clone().ok_or_else(|| CliError::config(format!("no {what} given")))?;
    if !p.is_file() {
        return Err(CliError::config(format!("{what} not found: {}", p.display())));
    }
    Ok(p)
}
