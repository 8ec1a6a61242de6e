//! Experiment manifests: what a command ran, loadable again with `--config`.

use std::fs;
use std::path::{Path, PathBuf};

use gols_core::analyze::ScanSpec;
use gols_core::gols::GolsConfig;
use gols_core::presets::{self, ExperimentPreset};
use gols_core::rng::derive_seed;
use gols_core::sampler::SamplerMode;
use gols_core::train::{Optimizer, RunConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_CADENCE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainManifest {
    pub experiment: String,
    pub sampler: SamplerMode,
    pub optimizer: Optimizer,
    pub budget: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_cadence")]
    pub metric_cadence: usize,
    #[serde(default)]
    pub error_subsample: Option<usize>,
    #[serde(default)]
    pub data_dir: Option<String>,
    pub output_dir: PathBuf,
}

fn default_repeats() -> usize {
    DEFAULT_REPEATS
}

fn default_cadence() -> usize {
    DEFAULT_CADENCE
}

impl TrainManifest {
    pub fn for_preset(p: &ExperimentPreset, output_dir: PathBuf) -> Self {
        let sampler = match p.default_batch {
            Some(batch_size) => SamplerMode::Dynamic { batch_size },
            None => SamplerMode::Full,
        };
        Self {
            experiment: p.name.to_string(),
            sampler,
            optimizer: Optimizer::GolsI(GolsConfig::default()),
            budget: p.default_budget,
            repeats: DEFAULT_REPEATS,
            base_seed: 0,
            metric_cadence: DEFAULT_CADENCE,
            error_subsample: None,
            data_dir: None,
            output_dir,
        }
    }

    pub fn preset(&self) -> CliResult<ExperimentPreset> {
        presets::experiment(&self.experiment, self.data_dir.as_deref())
            .ok_or_else(|| CliError::Usage(format!("experiment: unknown preset '{}'", self.experiment)))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.repeats == 0 {
            return Err(CliError::Usage("repeats: must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(CliError::Usage("budget: must be positive".into()));
        }
        if self.metric_cadence == 0 {
            return Err(CliError::Usage("metric_cadence: must be at least 1".into()));
        }
        if let Optimizer::GolsI(cfg) = &self.optimizer {
            cfg.validate().map_err(|e| CliError::Usage(format!("optimizer: {e}")))?;
        }
        self.preset().map(|_| ())
    }

    pub fn run_id(&self, repeat: usize) -> String {
        format!("{}-r{repeat:02}", self.experiment)
    }

    pub fn run_configs(&self) -> CliResult<Vec<RunConfig>> {
        let arch = self.preset()?.architecture();
        Ok((0..self.repeats)
            .map(|r| RunConfig {
                run_id: self.run_id(r),
                arch: arch.clone(),
                sampler: self.sampler,
                optimizer: self.optimizer,
                max_func_evals: self.budget,
                metric_cadence: self.metric_cadence,
                init_seed: derive_seed(self.base_seed, 0, r as u64),
                sampler_seed: derive_seed(self.base_seed, 1, r as u64),
                error_subsample: self.error_subsample,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeManifest {
    pub experiment: String,
    pub scan: ScanSpec,
    #[serde(default)]
    pub data_dir: Option<String>,
    pub output_dir: PathBuf,
}

impl LocalizeManifest {
    pub fn for_preset(name: &str, output_dir: PathBuf) -> Self {
        let scan = if name == "iris" { presets::iris_scan_spec() } else { ScanSpec::default() };
        Self { experiment: name.to_string(), scan, data_dir: None, output_dir }
    }

    pub fn preset(&self) -> CliResult<ExperimentPreset> {
        presets::experiment(&self.experiment, self.data_dir.as_deref())
            .ok_or_else(|| CliError::Usage(format!("experiment: unknown preset '{}'", self.experiment)))
    }
}

/// Reads a TOML or JSON manifest, chosen by file extension.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| e.to_string()),
        Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
        _ => return Err(CliError::Usage(format!("config: {} must end in .toml or .json", path.display()))),
    };
    parsed.map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
pub struct RunSeeds {
    pub run_id: String,
    pub init_seed: u64,
    pub sampler_seed: u64,
}

/// Writes `manifest.json` (loadable with `--config`) into `dir`.
pub fn write_manifest<M: Serialize>(dir: &Path, manifest: &M) -> CliResult<()> {
    write_json(&dir.join("manifest.json"), manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("manifest types serialize");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Copies a user-supplied config file into `dir` byte for byte.
pub fn copy_config(dir: &Path, config: &Path) -> CliResult<()> {
    let name = config.file_name().map(|n| format!("config-{}", n.to_string_lossy())).unwrap_or("config".into());
    fs::copy(config, dir.join(name)).map_err(|e| CliError::io(config, e))?;
    Ok(())
}
