use std::fs;
use std::path::{Path, PathBuf};

use hydra_core::data::SynthConfig;
use hydra_core::models::{Architecture, HyperparameterGrid, Hyperparameters, ModelSpec};
use hydra_core::training::{Experiment, TrainConfig};
use hydra_core::Error;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Every setting a command reads. Loaded from TOML, overridden by flags,
/// and written back fully resolved next to the command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Catchment CSV directory, relative to the working directory.
    pub data_dir: PathBuf,
    /// Output directory, relative to the working directory.
    pub output_dir: PathBuf,
    pub synth: SynthSettings,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub evaluation: EvaluationSettings,
    pub sweep: SweepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: "data".into(),
            output_dir: "runs/default".into(),
            synth: SynthSettings::default(),
            model: ModelSettings::default(),
            train: TrainConfig::default(),
            evaluation: EvaluationSettings::default(),
            sweep: SweepSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub catchments: usize,
    pub years: usize,
    pub seed: u64,
    pub generator: SynthConfig,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings { catchments: 6, years: 10, seed: 0, generator: SynthConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub architecture: Architecture,
    pub seed: u64,
    /// Defaults to the architecture's selected configuration.
    pub hyperparameters: Option<Hyperparameters>,
    /// Catchment-specific inputs; defaults to discharge history for every
    /// architecture except the no-discharge baseline.
    pub extras: Option<Vec<String>>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings { architecture: Architecture::Hydra, seed: 0, hyperparameters: None, extras: None }
    }
}

impl ModelSettings {
    pub fn experiment(&self) -> Experiment {
        let mut spec = ModelSpec::new(self.architecture, self.seed);
        if let Some(hp) = self.hyperparameters {
            spec.hyperparameters = hp;
        }
        let mut e = Experiment::new(spec);
        if let Some(extras) = &self.extras {
            e.extras = extras.clone();
        }
        e
    }

    /// Fills in the defaults so the written config is explicit.
    pub fn resolve(&mut self) {
        let e = self.experiment();
        self.hyperparameters = Some(e.spec.hyperparameters);
        self.extras = Some(e.extras);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    /// Number of withheld test years for `crossval`.
    pub folds: usize,
    /// Test year of a `train` run; the middle candidate year by default.
    pub test_year: Option<i32>,
    /// Defaults to the last two years of the record.
    pub validation_years: Option<Vec<i32>>,
    /// Worker threads for folds, heads and sweep cells.
    pub jobs: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings { folds: 4, test_year: None, validation_years: None, jobs: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// Defaults to the full grid listed for the architecture.
    pub grid: Option<HyperparameterGrid>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.train.validate()?;
        self.model.experiment().validate()?;
        if self.evaluation.jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> HyperparameterGrid {
        self.sweep.grid.clone().unwrap_or_else(|| HyperparameterGrid::table(self.model.architecture))
    }
}

/// Resolves `path` against the working directory unless it is absolute.
pub fn within(workdir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() { path.to_path_buf() } else { workdir.join(path) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.model.resolve();
        cfg.evaluation.validation_years = Some(vec![2008, 2009]);
        cfg.train.months = Some(vec![6, 7, 8]);
        let text = cfg.to_toml().unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg: RunConfig = toml::from_str("[model]\narchitecture = \"flag\"\n[train]\nwindow = 30\n").unwrap();
        assert_eq!(cfg.model.architecture, Architecture::Flag);
        assert_eq!(cfg.train.window, 30);
        assert_eq!(cfg.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(cfg.model.experiment().extras, vec!["discharge_m3_s".to_string()]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nwindw = 3\n").is_err());
    }
}
