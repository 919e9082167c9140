use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hydra_core::training::{grid_sweep, SweepResult};
use hydra_core::Error;

use crate::config::{within, RunConfig};
use crate::error::CliResult;
use crate::evaluate::{load_datasets, TIMING_FILE};
use crate::output::{write_json, write_text};

pub const SWEEP_FILE: &str = "sweep.json";
/// The input config with the winning hyperparameters filled in.
pub const BEST_CONFIG_FILE: &str = "best_config.toml";

pub fn run_sweep(cfg: &RunConfig, workdir: &Path) -> CliResult<SweepResult> {
    cfg.validate()?;
    let started = Instant::now();
    let datasets = load_datasets(cfg, workdir)?;
    let dir = within(workdir, &cfg.output_dir);
    let mut resolved = cfg.clone();
    resolved.model.resolve();
    resolved.sweep.grid = Some(cfg.grid());
    write_text(&dir.join("config.toml"), &resolved.to_toml()?)?;
    let result = grid_sweep(
        &cfg.model.experiment(),
        &cfg.grid(),
        &datasets,
        cfg.evaluation.validation_years.as_deref(),
        &cfg.train,
        cfg.evaluation.jobs,
    )?;
    write_json(&dir.join(SWEEP_FILE), &result)?;
    write_json(&dir.join(TIMING_FILE), &BTreeMap::from([("total", started.elapsed().as_secs_f64())]))?;
    let winner = result.winner().ok_or_else(|| Error::Training("no sweep cell produced a finite validation loss".into()))?;
    log::info!("best cell {} with validation loss {:?}", winner.index, winner.validation_loss);
    let mut best = resolved;
    best.model.hyperparameters = Some(winner.hyperparameters);
    best.sweep.grid = None;
    write_text(&dir.join(BEST_CONFIG_FILE), &best.to_toml()?)?;
    Ok(result)
}
