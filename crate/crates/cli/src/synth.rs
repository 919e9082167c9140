use std::path::{Path, PathBuf};

use hydra_core::data::{synthesize_catchments, write_dataset_dir};

use crate::config::{within, RunConfig};
use crate::error::CliResult;
use crate::output::write_text;

/// Generates the synthetic catchments into the data directory.
pub fn run_synth(cfg: &RunConfig, workdir: &Path) -> CliResult<PathBuf> {
    let s = &cfg.synth;
    let datasets = synthesize_catchments(s.catchments, s.years, s.seed, &s.generator)?;
    let dir = within(workdir, &cfg.data_dir);
    write_dataset_dir(&dir, &datasets)?;
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    log::info!("wrote {} catchments x {} years to {}", s.catchments, s.years, dir.display());
    Ok(dir)
}
