use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossval::{in_pool, record_years};
use super::fit::TrainConfig;
use super::run::{train_model, Experiment, HydraTraining, TrainingRunRecord};
use crate::data::{CatchmentDataset, SplitPlan};
use crate::error::Result;
use crate::models::{Architecture, HyperparameterGrid, Hyperparameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub hyperparameters: Hyperparameters,
    pub validation_loss: Option<f64>,
    /// Failure message when the cell could not be trained.
    pub error: Option<String>,
    pub records: Vec<TrainingRunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub architecture: Architecture,
    pub split: SplitPlan,
    pub cells: Vec<SweepCell>,
    /// Cell indices by ascending validation loss; failed cells are left out.
    pub ranking: Vec<usize>,
}

impl SweepResult {
    pub fn winner(&self) -> Option<&SweepCell> {
        self.ranking.first().map(|&i| &self.cells[i])
    }
}

fn train_cell(experiment: &Experiment, datasets: &[CatchmentDataset], split: &SplitPlan, cfg: &TrainConfig) -> Result<(Option<f64>, Vec<TrainingRunRecord>)> {
    if experiment.architecture() == Architecture::Hydra {
        // heads do not change the body, so cells are ranked on the joint phase
        let mut h = HydraTraining::new(experiment, datasets, split, cfg)?;
        let r = h.run_phase1()?.clone();
        return Ok((r.best_validation_loss, vec![r]));
    }
    let run = train_model(experiment, datasets, split, cfg)?;
    Ok((run.validation_loss(), run.records))
}

/// Trains every grid cell on a train/validation split of the record and
/// ranks cells by best validation loss (ties by grid order).
pub fn grid_sweep(
    experiment: &Experiment,
    grid: &HyperparameterGrid,
    datasets: &[CatchmentDataset],
    validation_years: Option<&[i32]>,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<SweepResult> {
    let split = SplitPlan::holdout(&record_years(datasets), validation_years)?;
    let candidates = grid.enumerate();
    let cells: Vec<SweepCell> = in_pool(jobs, || {
        candidates
            .par_iter()
            .enumerate()
            .map(|(index, hp)| {
                let mut e = experiment.clone();
                e.spec.hyperparameters = *hp;
                match train_cell(&e, datasets, &split, cfg) {
                    Ok((loss, records)) => SweepCell { index, hyperparameters: *hp, validation_loss: loss, error: None, records },
                    Err(err) => {
                        log::warn!("sweep cell {index} failed: {err}");
                        SweepCell { index, hyperparameters: *hp, validation_loss: None, error: Some(err.to_string()), records: vec![] }
                    }
                }
            })
            .collect()
    })?;
    let mut ranking: Vec<usize> = cells.iter().filter(|c| c.validation_loss.is_some_and(f64::is_finite)).map(|c| c.index).collect();
    ranking.sort_by(|&a, &b| cells[a].validation_loss.partial_cmp(&cells[b].validation_loss).expect("finite").then(a.cmp(&b)));
    Ok(SweepResult { architecture: experiment.architecture(), split, cells, ranking })
}
