use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hydra_core::data::split::VALIDATION_YEARS;
use hydra_core::data::{read_dataset_dir, CatchmentDataset, SplitPlan};
use hydra_core::objectives::{write_forecast_csv, EvaluationReport, ForecastRecord};
use hydra_core::training::{in_pool, record_years, reports, score_fold, train_model, TrainedRun, TrainingRunRecord};
use hydra_core::Error;
use rayon::prelude::*;

use crate::config::{within, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, write_json, write_text};

pub const SPLITS_FILE: &str = "splits.json";
pub const RECORDS_FILE: &str = "records.json";
pub const CLIMATOLOGY_FILE: &str = "climatology.csv";
pub const FORECAST_DIR: &str = "forecasts";
pub const REPORT_DIR: &str = "reports";
pub const TIMING_FILE: &str = "timing.json";

/// Where an evaluation run wrote its outputs and what it scored.
#[derive(Debug, Clone)]
pub struct EvaluationRun {
    pub dir: PathBuf,
    pub reports: BTreeMap<String, EvaluationReport>,
}

pub fn load_datasets(cfg: &RunConfig, workdir: &Path) -> CliResult<Vec<CatchmentDataset>> {
    Ok(read_dataset_dir(&within(workdir, &cfg.data_dir))?)
}

/// One fold whose test year is `evaluation.test_year`, or the middle
/// candidate year of the record.
pub fn train_plan(cfg: &RunConfig, years: &[i32]) -> CliResult<SplitPlan> {
    let validation = cfg.evaluation.validation_years.as_deref();
    let Some(test) = cfg.evaluation.test_year else {
        return Ok(SplitPlan::folds(years, 1, validation)?.remove(0));
    };
    let validation_years: Vec<i32> = match validation {
        Some(v) => v.to_vec(),
        None => years.iter().rev().take(VALIDATION_YEARS).rev().copied().collect(),
    };
    if !years.contains(&test) || validation_years.contains(&test) {
        return Err(CliError::Config(format!("test year {test} is not a candidate year of the record")));
    }
    let plan = SplitPlan {
        fold_id: 0,
        test_year: Some(test),
        training_years: years.iter().copied().filter(|y| *y != test && !validation_years.contains(y)).collect(),
        validation_years,
    };
    plan.validate()?;
    Ok(plan)
}

pub fn run_train(cfg: &RunConfig, workdir: &Path) -> CliResult<EvaluationRun> {
    cfg.validate()?;
    let datasets = load_datasets(cfg, workdir)?;
    let plan = train_plan(cfg, &record_years(&datasets))?;
    evaluate(cfg, workdir, &datasets, vec![plan])
}

pub fn run_crossval(cfg: &RunConfig, workdir: &Path) -> CliResult<EvaluationRun> {
    cfg.validate()?;
    let datasets = load_datasets(cfg, workdir)?;
    let years = record_years(&datasets);
    let plans = SplitPlan::folds(&years, cfg.evaluation.folds, cfg.evaluation.validation_years.as_deref())?;
    evaluate(cfg, workdir, &datasets, plans)
}

fn sorted(mut rows: Vec<ForecastRecord>) -> Vec<ForecastRecord> {
    rows.sort_by(|a, b| (&a.catchment_id, a.date).cmp(&(&b.catchment_id, b.date)));
    rows
}

/// Trains one model per plan, then writes records, checkpoints, raw
/// predictions, climatology and per-variant reports. Training records are
/// written even when a fold diverges.
pub fn evaluate(cfg: &RunConfig, workdir: &Path, datasets: &[CatchmentDataset], plans: Vec<SplitPlan>) -> CliResult<EvaluationRun> {
    cfg.validate()?;
    let started = Instant::now();
    let dir = within(workdir, &cfg.output_dir);
    create_dir(&dir)?;
    let mut resolved = cfg.clone();
    resolved.model.resolve();
    write_text(&dir.join("config.toml"), &resolved.to_toml()?)?;
    write_json(&dir.join(SPLITS_FILE), &plans)?;

    let experiment = cfg.model.experiment();
    let runs: Vec<TrainedRun> = in_pool(cfg.evaluation.jobs, || {
        plans.par_iter().map(|p| train_model(&experiment, datasets, p, &cfg.train)).collect::<hydra_core::Result<Vec<_>>>()
    })??;
    let records: Vec<&TrainingRunRecord> = runs.iter().flat_map(|r| &r.records).collect();
    write_json(&dir.join(RECORDS_FILE), &records)?;
    let mut timing: BTreeMap<String, f64> = runs.iter().flat_map(|r| r.timing.clone()).collect();
    for run in &runs {
        let fold = dir.join("folds").join(format!("fold_{}", run.split.fold_id));
        write_json(&fold.join("manifest.json"), &run.manifest())?;
        for (name, checkpoint) in run.checkpoints() {
            write_json(&fold.join("checkpoints").join(name), &checkpoint)?;
        }
    }
    if let Some(run) = runs.iter().find(|r| r.diverged()) {
        return Err(Error::Training(format!("fold {} diverged; see {}", run.split.fold_id, RECORDS_FILE)).into());
    }

    let folds = runs.into_iter().map(|r| score_fold(r, datasets)).collect::<hydra_core::Result<Vec<_>>>()?;
    let reports = reports(&folds)?;
    let mut forecasts: BTreeMap<&String, Vec<ForecastRecord>> = BTreeMap::new();
    for f in &folds {
        for (variant, rows) in &f.forecasts {
            forecasts.entry(variant).or_default().extend(rows.iter().cloned());
        }
    }
    create_dir(&dir.join(FORECAST_DIR))?;
    for (variant, rows) in forecasts {
        write_forecast_csv(&dir.join(FORECAST_DIR).join(format!("{variant}.csv")), &sorted(rows))?;
    }
    let climatology = folds.iter().flat_map(|f| f.climatology.iter().cloned()).collect();
    write_forecast_csv(&dir.join(CLIMATOLOGY_FILE), &sorted(climatology))?;
    for (variant, report) in &reports {
        write_json(&dir.join(REPORT_DIR).join(format!("{variant}.json")), report)?;
        let a = &report.aggregate;
        log::info!(
            "{variant}: mean CQES {:?}, coverage q10 {:.3}, q90 {:.3}",
            a.mean_basin_year_cqes,
            a.coverage_q10,
            a.coverage_q90
        );
    }
    timing.insert("total".into(), started.elapsed().as_secs_f64());
    write_json(&dir.join(TIMING_FILE), &timing)?;
    Ok(EvaluationRun { dir, reports })
}
