use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use rayon::prelude::*;

use super::fit::TrainConfig;
use super::run::{train_model, Experiment, TrainedRun};
use crate::data::{CatchmentDataset, SplitPlan};
use crate::error::{Error, Result};
use crate::objectives::{Climatology, EvaluationReport, ForecastRecord, ScoredRecord};

/// Years covered by any catchment, ascending.
pub fn record_years(datasets: &[CatchmentDataset]) -> Vec<i32> {
    datasets.iter().flat_map(|d| d.years()).collect::<BTreeSet<_>>().into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub plan: SplitPlan,
    pub run: TrainedRun,
    /// Test-year forecasts per variant.
    pub forecasts: BTreeMap<String, Vec<ForecastRecord>>,
    /// Climatology forecasts for every date any variant forecast.
    pub climatology: Vec<ForecastRecord>,
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    pub reports: BTreeMap<String, EvaluationReport>,
}

impl CrossValidation {
    /// `(catchment, test year) -> fold` over every fold.
    pub fn fold_index(&self) -> BTreeMap<(String, i32), usize> {
        fold_index(&self.folds)
    }
}

fn fold_index(folds: &[FoldResult]) -> BTreeMap<(String, i32), usize> {
    let mut out = BTreeMap::new();
    for f in folds {
        let Some(year) = f.plan.test_year else { continue };
        for c in &f.run.data.catchments {
            out.insert((c.catchment_id.clone(), year), f.plan.fold_id);
        }
    }
    out
}

/// Climatology fitted on the training years of `plan`, evaluated on every
/// `(catchment, date)` forecast by any variant.
pub fn climatology_forecasts(
    datasets: &[CatchmentDataset],
    plan: &SplitPlan,
    forecasts: &BTreeMap<String, Vec<ForecastRecord>>,
) -> Result<Vec<ForecastRecord>> {
    let clim = Climatology::fit(datasets.iter().map(|d| {
        let obs = (0..d.len())
            .filter(|&i| plan.training_years.contains(&d.date(i).year()))
            .map(|i| (d.date(i), d.discharge[i]))
            .collect();
        (d.catchment_id.as_str(), obs)
    }))?;
    let mut rows: BTreeMap<(String, chrono::NaiveDate), f64> = BTreeMap::new();
    for r in forecasts.values().flatten() {
        rows.insert((r.catchment_id.clone(), r.date), r.observed);
    }
    rows.into_iter()
        .map(|((id, date), observed)| {
            let [q10, q50, q90] = clim.forecast(&id, date)?;
            Ok(ForecastRecord { catchment_id: id, date, q10, q50, q90, observed })
        })
        .collect()
}

/// Trains and scores one fold.
pub fn run_fold(experiment: &Experiment, datasets: &[CatchmentDataset], plan: &SplitPlan, cfg: &TrainConfig) -> Result<FoldResult> {
    score_fold(train_model(experiment, datasets, plan, cfg)?, datasets)
}

/// Test-year forecasts of a trained fold with matching climatology.
pub fn score_fold(run: TrainedRun, datasets: &[CatchmentDataset]) -> Result<FoldResult> {
    let plan = run.split.clone();
    let test = plan.test_year.ok_or_else(|| Error::Config("a cross-validation fold needs a test year".into()))?;
    if run.diverged() {
        return Err(Error::Training(format!("fold {} diverged (validation loss not finite)", plan.fold_id)));
    }
    let forecasts = run.forecasts(&[test])?;
    let climatology = climatology_forecasts(datasets, &plan, &forecasts)?;
    Ok(FoldResult { plan, run, forecasts, climatology })
}

/// Scores every variant over the test years of `folds`.
pub fn reports(folds: &[FoldResult]) -> Result<BTreeMap<String, EvaluationReport>> {
    let index = fold_index(folds);
    let variants: BTreeSet<&String> = folds.iter().flat_map(|f| f.forecasts.keys()).collect();
    let mut out = BTreeMap::new();
    for v in variants {
        let mut scored = Vec::new();
        for f in folds {
            if let Some(rows) = f.forecasts.get(v) {
                scored.extend(ScoredRecord::join(rows, &f.climatology, &index)?);
            }
        }
        if scored.is_empty() {
            log::warn!("variant {v} produced no forecasts");
            continue;
        }
        out.insert(v.clone(), EvaluationReport::from_records(v, &scored)?);
    }
    Ok(out)
}

/// Leave-one-year-out cross-validation over `n_folds` test years, with up
/// to `jobs` folds trained concurrently. Results do not depend on `jobs`.
pub fn cross_validate(
    experiment: &Experiment,
    datasets: &[CatchmentDataset],
    n_folds: usize,
    validation_years: Option<&[i32]>,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<CrossValidation> {
    let plans = SplitPlan::folds(&record_years(datasets), n_folds, validation_years)?;
    let folds = in_pool(jobs, || plans.par_iter().map(|p| run_fold(experiment, datasets, p, cfg)).collect::<Result<Vec<_>>>())??;
    let reports = reports(&folds)?;
    Ok(CrossValidation { folds, reports })
}

/// Runs `f` on a dedicated pool of `jobs` threads.
pub fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Err(Error::Config("jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
