use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Datelike;
use hydra_core::data::SplitPlan;
use hydra_core::objectives::{read_forecast_csv, EvaluationReport, ForecastRecord, ScoredRecord};
use hydra_core::Error;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::evaluate::{CLIMATOLOGY_FILE, FORECAST_DIR, REPORT_DIR, SPLITS_FILE};
use crate::output::{create_dir, read_json};

/// Largest tolerated gap between a stored report and its recomputation.
pub const RECOMPUTE_TOLERANCE: f64 = 1e-10;

/// One row of the architecture comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub run: String,
    pub variant: String,
    pub n_basin_years: usize,
    pub mean_cqes: Option<f64>,
    pub median_cqes: Option<f64>,
    pub pooled_cqes: Option<f64>,
    pub coverage_q10: f64,
    pub coverage_q90: f64,
}

/// A run directory's raw artifacts and the reports they reproduce.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub name: String,
    pub forecasts: BTreeMap<String, Vec<ForecastRecord>>,
    pub climatology: Vec<ForecastRecord>,
    pub reports: BTreeMap<String, EvaluationReport>,
}

fn run_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn stored_variants(dir: &Path) -> Vec<String> {
    let Ok(entries) = fs::read_dir(dir.join(REPORT_DIR)) else { return Vec::new() };
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(str::to_string))
        .collect();
    names.sort();
    names
}

/// Paths a run directory lacks for reporting.
pub fn missing_artifacts(dir: &Path) -> Vec<PathBuf> {
    let mut missing: Vec<PathBuf> = [SPLITS_FILE, CLIMATOLOGY_FILE].iter().map(|f| dir.join(f)).filter(|p| !p.is_file()).collect();
    let variants = stored_variants(dir);
    if variants.is_empty() {
        missing.push(dir.join(REPORT_DIR).join("*.json"));
    }
    for v in variants {
        let p = dir.join(FORECAST_DIR).join(format!("{v}.csv"));
        if !p.is_file() {
            missing.push(p);
        }
    }
    missing
}

/// Reads a run directory and recomputes every stored report from the raw
/// prediction and climatology CSVs, failing if any number disagrees.
pub fn load_run(dir: &Path) -> CliResult<LoadedRun> {
    let plans: Vec<SplitPlan> = read_json(&dir.join(SPLITS_FILE))?;
    let year_fold: BTreeMap<i32, usize> = plans.iter().filter_map(|p| p.test_year.map(|y| (y, p.fold_id))).collect();
    let climatology = read_forecast_csv(&dir.join(CLIMATOLOGY_FILE))?;
    let mut run = LoadedRun { name: run_name(dir), forecasts: BTreeMap::new(), climatology, reports: BTreeMap::new() };
    for variant in stored_variants(dir) {
        let path = dir.join(REPORT_DIR).join(format!("{variant}.json"));
        let stored: EvaluationReport = read_json(&path)?;
        let rows = read_forecast_csv(&dir.join(FORECAST_DIR).join(format!("{variant}.csv")))?;
        let mut folds = BTreeMap::new();
        for r in &rows {
            let year = r.date.year();
            let fold = year_fold.get(&year).ok_or_else(|| Error::Data(format!("{variant}: {year} is not a test year")))?;
            folds.insert((r.catchment_id.clone(), year), *fold);
        }
        let scored = ScoredRecord::join(&rows, &run.climatology, &folds)?;
        let recomputed = EvaluationReport::from_records(&variant, &scored)?;
        let difference = recomputed.max_abs_difference(&stored).unwrap_or(f64::INFINITY);
        if !(difference <= RECOMPUTE_TOLERANCE) {
            return Err(CliError::Inconsistent { path, difference });
        }
        run.forecasts.insert(variant.clone(), rows);
        run.reports.insert(variant, recomputed);
    }
    Ok(run)
}

fn write_csv<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Serialize)]
struct CdfRow {
    rank: usize,
    cqes: f64,
    cumulative_fraction: f64,
}

#[derive(Serialize)]
struct HydrographRow {
    date: chrono::NaiveDate,
    observed: f64,
    q10: f64,
    q50: f64,
    q90: f64,
    climatology_q10: f64,
    climatology_q50: f64,
    climatology_q90: f64,
}

/// Writes `comparison.csv`, sorted basin-year CQES per variant under
/// `cdf/` and per-catchment hydrographs under `hydrographs/`.
pub fn run_report(run_dirs: &[PathBuf], out: &Path) -> CliResult<Vec<ComparisonRow>> {
    let missing: Vec<PathBuf> = run_dirs.iter().flat_map(|d| missing_artifacts(d)).collect();
    if !missing.is_empty() {
        return Err(CliError::MissingArtifacts(missing));
    }
    let runs = run_dirs.iter().map(|d| load_run(d)).collect::<CliResult<Vec<_>>>()?;
    let mut table = Vec::new();
    for run in &runs {
        let clim: BTreeMap<(&str, chrono::NaiveDate), &ForecastRecord> =
            run.climatology.iter().map(|r| ((r.catchment_id.as_str(), r.date), r)).collect();
        for (variant, report) in &run.reports {
            let a = &report.aggregate;
            table.push(ComparisonRow {
                run: run.name.clone(),
                variant: variant.clone(),
                n_basin_years: a.n_basin_years,
                mean_cqes: a.mean_basin_year_cqes,
                median_cqes: a.median_basin_year_cqes,
                pooled_cqes: a.pooled_cqes,
                coverage_q10: a.coverage_q10,
                coverage_q90: a.coverage_q90,
            });
            let sorted = report.sorted_basin_year_cqes();
            let n = sorted.len();
            let cdf = sorted.into_iter().enumerate().map(|(i, cqes)| CdfRow { rank: i + 1, cqes, cumulative_fraction: (i + 1) as f64 / n as f64 });
            write_csv(&out.join("cdf").join(format!("{}__{variant}.csv", run.name)), cdf)?;
            let mut by_catchment: BTreeMap<&str, Vec<HydrographRow>> = BTreeMap::new();
            for r in &run.forecasts[variant] {
                let c = clim[&(r.catchment_id.as_str(), r.date)];
                by_catchment.entry(&r.catchment_id).or_default().push(HydrographRow {
                    date: r.date,
                    observed: r.observed,
                    q10: r.q10,
                    q50: r.q50,
                    q90: r.q90,
                    climatology_q10: c.q10,
                    climatology_q50: c.q50,
                    climatology_q90: c.q90,
                });
            }
            for (catchment, rows) in by_catchment {
                write_csv(&out.join("hydrographs").join(&run.name).join(variant).join(format!("{catchment}.csv")), rows)?;
            }
        }
    }
    write_csv(&out.join("comparison.csv"), &table)?;
    Ok(table)
}
