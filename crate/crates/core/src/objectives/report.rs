use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{cumulative_quantile_loss, score_from_losses};
use crate::error::{Error, Result};
use crate::recurrent::N_QUANTILES;

/// One row of the raw per-date prediction export, physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub catchment_id: String,
    pub date: NaiveDate,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub observed: f64,
}

impl ForecastRecord {
    pub fn quantiles(&self) -> [f64; N_QUANTILES] {
        [self.q10, self.q50, self.q90]
    }
}

/// A model forecast paired with the climatology forecast for the same date.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRecord {
    pub fold_id: usize,
    pub catchment_id: String,
    pub date: NaiveDate,
    pub forecast: [f64; N_QUANTILES],
    pub climatology: [f64; N_QUANTILES],
    pub observed: f64,
}

impl ScoredRecord {
    pub fn forecast_record(&self) -> ForecastRecord {
        let [q10, q50, q90] = self.forecast;
        ForecastRecord { catchment_id: self.catchment_id.clone(), date: self.date, q10, q50, q90, observed: self.observed }
    }

    pub fn climatology_record(&self) -> ForecastRecord {
        let [q10, q50, q90] = self.climatology;
        ForecastRecord { catchment_id: self.catchment_id.clone(), date: self.date, q10, q50, q90, observed: self.observed }
    }

    /// Joins raw model and climatology rows on `(catchment, date)`; the fold
    /// of each row is looked up by `(catchment, year)`.
    pub fn join(
        forecasts: &[ForecastRecord],
        climatology: &[ForecastRecord],
        folds: &BTreeMap<(String, i32), usize>,
    ) -> Result<Vec<ScoredRecord>> {
        let clim: BTreeMap<(&str, NaiveDate), &ForecastRecord> =
            climatology.iter().map(|r| ((r.catchment_id.as_str(), r.date), r)).collect();
        forecasts
            .iter()
            .map(|f| {
                let c = clim.get(&(f.catchment_id.as_str(), f.date)).ok_or_else(|| {
                    Error::Data(format!("no climatology row for {} on {}", f.catchment_id, f.date))
                })?;
                let fold_id = *folds.get(&(f.catchment_id.clone(), f.date.year())).ok_or_else(|| {
                    Error::Data(format!("no fold for {} in {}", f.catchment_id, f.date.year()))
                })?;
                Ok(ScoredRecord {
                    fold_id,
                    catchment_id: f.catchment_id.clone(),
                    date: f.date,
                    forecast: f.quantiles(),
                    climatology: c.quantiles(),
                    observed: f.observed,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinYearScore {
    pub catchment_id: String,
    pub year: i32,
    pub fold_id: usize,
    pub n_days: usize,
    pub mean_loss: f64,
    pub mean_climatology_loss: f64,
    /// Absent when the climatology loss vanishes.
    pub cqes: Option<f64>,
    pub coverage_q10: f64,
    pub coverage_q90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    pub n_days: usize,
    pub n_basin_years: usize,
    pub n_undefined_basin_years: usize,
    pub mean_loss: f64,
    pub mean_climatology_loss: f64,
    /// `1 - mean loss / mean climatology loss` over all pooled days.
    pub pooled_cqes: Option<f64>,
    /// Average of the defined basin-year scores.
    pub mean_basin_year_cqes: Option<f64>,
    pub median_basin_year_cqes: Option<f64>,
    pub coverage_q10: f64,
    pub coverage_q90: f64,
    /// Fraction of days with `q10 > q50` or `q50 > q90`.
    pub quantile_crossing_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold_id: usize,
    pub years: Vec<i32>,
    pub aggregate: AggregateScores,
}

/// Scores of one model variant over every withheld basin-year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub variant: String,
    pub aggregate: AggregateScores,
    pub folds: Vec<FoldSummary>,
    pub basin_years: Vec<BasinYearScore>,
}

impl EvaluationReport {
    pub fn from_records(variant: &str, records: &[ScoredRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Contract(format!("no evaluation records for {variant}")));
        }
        let mut groups: BTreeMap<(String, i32), Vec<&ScoredRecord>> = BTreeMap::new();
        let mut by_fold: BTreeMap<usize, Vec<&ScoredRecord>> = BTreeMap::new();
        for r in records {
            groups.entry((r.catchment_id.clone(), r.date.year())).or_default().push(r);
            by_fold.entry(r.fold_id).or_default().push(r);
        }
        let mut basin_years = Vec::with_capacity(groups.len());
        for ((catchment_id, year), rows) in groups {
            let fold_id = rows[0].fold_id;
            if rows.iter().any(|r| r.fold_id != fold_id) {
                return Err(Error::Contract(format!("{catchment_id} {year} is scored in more than one fold")));
            }
            let s = Summary::of(&rows)?;
            basin_years.push(BasinYearScore {
                catchment_id,
                year,
                fold_id,
                n_days: rows.len(),
                mean_loss: s.mean_loss,
                mean_climatology_loss: s.mean_clim,
                cqes: score_from_losses(s.mean_loss, s.mean_clim).ok(),
                coverage_q10: s.coverage_q10,
                coverage_q90: s.coverage_q90,
            });
        }
        let all: Vec<&ScoredRecord> = records.iter().collect();
        let aggregate = aggregate_scores(&all, &basin_years)?;
        let folds = by_fold
            .into_iter()
            .map(|(fold_id, rows)| {
                let mine: Vec<BasinYearScore> = basin_years.iter().filter(|b| b.fold_id == fold_id).cloned().collect();
                let mut years: Vec<i32> = mine.iter().map(|b| b.year).collect();
                years.sort_unstable();
                years.dedup();
                Ok(FoldSummary { fold_id, years, aggregate: aggregate_scores(&rows, &mine)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EvaluationReport { variant: variant.to_string(), aggregate, folds, basin_years })
    }

    /// Defined basin-year scores, sorted ascending (cumulative-distribution data).
    pub fn sorted_basin_year_cqes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.basin_years.iter().filter_map(|b| b.cqes).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Largest absolute difference between the numeric fields of two reports
    /// with the same structure, or `None` when the structure differs.
    pub fn max_abs_difference(&self, other: &EvaluationReport) -> Option<f64> {
        let a = serde_json::to_value(self).ok()?;
        let b = serde_json::to_value(other).ok()?;
        value_difference(&a, &b)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn value_difference(a: &serde_json::Value, b: &serde_json::Value) -> Option<f64> {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => Some((x.as_f64()? - y.as_f64()?).abs()),
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).try_fold(0.0f64, |m, (p, q)| Some(m.max(value_difference(p, q)?)))
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x
            .iter()
            .try_fold(0.0f64, |m, (k, p)| Some(m.max(value_difference(p, y.get(k)?)?))),
        _ => (a == b).then_some(0.0),
    }
}

struct Summary {
    mean_loss: f64,
    mean_clim: f64,
    coverage_q10: f64,
    coverage_q90: f64,
    crossing_rate: f64,
}

impl Summary {
    fn of(rows: &[&ScoredRecord]) -> Result<Self> {
        let n = rows.len() as f64;
        let (mut loss, mut clim, mut above10, mut above90, mut crossed) = (0.0, 0.0, 0usize, 0usize, 0usize);
        for r in rows {
            loss += cumulative_quantile_loss(r.observed, &r.forecast)?;
            clim += cumulative_quantile_loss(r.observed, &r.climatology)?;
            above10 += usize::from(r.observed > r.forecast[0]);
            above90 += usize::from(r.observed > r.forecast[2]);
            crossed += usize::from(r.forecast[0] > r.forecast[1] || r.forecast[1] > r.forecast[2]);
        }
        Ok(Summary {
            mean_loss: loss / n,
            mean_clim: clim / n,
            coverage_q10: above10 as f64 / n,
            coverage_q90: above90 as f64 / n,
            crossing_rate: crossed as f64 / n,
        })
    }
}

fn aggregate_scores(rows: &[&ScoredRecord], basin_years: &[BasinYearScore]) -> Result<AggregateScores> {
    let s = Summary::of(rows)?;
    let mut defined: Vec<f64> = basin_years.iter().filter_map(|b| b.cqes).collect();
    defined.sort_by(f64::total_cmp);
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let median = (!defined.is_empty()).then(|| super::empirical_quantile(&defined, 0.5));
    Ok(AggregateScores {
        n_days: rows.len(),
        n_basin_years: basin_years.len(),
        n_undefined_basin_years: basin_years.len() - defined.len(),
        mean_loss: s.mean_loss,
        mean_climatology_loss: s.mean_clim,
        pooled_cqes: score_from_losses(s.mean_loss, s.mean_clim).ok(),
        mean_basin_year_cqes: mean,
        median_basin_year_cqes: median,
        coverage_q10: s.coverage_q10,
        coverage_q90: s.coverage_q90,
        quantile_crossing_rate: s.crossing_rate,
    })
}

pub fn write_forecast_csv(path: &Path, rows: &[ForecastRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_forecast_csv(path: &Path) -> Result<Vec<ForecastRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::ingest(path, line, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(fold: usize, id: &str, date: (i32, u32, u32), f: [f64; 3], c: [f64; 3], y: f64) -> ScoredRecord {
        ScoredRecord {
            fold_id: fold,
            catchment_id: id.into(),
            date: NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap(),
            forecast: f,
            climatology: c,
            observed: y,
        }
    }

    #[test]
    fn basin_years_and_pooled_score() {
        let records = vec![
            record(0, "a", (2010, 1, 1), [1.0, 2.0, 3.0], [0.0, 2.0, 6.0], 2.5),
            record(0, "a", (2010, 1, 2), [1.0, 2.0, 3.0], [0.0, 2.0, 6.0], 0.5),
            record(1, "a", (2011, 1, 1), [3.0, 2.0, 1.0], [0.0, 2.0, 6.0], 4.0),
            record(1, "b", (2011, 1, 1), [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 1.0),
        ];
        let rep = EvaluationReport::from_records("m", &records).unwrap();
        assert_eq!(rep.basin_years.len(), 3);
        assert_eq!(rep.aggregate.n_undefined_basin_years, 1);
        assert_eq!(rep.folds.len(), 2);
        assert_eq!(rep.folds[1].years, vec![2011]);
        assert_eq!(rep.aggregate.quantile_crossing_rate, 0.25);
        let loss: f64 = records.iter().map(|r| cumulative_quantile_loss(r.observed, &r.forecast).unwrap()).sum();
        let clim: f64 = records.iter().map(|r| cumulative_quantile_loss(r.observed, &r.climatology).unwrap()).sum();
        assert!((rep.aggregate.pooled_cqes.unwrap() - (1.0 - loss / clim)).abs() < 1e-15);
        assert_eq!(rep.aggregate.coverage_q10, 0.5);
        assert_eq!(rep.sorted_basin_year_cqes().len(), 2);
        assert_eq!(rep.max_abs_difference(&rep), Some(0.0));
    }

    #[test]
    fn forecast_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let rows = vec![
            record(0, "a", (2010, 1, 1), [0.1, 1.0 / 3.0, 2.5e-9], [0.0; 3], 7.25).forecast_record(),
            record(0, "b", (2010, 1, 2), [1e10, -0.0, 3.0], [0.0; 3], 0.0).forecast_record(),
        ];
        write_forecast_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("catchment_id,date,q10,q50,q90,observed\n"));
        assert_eq!(read_forecast_csv(&path).unwrap(), rows);
    }
}
