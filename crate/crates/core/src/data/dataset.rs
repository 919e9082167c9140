use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate};

use super::variables::{DISCHARGE, PRECIPITATION, TEMPERATURE, TEMPERATURE_RANGE_K};
use crate::error::{Error, Result};

/// Daily record of one catchment. Every series shares the date index
/// `start, start + 1, ...`; missing values are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CatchmentDataset {
    pub catchment_id: String,
    pub start: NaiveDate,
    /// Dynamic inputs (drivers and optional extras such as upstream
    /// discharge), keyed by column name.
    pub dynamic: BTreeMap<String, Vec<f64>>,
    pub statics: BTreeMap<String, f64>,
    /// Observed discharge, m³/s.
    pub discharge: Vec<f64>,
}

impl CatchmentDataset {
    pub fn new(
        catchment_id: impl Into<String>,
        start: NaiveDate,
        dynamic: BTreeMap<String, Vec<f64>>,
        statics: BTreeMap<String, f64>,
        discharge: Vec<f64>,
    ) -> Result<Self> {
        let d = CatchmentDataset { catchment_id: catchment_id.into(), start, dynamic, statics, discharge };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.catchment_id;
        if self.discharge.is_empty() {
            return Err(Error::Data(format!("{id}: empty record")));
        }
        if self.dynamic.contains_key(DISCHARGE) {
            return Err(Error::Data(format!("{id}: discharge belongs in the discharge series")));
        }
        for (name, s) in &self.dynamic {
            if s.len() != self.discharge.len() {
                return Err(Error::Data(format!(
                    "{id}: series {name} has {} values, discharge has {}",
                    s.len(),
                    self.discharge.len()
                )));
            }
        }
        if let Some(i) = self.discharge.iter().position(|q| *q < 0.0) {
            return Err(Error::Data(format!("{id}: negative discharge on {}", self.date(i))));
        }
        if let Some(p) = self.dynamic.get(PRECIPITATION) {
            if let Some(i) = p.iter().position(|v| *v < 0.0) {
                return Err(Error::Data(format!("{id}: negative precipitation on {}", self.date(i))));
            }
        }
        if let Some(t) = self.dynamic.get(TEMPERATURE) {
            let (lo, hi) = TEMPERATURE_RANGE_K;
            if let Some(i) = t.iter().position(|v| *v < lo || *v > hi) {
                return Err(Error::Data(format!("{id}: implausible temperature {} K on {}", t[i], self.date(i))));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.discharge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discharge.is_empty()
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    pub fn end(&self) -> NaiveDate {
        self.date(self.len() - 1)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let i = (date - self.start).num_days();
        (i >= 0 && (i as usize) < self.len()).then_some(i as usize)
    }

    /// Calendar years touched by the record.
    pub fn years(&self) -> Vec<i32> {
        (self.start.year()..=self.end().year()).collect()
    }

    /// Series by name; [`DISCHARGE`] resolves to the observations.
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        if name == DISCHARGE {
            Some(&self.discharge)
        } else {
            self.dynamic.get(name).map(Vec::as_slice)
        }
    }

    /// Whether `name` exists with at least one observed value.
    pub fn has_series(&self, name: &str) -> bool {
        self.series(name).is_some_and(|s| s.iter().any(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2000, 12, 30).unwrap()
    }

    #[test]
    fn date_index_and_years() {
        let d = CatchmentDataset::new("a", start(), BTreeMap::new(), BTreeMap::new(), vec![1.0; 4]).unwrap();
        assert_eq!(d.end(), NaiveDate::from_ymd_opt(2001, 1, 2).unwrap());
        assert_eq!(d.years(), vec![2000, 2001]);
        assert_eq!(d.index_of(NaiveDate::from_ymd_opt(2001, 1, 1).unwrap()), Some(2));
        assert_eq!(d.index_of(NaiveDate::from_ymd_opt(2001, 1, 3).unwrap()), None);
        assert!(d.has_series(DISCHARGE));
    }

    #[test]
    fn validation_errors() {
        assert!(CatchmentDataset::new("a", start(), BTreeMap::new(), BTreeMap::new(), vec![1.0, -0.1]).is_err());
        let mut dynamic = BTreeMap::new();
        dynamic.insert(TEMPERATURE.to_string(), vec![280.0, 20.0]);
        assert!(CatchmentDataset::new("a", start(), dynamic, BTreeMap::new(), vec![1.0, 1.0]).is_err());
        let mut dynamic = BTreeMap::new();
        dynamic.insert(PRECIPITATION.to_string(), vec![0.0]);
        assert!(CatchmentDataset::new("a", start(), dynamic, BTreeMap::new(), vec![1.0, 1.0]).is_err());
    }
}
