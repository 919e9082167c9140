use std::collections::BTreeMap;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::dataset::CatchmentDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation of the finite values.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<MeanStd> {
        let finite: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return None;
        }
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Training-split statistics: dynamic inputs pooled over catchments and
/// dates, static attributes across catchments, and the per-catchment
/// log1p-discharge target.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub dynamic: BTreeMap<String, MeanStd>,
    pub statics: BTreeMap<String, MeanStd>,
    pub target: BTreeMap<String, MeanStd>,
    /// Constant inputs removed from the variable set.
    pub dropped: Vec<String>,
}

impl NormalizationStats {
    pub fn fit(
        datasets: &[CatchmentDataset],
        training_years: &[i32],
        dynamic_names: &[String],
        static_names: &[String],
    ) -> Result<Self> {
        let in_training = |d: &CatchmentDataset, i: usize| training_years.contains(&d.date(i).year());
        let mut stats = NormalizationStats::default();
        for name in dynamic_names {
            let values = datasets.iter().flat_map(|d| {
                let s = d.series(name).unwrap_or(&[]);
                s.iter().enumerate().filter(move |(i, _)| in_training(d, *i)).map(|(_, v)| *v)
            });
            match MeanStd::of(values) {
                Some(ms) if ms.std > 0.0 => {
                    stats.dynamic.insert(name.clone(), ms);
                }
                Some(_) => {
                    log::warn!("dropping constant input {name}");
                    stats.dropped.push(name.clone());
                }
                None => return Err(Error::Data(format!("no training values for input {name}"))),
            }
        }
        for name in static_names {
            let values = datasets.iter().map(|d| d.statics.get(name).copied().unwrap_or(f64::NAN));
            match MeanStd::of(values) {
                Some(ms) if ms.std > 0.0 => {
                    stats.statics.insert(name.clone(), ms);
                }
                Some(_) => {
                    log::warn!("dropping static attribute {name}: constant across catchments");
                    stats.dropped.push(name.clone());
                }
                None => return Err(Error::Data(format!("no values for static attribute {name}"))),
            }
        }
        for d in datasets {
            let logs = d.discharge.iter().enumerate().filter(|(i, _)| in_training(d, *i)).map(|(_, q)| q.ln_1p());
            let mut ms = MeanStd::of(logs).ok_or_else(|| {
                Error::Data(format!("{} has no discharge observations in the training years", d.catchment_id))
            })?;
            if ms.std == 0.0 {
                log::warn!("{}: constant training discharge, using unit target scale", d.catchment_id);
                ms.std = 1.0;
            }
            stats.target.insert(d.catchment_id.clone(), ms);
        }
        Ok(stats)
    }

    pub fn normalize(&self, name: &str, v: f64) -> Result<f64> {
        Ok(self.dynamic_stats(name)?.apply(v))
    }

    pub fn denormalize(&self, name: &str, z: f64) -> Result<f64> {
        Ok(self.dynamic_stats(name)?.invert(z))
    }

    pub fn normalize_static(&self, name: &str, v: f64) -> Result<f64> {
        let ms = self.statics.get(name).ok_or_else(|| Error::Config(format!("no statistics for attribute {name}")))?;
        Ok(ms.apply(v))
    }

    /// `(log1p(q) - mean) / std` for the catchment.
    pub fn normalize_target(&self, catchment: &str, q: f64) -> Result<f64> {
        Ok(self.target_stats(catchment)?.apply(q.ln_1p()))
    }

    /// `expm1(z * std + mean)`, the exact inverse of [`Self::normalize_target`].
    pub fn denormalize_target(&self, catchment: &str, z: f64) -> Result<f64> {
        Ok(self.target_stats(catchment)?.invert(z).exp_m1())
    }

    fn dynamic_stats(&self, name: &str) -> Result<&MeanStd> {
        self.dynamic.get(name).ok_or_else(|| Error::Config(format!("no statistics for variable {name}")))
    }

    pub fn target_stats(&self, catchment: &str) -> Result<&MeanStd> {
        self.target.get(catchment).ok_or_else(|| Error::Config(format!("no target statistics for catchment {catchment}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn dataset(id: &str, q: Vec<f64>, temp: Vec<f64>, area: f64) -> CatchmentDataset {
        let mut dynamic = BTreeMap::new();
        dynamic.insert("t".to_string(), temp);
        dynamic.insert("flat".to_string(), vec![3.0; q.len()]);
        let mut statics = BTreeMap::new();
        statics.insert("area".to_string(), area);
        statics.insert("same".to_string(), 1.0);
        CatchmentDataset::new(id, NaiveDate::from_ymd_opt(2001, 12, 30).unwrap(), dynamic, statics, q).unwrap()
    }

    #[test]
    fn constants_dropped_and_target_standardized() {
        let a = dataset("a", vec![1.0, 2.0, 9.0, 4.0], vec![1.0, 2.0, 3.0, 100.0], 10.0);
        let b = dataset("b", vec![0.5, 0.5, 30.0, 1.0], vec![2.0, 4.0, 6.0, 100.0], 20.0);
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let stats = NormalizationStats::fit(&[a.clone(), b.clone()], &[2001], &names(&["t", "flat"]), &names(&["area", "same"]))
            .unwrap();
        assert_eq!(stats.dropped, vec!["flat", "same"]);
        // training year 2001 covers the first two days only
        let t = stats.dynamic["t"];
        assert_eq!(t.mean, 2.25);
        for d in [&a, &b] {
            let z: Vec<f64> = d.discharge[..2].iter().map(|q| stats.normalize_target(&d.catchment_id, *q).unwrap()).collect();
            let ms = MeanStd::of(z.clone());
            if d.catchment_id == "a" {
                let ms = ms.unwrap();
                assert!(ms.mean.abs() < 1e-12 && (ms.std - 1.0).abs() < 1e-12);
            } else {
                // constant training discharge: unit scale
                assert_eq!(z, vec![0.0, 0.0]);
            }
        }
        assert!(matches!(stats.normalize("unknown", 1.0), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn target_round_trip(q in 0.0f64..1e4, mean in -2.0f64..5.0, std in 0.1f64..3.0) {
            let mut stats = NormalizationStats::default();
            stats.target.insert("c".into(), MeanStd { mean, std });
            let z = stats.normalize_target("c", q).unwrap();
            let back = stats.denormalize_target("c", z).unwrap();
            prop_assert!((back - q).abs() <= 1e-12 * (1.0 + q));
        }
    }
}
