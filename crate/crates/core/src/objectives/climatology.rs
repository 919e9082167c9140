use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::TAUS;
use crate::error::{Error, Result};
use crate::recurrent::N_QUANTILES;

/// Calendar days per climatology year; Feb 29 shares Feb 28's slot.
pub const DAYS_PER_YEAR: usize = 365;

/// Zero-based day of a non-leap calendar year.
pub fn day_of_year_index(date: NaiveDate) -> usize {
    let day = if date.month() == 2 && date.day() == 29 { 28 } else { date.day() };
    NaiveDate::from_ymd_opt(2001, date.month(), day).expect("valid calendar day").ordinal0() as usize
}

/// Linear interpolation between order statistics: position `(n - 1) * tau`
/// in the sorted sample.
pub fn empirical_quantile(sorted: &[f64], tau: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * tau;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatchmentClimatology {
    /// `[q10, q50, q90]` per day-of-year slot.
    pub quantiles: Vec<[f64; N_QUANTILES]>,
    /// Slots with no observations, filled from the nearest populated slot.
    pub fallback_days: Vec<usize>,
}

/// Per-catchment, per-calendar-day empirical quantiles of discharge.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Climatology {
    pub catchments: BTreeMap<String, CatchmentClimatology>,
}

impl Climatology {
    /// Fits from `(catchment, dated observations)` pairs. Callers pass only
    /// training-period observations; missing values (NaN) are skipped.
    pub fn fit<'a>(series: impl IntoIterator<Item = (&'a str, Vec<(NaiveDate, f64)>)>) -> Result<Self> {
        let mut catchments = BTreeMap::new();
        for (id, obs) in series {
            let mut slots: Vec<Vec<f64>> = vec![Vec::new(); DAYS_PER_YEAR];
            let mut years = BTreeSet::new();
            for (date, v) in obs {
                if v.is_nan() {
                    continue;
                }
                years.insert(date.year());
                slots[day_of_year_index(date)].push(v);
            }
            if years.len() < 2 {
                return Err(Error::Data(format!(
                    "climatology for {id} needs at least two years of observations, found {}",
                    years.len()
                )));
            }
            catchments.insert(id.to_string(), fit_slots(slots));
        }
        Ok(Climatology { catchments })
    }

    pub fn forecast(&self, catchment: &str, date: NaiveDate) -> Result<[f64; N_QUANTILES]> {
        let c = self
            .catchments
            .get(catchment)
            .ok_or_else(|| Error::Data(format!("no climatology for catchment {catchment}")))?;
        Ok(c.quantiles[day_of_year_index(date)])
    }
}

fn fit_slots(mut slots: Vec<Vec<f64>>) -> CatchmentClimatology {
    let mut quantiles: Vec<Option<[f64; N_QUANTILES]>> = slots
        .iter_mut()
        .map(|s| {
            if s.is_empty() {
                return None;
            }
            s.sort_by(f64::total_cmp);
            Some(TAUS.map(|t| empirical_quantile(s, t)))
        })
        .collect();
    let filled: Vec<usize> = (0..DAYS_PER_YEAR).filter(|&d| quantiles[d].is_some()).collect();
    let mut fallback_days = Vec::new();
    for d in 0..DAYS_PER_YEAR {
        if quantiles[d].is_none() {
            // nearest populated slot on the circular calendar, earlier day on ties
            let nearest = *filled
                .iter()
                .min_by_key(|&&f| {
                    let diff = f.abs_diff(d);
                    (diff.min(DAYS_PER_YEAR - diff), f)
                })
                .expect("at least one observation");
            quantiles[d] = quantiles[nearest];
            fallback_days.push(d);
        }
    }
    CatchmentClimatology { quantiles: quantiles.into_iter().map(|q| q.expect("filled")).collect(), fallback_days }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::cqes;

    fn days(year: i32) -> impl Iterator<Item = NaiveDate> {
        let start = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        start.iter_days().take_while(move |d| d.year() == year)
    }

    #[test]
    fn day_index_merges_leap_day() {
        let feb28 = NaiveDate::from_ymd_opt(2020, 2, 28).unwrap();
        let feb29 = NaiveDate::from_ymd_opt(2020, 2, 29).unwrap();
        assert_eq!(day_of_year_index(feb28), day_of_year_index(feb29));
        assert_eq!(day_of_year_index(NaiveDate::from_ymd_opt(2020, 12, 31).unwrap()), 364);
        assert_eq!(day_of_year_index(NaiveDate::from_ymd_opt(2019, 3, 1).unwrap()), 59);
    }

    #[test]
    fn one_to_ten_median_is_five_and_a_half() {
        let sorted: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&sorted, 0.5), 5.5);
        assert!((empirical_quantile(&sorted, 0.1) - 1.9).abs() < 1e-12);
        assert!((empirical_quantile(&sorted, 0.9) - 9.1).abs() < 1e-12);
    }

    #[test]
    fn identical_years_reproduce_the_series() {
        let value = |d: NaiveDate| 1.0 + (day_of_year_index(d) as f64 / 40.0).sin().abs();
        let obs: Vec<(NaiveDate, f64)> = (2001..2004).flat_map(days).map(|d| (d, value(d))).collect();
        let clim = Climatology::fit([("a", obs)]).unwrap();
        for d in days(2002) {
            assert_eq!(clim.forecast("a", d).unwrap(), [value(d); 3]);
        }
        assert!(clim.catchments["a"].fallback_days.is_empty());
    }

    #[test]
    fn gaps_fall_back_to_nearest_day() {
        let obs: Vec<(NaiveDate, f64)> = (2001..2003)
            .flat_map(days)
            .filter(|d| d.month() != 6)
            .map(|d| (d, day_of_year_index(d) as f64))
            .collect();
        let clim = Climatology::fit([("a", obs)]).unwrap();
        let c = &clim.catchments["a"];
        assert_eq!(c.fallback_days.len(), 30);
        let june1 = NaiveDate::from_ymd_opt(2001, 6, 1).unwrap();
        let may31 = NaiveDate::from_ymd_opt(2001, 5, 31).unwrap();
        assert_eq!(clim.forecast("a", june1).unwrap(), clim.forecast("a", may31).unwrap());
    }

    #[test]
    fn single_year_is_rejected() {
        let obs: Vec<(NaiveDate, f64)> = days(2001).map(|d| (d, 1.0)).collect();
        assert!(matches!(Climatology::fit([("a", obs)]), Err(Error::Data(_))));
    }

    #[test]
    fn self_score_is_zero() {
        let obs: Vec<(NaiveDate, f64)> = (2001..2007)
            .flat_map(days)
            .map(|d| (d, 2.0 + ((d.num_days_from_ce() as i64 * 7919) % 113) as f64 / 10.0))
            .collect();
        let clim = Climatology::fit([("a", obs.clone())]).unwrap();
        let y: Vec<f64> = obs.iter().map(|o| o.1).collect();
        let f: Vec<[f64; 3]> = obs.iter().map(|o| clim.forecast("a", o.0).unwrap()).collect();
        assert!(cqes(&y, &f, &f).unwrap().abs() <= 1e-12);
    }
}
