use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate};

use super::dataset::CatchmentDataset;
use super::normalize::NormalizationStats;
use super::variables::DISCHARGE;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::PLACEHOLDER;

/// Which columns an input window carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Features {
    Shared,
    Extras,
    SharedAndExtras,
    /// `[shared | extras or placeholders | flags]`.
    Flagged,
}

/// One forecast: a trailing window ending the day before `forecast_date`
/// and the discharge on `forecast_date`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub catchment_id: String,
    pub forecast_date: NaiveDate,
    pub window_start: NaiveDate,
    /// `[W x F]`.
    pub window: Tensor,
    pub target_z: f64,
    pub target: f64,
}

impl TrainingExample {
    pub fn last_window_date(&self) -> NaiveDate {
        self.window_start + Duration::days(self.window.rows() as i64 - 1)
    }
}

/// Normalized, row-major copy of one catchment.
#[derive(Debug, Clone)]
pub struct PreparedCatchment {
    pub catchment_id: String,
    pub start: NaiveDate,
    pub len: usize,
    shared: Vec<f64>,
    extras: Vec<f64>,
    pub target_z: Vec<f64>,
    /// Discharge in m³/s.
    pub observed: Vec<f64>,
    /// `shared_gaps[i]`: rows before `i` with a missing shared value.
    shared_gaps: Vec<usize>,
    extra_gaps: Vec<usize>,
}

impl PreparedCatchment {
    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    pub fn day_of(&self, date: NaiveDate) -> Option<usize> {
        let i = (date - self.start).num_days();
        (i >= 0 && (i as usize) < self.len).then_some(i as usize)
    }

    /// Whether every extra variable is observed somewhere in the record.
    pub fn has_extras(&self) -> bool {
        self.extra_gaps[self.len] < self.len
    }
}

/// Which forecast days are usable as examples.
#[derive(Debug, Clone, Default)]
pub struct Selection<'a> {
    /// Years the forecast date must fall in.
    pub years: &'a [i32],
    /// Also require every window date to lie in `years` (training examples).
    pub window_within_years: bool,
    pub require_extras: bool,
    /// Calendar months (1-12) the forecast date must fall in.
    pub months: Option<&'a [u32]>,
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub shared_names: Vec<String>,
    pub extra_names: Vec<String>,
    pub window: usize,
    pub stats: NormalizationStats,
    pub catchments: Vec<PreparedCatchment>,
    n_dynamic: usize,
}

impl PreparedData {
    /// Normalizes `datasets` with `stats`. Shared columns are the dynamic
    /// drivers followed by the static attributes (broadcast over time);
    /// inputs that `stats` dropped are left out. Discharge as an extra uses
    /// the catchment's target scaling.
    pub fn new(
        datasets: &[CatchmentDataset],
        stats: NormalizationStats,
        drivers: &[String],
        statics: &[String],
        extras: &[String],
        window: usize,
    ) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("window must be at least one day".into()));
        }
        let dynamic: Vec<String> = drivers.iter().filter(|n| !stats.dropped.contains(n)).cloned().collect();
        let statics: Vec<String> = statics.iter().filter(|n| !stats.dropped.contains(n)).cloned().collect();
        for name in extras {
            if name != DISCHARGE && !stats.dynamic.contains_key(name) {
                return Err(Error::Config(format!("no statistics for extra variable {name}")));
            }
        }
        let n_dynamic = dynamic.len();
        let mut shared_names = dynamic.clone();
        shared_names.extend(statics.iter().cloned());
        let mut catchments = Vec::with_capacity(datasets.len());
        for d in datasets {
            let len = d.len();
            let mut shared = Vec::with_capacity(len * shared_names.len());
            let static_z: Vec<f64> = statics
                .iter()
                .map(|s| {
                    let v = d.statics.get(s).copied().ok_or_else(|| {
                        Error::Data(format!("{} has no static attribute {s}", d.catchment_id))
                    })?;
                    stats.normalize_static(s, v)
                })
                .collect::<Result<_>>()?;
            let columns: Vec<&[f64]> = dynamic
                .iter()
                .map(|n| d.series(n).ok_or_else(|| Error::Data(format!("{} has no series {n}", d.catchment_id))))
                .collect::<Result<_>>()?;
            let dyn_stats: Vec<_> = dynamic.iter().map(|n| stats.dynamic[n]).collect();
            for t in 0..len {
                for (col, ms) in columns.iter().zip(&dyn_stats) {
                    shared.push(ms.apply(col[t]));
                }
                shared.extend_from_slice(&static_z);
            }
            let target = *stats.target_stats(&d.catchment_id)?;
            let mut extra_cols: Vec<Vec<f64>> = Vec::with_capacity(extras.len());
            for name in extras {
                let col: Vec<f64> = match d.series(name) {
                    None => vec![f64::NAN; len],
                    Some(s) if name == DISCHARGE => s.iter().map(|q| target.apply(q.ln_1p())).collect(),
                    Some(s) => {
                        let ms = stats.dynamic[name];
                        s.iter().map(|v| ms.apply(*v)).collect()
                    }
                };
                extra_cols.push(col);
            }
            let mut extra_rows = Vec::with_capacity(len * extras.len());
            for t in 0..len {
                extra_rows.extend(extra_cols.iter().map(|c| c[t]));
            }
            catchments.push(PreparedCatchment {
                catchment_id: d.catchment_id.clone(),
                start: d.start,
                len,
                shared_gaps: gap_prefix(&shared, shared_names.len(), len),
                extra_gaps: gap_prefix(&extra_rows, extras.len(), len),
                shared,
                extras: extra_rows,
                target_z: d.discharge.iter().map(|q| target.apply(q.ln_1p())).collect(),
                observed: d.discharge.clone(),
            });
        }
        Ok(PreparedData { shared_names, extra_names: extras.to_vec(), window, stats, catchments, n_dynamic })
    }

    pub fn n_shared(&self) -> usize {
        self.shared_names.len()
    }

    /// Shared columns that vary in time (the rest are static attributes).
    pub fn n_dynamic(&self) -> usize {
        self.n_dynamic
    }

    pub fn n_extras(&self) -> usize {
        self.extra_names.len()
    }

    pub fn width(&self, features: Features) -> usize {
        match features {
            Features::Shared => self.n_shared(),
            Features::Extras => self.n_extras(),
            Features::SharedAndExtras => self.n_shared() + self.n_extras(),
            Features::Flagged => self.n_shared() + 2 * self.n_extras(),
        }
    }

    pub fn feature_names(&self, features: Features) -> Vec<String> {
        let mut names = Vec::new();
        if features != Features::Extras {
            names.extend(self.shared_names.iter().cloned());
        }
        if features != Features::Shared {
            names.extend(self.extra_names.iter().cloned());
        }
        if features == Features::Flagged {
            names.extend(self.extra_names.iter().map(|n| super::variables::flag_name(n)));
        }
        names
    }

    pub fn catchment_index(&self, id: &str) -> Option<usize> {
        self.catchments.iter().position(|c| c.catchment_id == id)
    }

    /// Target-day indices usable as examples, ascending. A day `t` needs a
    /// full window `t - W .. t - 1` without missing inputs and an observed
    /// target.
    pub fn example_days(&self, catchment: usize, sel: &Selection<'_>) -> Result<Vec<usize>> {
        let c = &self.catchments[catchment];
        let w = self.window;
        if w >= c.len {
            return Err(Error::Config(format!(
                "window of {w} days does not fit the {}-day record of {}",
                c.len, c.catchment_id
            )));
        }
        let years: BTreeSet<i32> = sel.years.iter().copied().collect();
        let outside: Vec<usize> = if sel.window_within_years {
            let mut prefix = Vec::with_capacity(c.len + 1);
            prefix.push(0);
            for t in 0..c.len {
                prefix.push(prefix[t] + usize::from(!years.contains(&c.date(t).year())));
            }
            prefix
        } else {
            Vec::new()
        };
        let days = (w..c.len)
            .filter(|&t| {
                let date = c.date(t);
                years.contains(&date.year())
                    && sel.months.is_none_or(|m| m.contains(&date.month()))
                    && c.target_z[t].is_finite()
                    && c.shared_gaps[t] == c.shared_gaps[t - w]
                    && (!sel.require_extras || c.extra_gaps[t] == c.extra_gaps[t - w])
                    && (!sel.window_within_years || outside[t] == outside[t - w])
            })
            .collect();
        Ok(days)
    }

    /// Per-timestep `[B x F]` inputs for the examples `days` of one
    /// catchment. `masked` (one entry per day) is required for
    /// [`Features::Flagged`]; examples whose extras window has gaps are
    /// always given in masked form.
    pub fn steps(&self, catchment: usize, days: &[usize], features: Features, masked: Option<&[bool]>) -> Result<Vec<Tensor>> {
        let c = &self.catchments[catchment];
        let (w, b, f) = (self.window, days.len(), self.width(features));
        let (ns, ne) = (self.n_shared(), self.n_extras());
        if features == Features::Flagged && masked.is_none_or(|m| m.len() != b) {
            return Err(Error::Contract("flagged inputs need one mask per example".into()));
        }
        if let Some(&t) = days.iter().find(|&&t| t < w || t >= c.len) {
            return Err(Error::Contract(format!("day {t} has no full window in {}", c.catchment_id)));
        }
        let hidden: Vec<bool> = match masked {
            Some(m) if features == Features::Flagged => {
                days.iter().zip(m).map(|(&t, &m)| m || c.extra_gaps[t] != c.extra_gaps[t - w]).collect()
            }
            _ => Vec::new(),
        };
        let mut steps = Vec::with_capacity(w);
        for k in 0..w {
            let mut values = Vec::with_capacity(b * f);
            for (i, &t) in days.iter().enumerate() {
                let row = t - w + k;
                let shared = &c.shared[row * ns..(row + 1) * ns];
                let extras = &c.extras[row * ne..(row + 1) * ne];
                match features {
                    Features::Shared => values.extend_from_slice(shared),
                    Features::Extras => values.extend_from_slice(extras),
                    Features::SharedAndExtras => {
                        values.extend_from_slice(shared);
                        values.extend_from_slice(extras);
                    }
                    Features::Flagged => {
                        values.extend_from_slice(shared);
                        if hidden[i] {
                            values.extend(std::iter::repeat_n(PLACEHOLDER, ne));
                            values.extend(std::iter::repeat_n(0.0, ne));
                        } else {
                            values.extend_from_slice(extras);
                            values.extend(std::iter::repeat_n(1.0, ne));
                        }
                    }
                }
            }
            steps.push(Tensor::matrix(b, f, values)?);
        }
        Ok(steps)
    }

    pub fn targets(&self, catchment: usize, days: &[usize]) -> Vec<f64> {
        days.iter().map(|&t| self.catchments[catchment].target_z[t]).collect()
    }

    /// A single example with an unbatched `[W x F]` window.
    pub fn example(&self, catchment: usize, day: usize, features: Features) -> Result<TrainingExample> {
        if features == Features::Flagged {
            return Err(Error::Contract("flag masking is applied to a SharedAndExtras example".into()));
        }
        let steps = self.steps(catchment, &[day], features, None)?;
        let f = self.width(features);
        let values: Vec<f64> = steps.iter().flat_map(|s| s.values().iter().copied()).collect();
        let c = &self.catchments[catchment];
        Ok(TrainingExample {
            catchment_id: c.catchment_id.clone(),
            forecast_date: c.date(day),
            window_start: c.date(day - self.window),
            window: Tensor::matrix(self.window, f, values)?,
            target_z: c.target_z[day],
            target: c.observed[day],
        })
    }
}

fn gap_prefix(rows: &[f64], width: usize, len: usize) -> Vec<usize> {
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0);
    for t in 0..len {
        let gap = rows[t * width..(t + 1) * width].iter().any(|v| v.is_nan());
        prefix.push(prefix[t] + usize::from(gap));
    }
    prefix
}
