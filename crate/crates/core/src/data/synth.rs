//! Synthetic multi-catchment generator: seasonal weather, a degree-day
//! snow store and a linear reservoir producing daily discharge.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::CatchmentDataset;
use super::variables::*;
use crate::error::{Error, Result};

const FREEZING_K: f64 = 273.15;
const LAPSE_RATE_K_PER_M: f64 = 0.0065;
const SECONDS_PER_DAY: f64 = 86_400.0;

/// Generator settings. Two-element arrays are `[min, max]` ranges from which
/// each catchment draws uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub start_year: i32,
    /// Years simulated and discarded before the record starts.
    pub spinup_years: usize,
    /// Reservoir storage at the start of the spin-up, mm.
    pub initial_storage_mm: f64,
    /// Daily storage retention `a`.
    pub recession: [f64; 2],
    /// Fraction `c` of the reservoir outflow that reaches the gauge; the
    /// discharge rate is `k = c (1 - a)`.
    pub discharge_coefficient: [f64; 2],
    pub area_km2: [f64; 2],
    pub elevation_m: [f64; 2],
    /// Annual mean temperature at sea level, K.
    pub sea_level_temperature_k: [f64; 2],
    pub temperature_amplitude_k: f64,
    pub temperature_noise_k: f64,
    /// Long-run mean precipitation, mm/day.
    pub precipitation_mm_day: [f64; 2],
    pub wet_day_probability: f64,
    /// Relative amplitude of the winter-wet precipitation cycle.
    pub precipitation_seasonality: f64,
    /// Log-scale standard deviation of the multiplicative, mean-preserving
    /// error on reported precipitation. The reservoir sees the true value.
    pub precipitation_observation_error: f64,
    pub degree_day_factor_mm_k: f64,
    /// Potential evaporation at 20 K above freezing, mm/day.
    pub potential_evaporation_mm_day: f64,
    /// Standard deviation of the multiplicative discharge noise.
    pub discharge_noise: f64,
    /// Cap on the absolute discharge noise.
    pub discharge_noise_limit: f64,
    /// Fraction of catchments (the first ones by id) with an upstream gauge.
    pub upstream_fraction: f64,
    pub upstream_lag_days: usize,
    pub upstream_scale: [f64; 2],
    pub upstream_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start_year: 2000,
            spinup_years: 1,
            initial_storage_mm: 50.0,
            recession: [0.93, 0.97],
            discharge_coefficient: [0.5, 0.85],
            area_km2: [50.0, 2000.0],
            elevation_m: [50.0, 1500.0],
            sea_level_temperature_k: [280.0, 290.0],
            temperature_amplitude_k: 10.0,
            temperature_noise_k: 2.0,
            precipitation_mm_day: [1.5, 4.0],
            wet_day_probability: 0.4,
            precipitation_seasonality: 0.4,
            precipitation_observation_error: 0.3,
            degree_day_factor_mm_k: 3.0,
            potential_evaporation_mm_day: 3.0,
            discharge_noise: 0.05,
            discharge_noise_limit: 0.15,
            upstream_fraction: 0.5,
            upstream_lag_days: 1,
            upstream_scale: [0.3, 0.7],
            upstream_noise: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("recession", self.recession),
            ("discharge_coefficient", self.discharge_coefficient),
            ("area_km2", self.area_km2),
            ("elevation_m", self.elevation_m),
            ("sea_level_temperature_k", self.sea_level_temperature_k),
            ("precipitation_mm_day", self.precipitation_mm_day),
            ("upstream_scale", self.upstream_scale),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] is invalid")));
            }
        }
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.to_string())) };
        check(self.recession[0] > 0.0 && self.recession[1] < 1.0, "recession must lie in (0, 1)")?;
        check(self.discharge_coefficient[0] > 0.0, "discharge_coefficient must be positive")?;
        check(
            self.discharge_coefficient[1] * (1.0 + self.discharge_noise_limit) <= 1.0,
            "discharge_coefficient * (1 + discharge_noise_limit) must not exceed 1",
        )?;
        check(self.area_km2[0] > 0.0, "area_km2 must be positive")?;
        check(self.precipitation_mm_day[0] >= 0.0, "precipitation_mm_day must be non-negative")?;
        check(
            self.wet_day_probability > 0.0 && self.wet_day_probability <= 1.0,
            "wet_day_probability must lie in (0, 1]",
        )?;
        check(
            (0.0..1.0).contains(&self.precipitation_seasonality),
            "precipitation_seasonality must lie in [0, 1)",
        )?;
        let non_negative = [
            ("initial_storage_mm", self.initial_storage_mm),
            ("temperature_amplitude_k", self.temperature_amplitude_k),
            ("temperature_noise_k", self.temperature_noise_k),
            ("precipitation_observation_error", self.precipitation_observation_error),
            ("degree_day_factor_mm_k", self.degree_day_factor_mm_k),
            ("potential_evaporation_mm_day", self.potential_evaporation_mm_day),
            ("discharge_noise", self.discharge_noise),
            ("discharge_noise_limit", self.discharge_noise_limit),
            ("upstream_noise", self.upstream_noise),
        ];
        for (name, v) in non_negative {
            check(v.is_finite() && v >= 0.0, &format!("{name} must be finite and non-negative"))?;
        }
        check((0.0..=1.0).contains(&self.upstream_fraction), "upstream_fraction must lie in [0, 1]")?;
        check(self.upstream_lag_days >= 1, "upstream_lag_days must be at least 1")?;
        Ok(())
    }
}

/// Parameters drawn for one catchment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatchmentParameters {
    pub recession: f64,
    pub discharge_coefficient: f64,
    pub area_km2: f64,
    pub elevation_m: f64,
    pub mean_temperature_k: f64,
    pub precipitation_mm_day: f64,
    pub upstream_scale: Option<f64>,
}

/// A generated catchment with the latent quantities the observations hide.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: CatchmentDataset,
    pub parameters: CatchmentParameters,
    /// Precipitation before observation error, mm/day.
    pub true_precipitation: Vec<f64>,
    /// Reservoir plus snow storage at the start of the record, mm.
    pub initial_storage_mm: f64,
    /// Discharge in mm/day over the catchment.
    pub discharge_mm_day: Vec<f64>,
}

pub fn catchment_id(index: usize) -> String {
    format!("basin_{index:02}")
}

pub fn synthesize_catchments(n_catchments: usize, n_years: usize, seed: u64, config: &SynthConfig) -> Result<Vec<CatchmentDataset>> {
    Ok(simulate_catchments(n_catchments, n_years, seed, config)?.into_iter().map(|s| s.dataset).collect())
}

pub fn simulate_catchments(n_catchments: usize, n_years: usize, seed: u64, config: &SynthConfig) -> Result<Vec<Simulation>> {
    config.validate()?;
    if n_years < 6 {
        return Err(Error::Config(format!("n_years = {n_years}; at least 6 are needed for training, validation and test")));
    }
    if n_catchments == 0 {
        return Err(Error::Config("n_catchments must be positive".into()));
    }
    let n_upstream = (config.upstream_fraction * n_catchments as f64).round() as usize;
    (0..n_catchments)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            simulate(&catchment_id(i), n_years, i < n_upstream, config, &mut rng)
        })
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi { lo } else { rng.random_range(lo..hi) }
}

fn simulate(id: &str, n_years: usize, upstream: bool, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Simulation> {
    let elevation_m = draw(rng, config.elevation_m);
    let params = CatchmentParameters {
        recession: draw(rng, config.recession),
        discharge_coefficient: draw(rng, config.discharge_coefficient),
        area_km2: draw(rng, config.area_km2),
        elevation_m,
        mean_temperature_k: draw(rng, config.sea_level_temperature_k) - LAPSE_RATE_K_PER_M * elevation_m,
        precipitation_mm_day: draw(rng, config.precipitation_mm_day),
        upstream_scale: upstream.then(|| draw(rng, config.upstream_scale)),
    };
    let solar_mean = rng.random_range(1.1e7..1.9e7);
    let thermal_mean = rng.random_range(-7.5e6..-5.9e6);

    let spinup_start = NaiveDate::from_ymd_opt(config.start_year - config.spinup_years as i32, 1, 1)
        .ok_or_else(|| Error::Config(format!("start_year {} is out of range", config.start_year)))?;
    let start = NaiveDate::from_ymd_opt(config.start_year, 1, 1).expect("checked above");
    let end = NaiveDate::from_ymd_opt(config.start_year + n_years as i32, 1, 1)
        .ok_or_else(|| Error::Config("record end is out of range".into()))?;
    let skip = (start - spinup_start).num_days() as usize;
    let total = (end - spinup_start).num_days() as usize;

    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let a = params.recession;
    let k = params.discharge_coefficient * (1.0 - a);
    let (mut storage, mut snow) = (config.initial_storage_mm, 0.0);
    let mut temp_anomaly = 0.0;
    let mut series: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let (mut true_precip, mut q_mm) = (Vec::with_capacity(total), Vec::with_capacity(total));
    let mut initial_storage_mm = 0.0;
    for day in 0..total {
        if day == skip {
            initial_storage_mm = storage + snow;
        }
        let date = spinup_start + chrono::Duration::days(day as i64);
        let phase = 2.0 * PI * f64::from(date.ordinal0()) / 365.25;

        // temperature peaks in late July; AR(1) anomalies with stationary sd temperature_noise_k
        temp_anomaly = 0.7 * temp_anomaly + config.temperature_noise_k * 0.51f64.sqrt() * std_normal.sample(rng);
        let temp = (params.mean_temperature_k - config.temperature_amplitude_k * (phase - 0.35).cos() + temp_anomaly)
            .clamp(TEMPERATURE_RANGE_K.0 + 1.0, TEMPERATURE_RANGE_K.1 - 1.0);

        // winter-wet precipitation regime
        let seasonal = 1.0 + config.precipitation_seasonality * phase.cos();
        let p_wet = (config.wet_day_probability * seasonal).min(1.0);
        let precip = if params.precipitation_mm_day > 0.0 && rng.random::<f64>() < p_wet {
            let mean_wet = params.precipitation_mm_day * seasonal / p_wet;
            Exp::new(1.0 / mean_wet).expect("positive rate").sample(rng)
        } else {
            0.0
        };
        let sigma = config.precipitation_observation_error;
        let reported = precip * (sigma * std_normal.sample(rng) - 0.5 * sigma * sigma).exp();

        let (rain, melt) = if temp < FREEZING_K {
            snow += precip;
            (0.0, 0.0)
        } else {
            let melt = snow.min(config.degree_day_factor_mm_k * (temp - FREEZING_K));
            snow -= melt;
            (precip, melt)
        };

        let q = k * storage * (1.0 + (config.discharge_noise * std_normal.sample(rng)).clamp(-config.discharge_noise_limit, config.discharge_noise_limit));
        let pet = config.potential_evaporation_mm_day * ((temp - FREEZING_K) / 20.0).clamp(0.0, 1.5);
        let available = a * storage + melt + rain;
        let evap = pet.min(available);
        storage = available - evap;

        let solar = (solar_mean * (1.0 - 0.2 * (phase - 0.35).cos()) + 1.5e6 * std_normal.sample(rng)).max(1.0e5);
        let thermal = thermal_mean + 8.0e5 * std_normal.sample(rng);

        true_precip.push(precip);
        q_mm.push(q);
        series.entry(PRECIPITATION).or_default().push(reported);
        series.entry(EVAPORATION).or_default().push(evap);
        series.entry(TEMPERATURE).or_default().push(temp);
        series.entry(SNOW_WATER_EQUIVALENT).or_default().push(snow / 1000.0);
        series.entry(SOLAR_RADIATION).or_default().push(solar);
        series.entry(THERMAL_RADIATION).or_default().push(thermal);
    }

    let to_m3_s = params.area_km2 * 1000.0 / SECONDS_PER_DAY;
    let q_m3_s: Vec<f64> = q_mm.iter().map(|q| q * to_m3_s).collect();
    let mut dynamic: BTreeMap<String, Vec<f64>> =
        series.into_iter().map(|(name, s)| (name.to_string(), s[skip..].to_vec())).collect();
    if let Some(scale) = params.upstream_scale {
        let lag = config.upstream_lag_days;
        let up: Vec<f64> = (skip..total)
            .map(|t| {
                let source = if t >= lag { q_m3_s[t - lag] } else { 0.0 };
                (scale * source * (1.0 + config.upstream_noise * std_normal.sample(rng))).max(0.0)
            })
            .collect();
        dynamic.insert(UPSTREAM_DISCHARGE.to_string(), up);
    }
    let temps = &dynamic[TEMPERATURE];
    let mean_temp = temps.iter().sum::<f64>() / temps.len() as f64;
    let statics: BTreeMap<String, f64> = [
        (AREA, params.area_km2),
        (ELEVATION, params.elevation_m),
        (MEAN_TEMPERATURE, mean_temp),
        (RECESSION, params.recession),
        (RUNOFF_COEFFICIENT, params.discharge_coefficient),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let dataset = CatchmentDataset::new(id, start, dynamic, statics, q_m3_s[skip..].to_vec())?;
    Ok(Simulation {
        dataset,
        parameters: params,
        true_precipitation: true_precip[skip..].to_vec(),
        initial_storage_mm,
        discharge_mm_day: q_mm[skip..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lag1_autocorrelation(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        cov / var
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cfg = SynthConfig::default();
        let a = synthesize_catchments(3, 6, 11, &cfg).unwrap();
        let b = synthesize_catchments(3, 6, 11, &cfg).unwrap();
        assert_eq!(a, b);
        let c = synthesize_catchments(3, 6, 12, &cfg).unwrap();
        assert_ne!(a[0].discharge, c[0].discharge);
        assert_eq!(a[0].years(), (2000..2006).collect::<Vec<_>>());
        assert_eq!(a[0].len(), 365 * 6 + 2);
    }

    #[test]
    fn upstream_only_for_configured_subset() {
        let ds = synthesize_catchments(4, 6, 1, &SynthConfig::default()).unwrap();
        let with: Vec<bool> = ds.iter().map(|d| d.has_series(UPSTREAM_DISCHARGE)).collect();
        assert_eq!(with, vec![true, true, false, false]);
        for d in &ds {
            for s in STATIC_ATTRIBUTES {
                assert!(d.statics.contains_key(s));
            }
        }
    }

    #[test]
    fn no_precipitation_drains_geometrically() {
        let cfg = SynthConfig {
            spinup_years: 0,
            initial_storage_mm: 100.0,
            recession: [0.95, 0.95],
            precipitation_mm_day: [0.0, 0.0],
            potential_evaporation_mm_day: 0.0,
            discharge_noise: 0.0,
            ..SynthConfig::default()
        };
        let sims = simulate_catchments(1, 6, 3, &cfg).unwrap();
        let q = &sims[0].discharge_mm_day;
        for w in q[..200].windows(2) {
            assert!((w[1] / w[0] - 0.95).abs() < 1e-12);
        }
        assert!(q[q.len() - 1] < 1e-30);
    }

    #[test]
    fn default_recession_gives_persistent_discharge() {
        let cfg = SynthConfig { recession: [0.95, 0.95], ..SynthConfig::default() };
        for d in synthesize_catchments(4, 6, 5, &cfg).unwrap() {
            let r = lag1_autocorrelation(&d.discharge);
            assert!(r > 0.9, "{}: lag-1 autocorrelation {r}", d.catchment_id);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = SynthConfig { recession: [0.97, 0.93], ..SynthConfig::default() };
        assert!(matches!(synthesize_catchments(1, 6, 0, &bad), Err(Error::Config(_))));
        let bad = SynthConfig { discharge_coefficient: [0.5, 0.95], ..SynthConfig::default() };
        assert!(bad.validate().is_err());
        assert!(matches!(synthesize_catchments(1, 5, 0, &SynthConfig::default()), Err(Error::Config(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn discharge_is_non_negative_and_mass_bounded(seed in 0u64..1000, obs_error in 0.0f64..0.5) {
            let cfg = SynthConfig { precipitation_observation_error: obs_error, ..SynthConfig::default() };
            for sim in simulate_catchments(2, 6, seed, &cfg).unwrap() {
                prop_assert!(sim.dataset.discharge.iter().all(|q| *q >= 0.0));
                let (mut out, mut input) = (0.0, sim.initial_storage_mm);
                for (q, p) in sim.discharge_mm_day.iter().zip(&sim.true_precipitation) {
                    out += q;
                    input += p;
                    prop_assert!(out <= input + 1e-9);
                }
            }
        }
    }
}
