//! Variable roster and units. Column names double as CSV headers.

pub const PRECIPITATION: &str = "precipitation_mm_day";
pub const EVAPORATION: &str = "evaporation_mm_day";
pub const TEMPERATURE: &str = "temperature_2m_k";
pub const SNOW_WATER_EQUIVALENT: &str = "snow_depth_water_equivalent_m";
pub const SOLAR_RADIATION: &str = "surface_net_solar_radiation_j_m2";
pub const THERMAL_RADIATION: &str = "surface_net_thermal_radiation_j_m2";

/// Observed discharge at the gauge, m³/s. Always the prediction target; as
/// an input it is catchment-specific history.
pub const DISCHARGE: &str = "discharge_m3_s";

/// Lagged discharge from an upstream gauge, m³/s; present only for some
/// catchments.
pub const UPSTREAM_DISCHARGE: &str = "upstream_discharge_m3_s";

/// Dynamic drivers available at every catchment.
pub const DRIVERS: [&str; 6] =
    [PRECIPITATION, EVAPORATION, TEMPERATURE, SNOW_WATER_EQUIVALENT, SOLAR_RADIATION, THERMAL_RADIATION];

pub const AREA: &str = "area_km2";
pub const ELEVATION: &str = "gauge_elevation_m";
pub const MEAN_TEMPERATURE: &str = "mean_annual_temperature_k";
pub const RECESSION: &str = "recession_coefficient";
pub const RUNOFF_COEFFICIENT: &str = "discharge_coefficient";

pub const STATIC_ATTRIBUTES: [&str; 5] = [AREA, ELEVATION, MEAN_TEMPERATURE, RECESSION, RUNOFF_COEFFICIENT];

/// Suffix of the availability series that accompanies a flagged variable.
pub const FLAG_SUFFIX: &str = "_flag";

pub fn flag_name(variable: &str) -> String {
    format!("{variable}{FLAG_SUFFIX}")
}

/// Plausible 2 m temperature range in kelvin; values outside fail ingestion.
pub const TEMPERATURE_RANGE_K: (f64, f64) = (180.0, 340.0);
