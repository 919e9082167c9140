//! Quantile (pinball) losses, the climatology baseline, the cumulative
//! quantile efficiency score (CQES) and empirical threshold coverage.

mod climatology;
mod report;

pub use climatology::{day_of_year_index, empirical_quantile, Climatology, CatchmentClimatology, DAYS_PER_YEAR};
pub use report::{
    read_forecast_csv, write_forecast_csv, AggregateScores, BasinYearScore, EvaluationReport, FoldSummary,
    ForecastRecord, ScoredRecord,
};

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::recurrent::N_QUANTILES;

/// The working quantile levels, in output-column order.
pub const TAUS: [f64; N_QUANTILES] = [0.1, 0.5, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(QuantileLevel(tau))
        } else {
            Err(Error::Domain(format!("quantile level {tau} outside (0, 1)")))
        }
    }

    pub fn tau(self) -> f64 {
        self.0
    }
}

/// Pinball loss: `(tau - 1)(y - y_hat)` when `y < y_hat`, else `tau (y - y_hat)`.
pub fn quantile_loss(tau: QuantileLevel, y: f64, y_hat: f64) -> Result<f64> {
    if y.is_nan() || y_hat.is_nan() {
        return Err(Error::Data(format!("quantile loss of y = {y}, prediction = {y_hat}")));
    }
    Ok(pinball(tau.tau(), y, y_hat))
}

#[inline]
fn pinball(tau: f64, y: f64, y_hat: f64) -> f64 {
    let u = y - y_hat;
    if u < 0.0 {
        (tau - 1.0) * u
    } else {
        tau * u
    }
}

/// Equal-weight mean of the three pinball losses of `forecast = [q10, q50, q90]`.
pub fn cumulative_quantile_loss(y: f64, forecast: &[f64; N_QUANTILES]) -> Result<f64> {
    if y.is_nan() || forecast.iter().any(|v| v.is_nan()) {
        return Err(Error::Data(format!("cumulative quantile loss of y = {y}, forecast = {forecast:?}")));
    }
    Ok(TAUS.iter().zip(forecast).map(|(&t, &q)| pinball(t, y, q)).sum::<f64>() / N_QUANTILES as f64)
}

/// Mean cumulative quantile loss over aligned series.
pub fn mean_cumulative_loss(observations: &[f64], forecasts: &[[f64; N_QUANTILES]]) -> Result<f64> {
    if observations.len() != forecasts.len() {
        return Err(Error::Contract(format!(
            "{} observations for {} forecasts",
            observations.len(),
            forecasts.len()
        )));
    }
    if observations.is_empty() {
        return Err(Error::Contract("mean loss over an empty series".into()));
    }
    let mut total = 0.0;
    for (y, f) in observations.iter().zip(forecasts) {
        total += cumulative_quantile_loss(*y, f)?;
    }
    Ok(total / observations.len() as f64)
}

/// `1 - L_tot / L_clim` with both losses averaged over the evaluation set.
pub fn cqes(
    observations: &[f64],
    forecasts: &[[f64; N_QUANTILES]],
    climatology: &[[f64; N_QUANTILES]],
) -> Result<f64> {
    let l_tot = mean_cumulative_loss(observations, forecasts)?;
    let l_clim = mean_cumulative_loss(observations, climatology)?;
    score_from_losses(l_tot, l_clim)
}

pub fn score_from_losses(l_tot: f64, l_clim: f64) -> Result<f64> {
    if l_clim == 0.0 {
        return Err(Error::UndefinedScore("climatology loss is zero (constant record)".into()));
    }
    Ok(1.0 - l_tot / l_clim)
}

/// Fraction of observations strictly above their threshold.
pub fn empirical_coverage(observations: &[f64], thresholds: &[f64]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::Contract("coverage of an empty series".into()));
    }
    if observations.len() != thresholds.len() {
        return Err(Error::Contract(format!(
            "{} observations for {} thresholds",
            observations.len(),
            thresholds.len()
        )));
    }
    let above = observations.iter().zip(thresholds).filter(|(y, q)| y > q).count();
    Ok(above as f64 / observations.len() as f64)
}

/// Mean cumulative quantile loss of batched predictions `[B x 3]` against
/// targets `[B]`, recorded on the graph for training.
///
/// Each term is `tau * u + relu(-u)` with `u = y - y_hat`, which equals the
/// two-branch pinball loss and puts `y = y_hat` on the second branch.
pub fn quantile_loss_graph(g: &mut Graph, predictions: NodeId, targets: &[f64]) -> Result<NodeId> {
    let shape = g.shape(predictions).to_vec();
    if shape != [targets.len(), N_QUANTILES] {
        return Err(Error::Dimension(format!(
            "predictions of shape {:?} for {} targets",
            shape,
            targets.len()
        )));
    }
    let y: Vec<f64> = targets.iter().flat_map(|&t| [t; N_QUANTILES]).collect();
    let taus: Vec<f64> = targets.iter().flat_map(|_| TAUS).collect();
    let y = g.constant(Tensor::matrix(targets.len(), N_QUANTILES, y)?);
    let taus = g.constant(Tensor::matrix(targets.len(), N_QUANTILES, taus)?);
    let u = g.sub(y, predictions)?;
    let weighted = g.mul(taus, u)?;
    let neg = g.scale(u, -1.0);
    let over = g.relu(neg);
    let terms = g.add(weighted, over)?;
    Ok(g.mean(terms))
}
