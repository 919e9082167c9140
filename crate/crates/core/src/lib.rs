//! Probabilistic next-day river-discharge forecasting with Hydra-LSTMs.
//!
//! A shared encoding LSTM (the body) turns globally available forcing and
//! static catchment attributes into an encoding time series. Swappable heads
//! map that encoding to the 10%, 50% and 90% quantiles of tomorrow's
//! discharge: one multi-catchment head trained jointly with the body, and
//! optional single-catchment heads that also see catchment-specific series
//! (such as recent observed discharge) and are trained against a frozen body.
//!
//! The crate also carries the four baseline architectures, quantile-loss
//! training with ADAM and early stopping, the cumulative quantile efficiency
//! score (CQES) against climatology, leave-one-year-out cross-validation and
//! a synthetic multi-catchment generator for desk-scale experiments.

pub mod autodiff;
pub mod data;
mod error;
pub mod models;
pub mod objectives;
pub mod recurrent;
pub mod training;

pub use error::{Error, Result};
