//! Quantile-loss training with ADAM and early stopping, two-phase Hydra
//! training, leave-one-year-out cross-validation and grid sweeps.

mod adam;
mod crossval;
mod early_stop;
mod fit;
mod nets;
mod run;
mod sweep;

pub use adam::{clip_gradients, AdamState};
pub use crossval::{climatology_forecasts, cross_validate, in_pool, record_years, reports, run_fold, score_fold, CrossValidation, FoldResult};
pub use early_stop::{EarlyStopper, StopReason};
pub use fit::{evaluation_loss, fit, gradient_check, validation_loss, EpochRecord, FitOutcome, Mode, Net, TrainConfig};
pub use nets::{BaselineNet, EncodingCache, HydraNet, SingleHeadNet};
pub use run::{
    fnv1a, job_rng, job_seed, predict_normalized, prepare, train_model, Experiment, HydraTraining, Manifest, TrainedModel,
    TrainedRun, TrainingRunRecord, HYDRA_MULTI, HYDRA_SINGLE,
};
pub use sweep::{grid_sweep, SweepCell, SweepResult};
