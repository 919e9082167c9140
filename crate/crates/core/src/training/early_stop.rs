use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    Diverged,
}

/// Patience-based stopping on a validation loss that should decrease.
/// Epochs are counted from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    pub patience: usize,
    pub max_epochs: usize,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub epoch: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize, max_epochs: usize) -> Self {
        EarlyStopper { patience, max_epochs, best_loss: f64::INFINITY, best_epoch: 0, epoch: 0 }
    }

    pub fn epochs_since_best(&self) -> usize {
        self.epoch - self.best_epoch
    }

    /// Records one epoch's validation loss. Returns whether it is a new
    /// (strict) minimum and the reason to stop, if any.
    pub fn observe(&mut self, loss: f64) -> (bool, Option<StopReason>) {
        self.epoch += 1;
        if loss.is_nan() {
            return (false, Some(StopReason::Diverged));
        }
        let improved = loss < self.best_loss;
        if improved {
            self.best_loss = loss;
            self.best_epoch = self.epoch;
        }
        let stop = if self.epochs_since_best() >= self.patience {
            Some(StopReason::Patience)
        } else if self.epoch >= self.max_epochs {
            Some(StopReason::MaxEpochs)
        } else {
            None
        };
        (improved, stop)
    }
}
