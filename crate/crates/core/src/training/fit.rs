use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_gradients, AdamState};
use super::early_stop::{EarlyStopper, StopReason};
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::data::{Batch, BatchSampler};
use crate::error::{Error, Result};
use crate::objectives::quantile_loss_graph;
use crate::recurrent::{absorb_gradients, Parameters};

/// Loop and sampling settings shared by every training job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Lookback window in days.
    pub window: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Global gradient-norm cap per batch.
    pub clip_norm: f64,
    /// Per-example probability of withholding the optional inputs of a
    /// flag model during training.
    pub mask_probability: f64,
    /// Calendar months (1-12) of forecast dates used for training and
    /// evaluation; all months when absent.
    pub months: Option<Vec<u32>>,
    /// Batch size for validation and prediction passes.
    pub evaluation_batch_size: usize,
    /// Precompute frozen-body encodings for head training when they fit in
    /// this many bytes; otherwise recompute them per batch.
    pub encoding_cache_bytes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 60,
            batch_size: 64,
            max_epochs: 200,
            patience: 20,
            clip_norm: 1.0,
            mask_probability: 0.5,
            months: None,
            evaluation_batch_size: 512,
            encoding_cache_bytes: 512 << 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.window == 0 || self.batch_size == 0 || self.evaluation_batch_size == 0 {
            return fail("window, batch_size and evaluation_batch_size must be positive");
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return fail("max_epochs and patience must be positive");
        }
        if !(self.clip_norm > 0.0) {
            return fail("clip_norm must be positive");
        }
        if !(0.0..=1.0).contains(&self.mask_probability) {
            return fail("mask_probability must lie in [0, 1]");
        }
        if let Some(m) = &self.months {
            if m.is_empty() || m.iter().any(|v| !(1..=12).contains(v)) {
                return fail("months must be a non-empty list of values in 1..=12");
            }
        }
        Ok(())
    }
}

/// How a forward pass treats dropout and optional-input masking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active; flag models draw one mask per example.
    Train,
    Eval,
    /// Evaluation with the optional inputs of a flag model withheld (`true`)
    /// or supplied (`false`) for every example.
    EvalMasked(bool),
}

/// A trainable model bound to its prepared data.
pub trait Net: Parameters {
    /// Records predictions `[B x 3]` for `batch` on `g` and returns them with
    /// the parameter leaves in [`Parameters::parameters_mut`] order.
    fn forward(&self, g: &mut Graph, batch: &Batch, mode: Mode, rng: &mut ChaCha8Rng) -> Result<(NodeId, Vec<NodeId>)>;

    /// Normalized targets of `batch`.
    fn targets(&self, batch: &Batch) -> Vec<f64>;

    /// Evaluation passes whose losses are averaged into the validation loss.
    fn eval_modes(&self) -> Vec<Mode> {
        vec![Mode::Eval]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub clipped_batches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch produced a finite validation loss.
    pub best_epoch: usize,
    pub best_validation_loss: Option<f64>,
    pub stop_reason: StopReason,
}

/// Example-weighted mean normalized-space loss of `net` over `batches`.
pub fn evaluation_loss<N: Net + ?Sized>(net: &N, batches: &[Batch], mode: Mode, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (mut total, mut n) = (0.0, 0usize);
    for b in batches {
        let mut g = Graph::new();
        let (pred, _) = net.forward(&mut g, b, mode, rng)?;
        let loss = quantile_loss_graph(&mut g, pred, &net.targets(b))?;
        total += g.value(loss).item()? * b.days.len() as f64;
        n += b.days.len();
    }
    if n == 0 {
        return Err(Error::Data("no validation examples".into()));
    }
    Ok(total / n as f64)
}

pub fn validation_loss<N: Net + ?Sized>(net: &N, batches: &[Batch], rng: &mut ChaCha8Rng) -> Result<f64> {
    let modes = net.eval_modes();
    let mut sum = 0.0;
    for m in &modes {
        sum += evaluation_loss(net, batches, *m, rng)?;
    }
    Ok(sum / modes.len() as f64)
}

/// Quantile-loss training with ADAM, per-batch gradient clipping and early
/// stopping on the validation loss. On return `net` holds the parameters of
/// the best epoch.
pub fn fit<N: Net>(
    net: &mut N,
    sampler: &BatchSampler,
    validation: &[Batch],
    cfg: &TrainConfig,
    learning_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<FitOutcome> {
    if validation.iter().all(|b| b.days.is_empty()) {
        return Err(Error::Data("no validation examples".into()));
    }
    let names: Vec<String> = net.named_parameters().into_iter().map(|(n, _)| n).collect();
    let mut adam = AdamState::new(learning_rate, &net.parameters_mut());
    let mut stopper = EarlyStopper::new(cfg.patience, cfg.max_epochs);
    let mut best: Option<Vec<Vec<f64>>> = None;
    let mut epochs = Vec::new();
    let stop_reason = loop {
        let (mut total, mut n, mut clipped) = (0.0, 0usize, 0usize);
        for batch in sampler.epoch(rng) {
            let mut g = Graph::new();
            let (pred, leaves) = net.forward(&mut g, &batch, Mode::Train, rng)?;
            let loss = quantile_loss_graph(&mut g, pred, &net.targets(&batch))?;
            let value = g.value(loss).item()?;
            if !value.is_finite() {
                return Err(Error::Training(format!("training loss {value} in epoch {}", stopper.epoch + 1)));
            }
            g.backward(loss)?;
            total += value * batch.days.len() as f64;
            n += batch.days.len();
            let mut params = net.parameters_mut();
            absorb_gradients(params.iter_mut().map(|p| &mut **p).collect(), &g, &leaves);
            clipped += usize::from(clip_gradients(&mut params, cfg.clip_norm));
            adam.step(params, &names)?;
        }
        let val = validation_loss(&*net, validation, rng)?;
        let (improved, stop) = stopper.observe(val);
        epochs.push(EpochRecord { epoch: stopper.epoch, train_loss: total / n as f64, validation_loss: val, clipped_batches: clipped });
        log::debug!("epoch {}: train {:.5} validation {:.5}", stopper.epoch, total / n as f64, val);
        if improved {
            best = Some(snapshot(&*net));
        }
        if let Some(reason) = stop {
            break reason;
        }
    };
    if let Some(values) = &best {
        restore(net, values);
    }
    Ok(FitOutcome {
        epochs,
        best_epoch: stopper.best_epoch,
        best_validation_loss: best.is_some().then_some(stopper.best_loss),
        stop_reason,
    })
}

/// Analytic loss gradient of `net` on `batch` against central differences
/// of step `step`, as `(analytic, numeric)` over all parameters in
/// [`Parameters::parameters_mut`] order. Every loss evaluation restarts the
/// rng from `seed`, so dropout and mask draws are frozen across probes.
pub fn gradient_check<N: Net>(net: &mut N, batch: &Batch, mode: Mode, seed: u64, step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let loss = |net: &N, grads: bool| -> Result<(f64, Vec<Vec<f64>>)> {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut g = Graph::new();
        let (pred, leaves) = net.forward(&mut g, batch, mode, &mut rng)?;
        let loss = quantile_loss_graph(&mut g, pred, &net.targets(batch))?;
        let value = g.value(loss).item()?;
        if !grads {
            return Ok((value, Vec::new()));
        }
        g.backward(loss)?;
        let grads = leaves
            .iter()
            .map(|&l| g.grad(l).map_or_else(|| vec![0.0; g.value(l).numel()], <[f64]>::to_vec))
            .collect();
        Ok((value, grads))
    };
    let (_, grads) = loss(net, true)?;
    let analytic: Vec<f64> = grads.into_iter().flatten().collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    let n_tensors = net.parameters_mut().len();
    for t in 0..n_tensors {
        for i in 0..net.parameters_mut()[t].numel() {
            let orig = net.parameters_mut()[t].values()[i];
            net.parameters_mut()[t].values_mut()[i] = orig + step;
            let up = loss(net, false)?.0;
            net.parameters_mut()[t].values_mut()[i] = orig - step;
            let down = loss(net, false)?.0;
            net.parameters_mut()[t].values_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * step));
        }
    }
    Ok((analytic, numeric))
}

fn snapshot(net: &impl Parameters) -> Vec<Vec<f64>> {
    net.named_parameters().into_iter().map(|(_, t)| t.values().to_vec()).collect()
}

fn restore(net: &mut impl Parameters, values: &[Vec<f64>]) {
    for (t, v) in net.parameters_mut().into_iter().zip(values) {
        t.values_mut().copy_from_slice(v);
    }
}

/// Per-timestep constants for a graph.
pub(crate) fn constants(g: &mut Graph, steps: Vec<Tensor>) -> Vec<NodeId> {
    steps.into_iter().map(|t| g.constant(t)).collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    use super::*;

    /// Quantiles linear in a scalar input: `pred = [1, x] w`.
    struct Linear {
        w: Tensor,
        x: Vec<f64>,
        y: Vec<f64>,
    }

    impl Linear {
        fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
            Linear { w: Tensor::matrix(2, 3, vec![0.0; 6]).unwrap().with_requires_grad(true), x, y }
        }

        fn predict(&self, x: f64) -> [f64; 3] {
            let w = self.w.values();
            [w[0] + x * w[3], w[1] + x * w[4], w[2] + x * w[5]]
        }
    }

    impl Parameters for Linear {
        fn named_parameters(&self) -> Vec<(String, &Tensor)> {
            vec![("w".into(), &self.w)]
        }

        fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
            vec![&mut self.w]
        }
    }

    impl Net for Linear {
        fn forward(&self, g: &mut Graph, batch: &Batch, _: Mode, _: &mut ChaCha8Rng) -> Result<(NodeId, Vec<NodeId>)> {
            let x = batch.days.iter().flat_map(|&d| [1.0, self.x[d]]).collect();
            let x = g.constant(Tensor::matrix(batch.days.len(), 2, x)?);
            let w = g.leaf(self.w.detached().with_requires_grad(true));
            Ok((g.matmul(x, w)?, vec![w]))
        }

        fn targets(&self, batch: &Batch) -> Vec<f64> {
            batch.days.iter().map(|&d| self.y[d]).collect()
        }
    }

    fn split(n: usize) -> (BatchSampler, Vec<Batch>) {
        let train: Vec<usize> = (0..n * 4 / 5).collect();
        let val = Batch { catchment: 0, days: (n * 4 / 5..n).collect() };
        (BatchSampler::new(vec![train], 32).unwrap(), vec![val])
    }

    fn config(max_epochs: usize) -> TrainConfig {
        TrainConfig { max_epochs, patience: max_epochs, clip_norm: 1e9, ..TrainConfig::default() }
    }

    #[test]
    fn constant_target_converges() {
        let n = 500;
        let mut net = Linear::new(vec![1.0; n], vec![2.0; n]);
        let (sampler, val) = split(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        fit(&mut net, &sampler, &val, &config(60), 0.05, &mut rng).unwrap();
        for q in net.predict(1.0) {
            assert!((q - 2.0).abs() < 0.04, "{:?}", net.predict(1.0));
        }
    }

    #[test]
    fn heteroscedastic_quantiles_cover_held_out_data() {
        let draw = |n: usize, rng: &mut ChaCha8Rng| -> (Vec<f64>, Vec<f64>) {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
            let y = x.iter().map(|x| x + (0.2 + 0.5 * x) * rng.sample::<f64, _>(StandardNormal)).collect();
            (x, y)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y) = draw(4000, &mut rng);
        let mut net = Linear::new(x, y);
        let (sampler, val) = split(4000);
        fit(&mut net, &sampler, &val, &config(60), 0.02, &mut rng).unwrap();
        let (x, y) = draw(4000, &mut rng);
        let above = |q: usize| x.iter().zip(&y).filter(|(x, y)| **y > net.predict(**x)[q]).count() as f64 / 4000.0;
        assert!((above(0) - 0.9).abs() < 0.05, "q10 exceedance {}", above(0));
        assert!((above(2) - 0.1).abs() < 0.05, "q90 exceedance {}", above(2));
    }

    #[test]
    fn first_epoch_loss_is_the_initial_pinball_mean() {
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut net = Linear::new(vec![1.0; 6], y.clone());
        let sampler = BatchSampler::new(vec![(0..4).collect()], 4).unwrap();
        let val = vec![Batch { catchment: 0, days: vec![4, 5] }];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = fit(&mut net, &sampler, &val, &config(1), 0.01, &mut rng).unwrap();
        // all-zero predictions below positive targets: tau * y per quantile
        let expected = (0.1 + 0.5 + 0.9) / 3.0 * (1.0 + 2.0 + 3.0 + 4.0) / 4.0;
        assert!((out.epochs[0].train_loss - expected).abs() < 1e-12);
        assert_eq!(out.stop_reason, StopReason::MaxEpochs);
    }

    #[test]
    fn nan_target_aborts_with_training_error() {
        let net_y = vec![1.0, f64::NAN, 1.0, 1.0];
        let mut net = Linear::new(vec![1.0; 4], net_y);
        let sampler = BatchSampler::new(vec![vec![0, 1]], 2).unwrap();
        let val = vec![Batch { catchment: 0, days: vec![2, 3] }];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = fit(&mut net, &sampler, &val, &config(3), 0.01, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Training(_)), "{err}");
    }

    #[test]
    fn best_epoch_parameters_are_restored() {
        let n = 200;
        let mut net = Linear::new(vec![1.0; n], vec![1.0; n]);
        let (sampler, val) = split(n);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = fit(&mut net, &sampler, &val, &config(30), 0.05, &mut rng).unwrap();
        let mut check = ChaCha8Rng::seed_from_u64(0);
        let loss = validation_loss(&net, &val, &mut check).unwrap();
        assert_eq!(Some(loss), out.best_validation_loss);
    }

    #[test]
    fn gradient_check_of_a_linear_net() {
        let mut net = Linear::new(vec![0.3, -1.2, 2.0], vec![1.0, 0.5, -0.7]);
        net.w.values_mut().copy_from_slice(&[0.1, -0.2, 0.3, 0.4, 0.05, -0.6]);
        let batch = Batch { catchment: 0, days: vec![0, 1, 2] };
        let (a, n) = gradient_check(&mut net, &batch, Mode::Eval, 0, 1e-5).unwrap();
        assert_eq!(a.len(), 6);
        assert!(crate::autodiff::gradcheck::relative_error(&a, &n) < 1e-8);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { window: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { mask_probability: 1.5, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { months: Some(vec![13]), ..TrainConfig::default() }.validate().is_err());
    }
}
