use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::early_stop::StopReason;
use super::fit::{fit, EpochRecord, FitOutcome, Mode, Net, TrainConfig};
use super::nets::{BaselineNet, EncodingCache, HydraNet, SingleHeadNet};
use crate::autodiff::Graph;
use crate::data::variables::{DISCHARGE, DRIVERS, STATIC_ATTRIBUTES};
use crate::data::{
    Batch, BatchSampler, CatchmentDataset, Features, NormalizationStats, PreparedData, Selection, SplitPlan,
};
use crate::error::{Error, Result};
use crate::models::{
    Architecture, BaselineModel, Checkpoint, FeatureLayout, HydraModel, ModelSpec, SingleCatchmentHead,
};
use crate::objectives::ForecastRecord;
use crate::recurrent::{Parameters, N_QUANTILES};

/// An architecture with its hyperparameters, seed and catchment-specific
/// extra variables (discharge history by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub spec: ModelSpec,
    pub extras: Vec<String>,
}

impl Experiment {
    /// Default extras: none for the no-discharge model, discharge history
    /// for every other architecture.
    pub fn new(spec: ModelSpec) -> Self {
        let extras = match spec.architecture {
            Architecture::MultiCatchmentNoQ => vec![],
            _ => vec![DISCHARGE.to_string()],
        };
        Experiment { spec, extras }
    }

    pub fn architecture(&self) -> Architecture {
        self.spec.architecture
    }

    /// Columns the architecture's main model reads.
    pub fn features(&self) -> Features {
        match self.architecture() {
            Architecture::Flag => Features::Flagged,
            Architecture::Hydra | Architecture::MultiCatchmentNoQ => Features::Shared,
            _ if self.extras.is_empty() => Features::Shared,
            _ => Features::SharedAndExtras,
        }
    }

    fn extras_tag(&self) -> &'static str {
        if self.extras == [DISCHARGE] { "q" } else { "extras" }
    }

    /// Names of the forecast sets this experiment produces.
    pub fn variants(&self) -> Vec<String> {
        let tag = self.extras_tag();
        match self.architecture() {
            Architecture::SingleCatchment if self.extras.is_empty() => vec!["single_catchment_no_q".into()],
            Architecture::SingleCatchment => vec![format!("single_catchment_with_{tag}")],
            Architecture::MultiCatchmentNoQ => vec!["multi_catchment_no_q".into()],
            Architecture::MultiCatchmentWithQ => vec!["multi_catchment_with_q".into()],
            Architecture::Flag => vec![format!("flag_without_{tag}"), format!("flag_with_{tag}")],
            Architecture::Hydra if self.extras.is_empty() => vec![HYDRA_MULTI.into()],
            Architecture::Hydra => vec![HYDRA_MULTI.into(), HYDRA_SINGLE.into()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.hyperparameters.validate(self.architecture())?;
        let mut seen = self.extras.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.extras.len() {
            return Err(Error::Config("extra variables repeat".into()));
        }
        if self.architecture() == Architecture::Hydra {
            return Ok(());
        }
        let layout = FeatureLayout::new(vec!["shared".into()], self.extras.clone(), self.features() == Features::Flagged);
        layout.check(self.architecture())
    }
}

pub const HYDRA_MULTI: &str = "hydra_multi_catchment_head";
pub const HYDRA_SINGLE: &str = "hydra_single_catchment_heads";

/// 64-bit FNV-1a hash; stable job identifiers for seeding.
pub fn fnv1a(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Independent stream for one training job.
pub fn job_rng(seed: u64, job: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(job));
    rng
}

/// Initialization seed for a job-specific module.
pub fn job_seed(seed: u64, job: &str) -> u64 {
    fnv1a(&format!("{seed}/{job}"))
}

/// Outcome of one optimization job. Wall-clock time is kept apart (see
/// [`TrainedRun::timing`]) so records replay byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRunRecord {
    pub job: String,
    pub seed: u64,
    pub n_parameters: usize,
    pub n_training_examples: usize,
    pub n_validation_examples: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_loss: Option<f64>,
    pub stop_reason: StopReason,
    pub clipped_batches: usize,
    /// File name of the checkpoint holding the best-epoch parameters.
    pub checkpoint: String,
}

impl TrainingRunRecord {
    fn new(job: String, seed: u64, n_parameters: usize, sampler: &BatchSampler, validation: &[Batch], out: FitOutcome, checkpoint: String) -> Self {
        TrainingRunRecord {
            job,
            seed,
            n_parameters,
            n_training_examples: sampler.n_examples(),
            n_validation_examples: validation.iter().map(|b| b.days.len()).sum(),
            clipped_batches: out.epochs.iter().map(|e| e.clipped_batches).sum(),
            epochs: out.epochs,
            best_epoch: out.best_epoch,
            best_validation_loss: out.best_validation_loss,
            stop_reason: out.stop_reason,
            checkpoint,
        }
    }
}

/// Everything needed to rebuild and interpret a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub split: SplitPlan,
    pub train: TrainConfig,
    pub shared_variables: Vec<String>,
    pub extra_variables: Vec<String>,
    pub stats: NormalizationStats,
    pub checkpoints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Baseline(BaselineModel),
    /// One single-catchment model per catchment id.
    PerCatchment(BTreeMap<String, BaselineModel>),
    Hydra(HydraModel),
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub experiment: Experiment,
    pub split: SplitPlan,
    pub config: TrainConfig,
    pub data: PreparedData,
    pub model: TrainedModel,
    pub records: Vec<TrainingRunRecord>,
    /// Wall-clock seconds per job.
    pub timing: BTreeMap<String, f64>,
}

fn available<'a>(datasets: &[CatchmentDataset], names: &[&'a str], present: impl Fn(&CatchmentDataset, &str) -> bool) -> Vec<String> {
    names.iter().filter(|n| datasets.iter().all(|d| present(d, n))).map(|n| n.to_string()).collect()
}

/// Fits normalization on the training years and builds normalized frames.
/// Drivers and static attributes missing from any catchment are left out.
pub fn prepare(datasets: &[CatchmentDataset], split: &SplitPlan, extras: &[String], cfg: &TrainConfig) -> Result<PreparedData> {
    split.validate()?;
    cfg.validate()?;
    if datasets.is_empty() {
        return Err(Error::Data("no catchments".into()));
    }
    let drivers = available(datasets, &DRIVERS, |d, n| d.has_series(n));
    let statics = available(datasets, &STATIC_ATTRIBUTES, |d, n| d.statics.contains_key(n));
    let mut dynamic = drivers.clone();
    dynamic.extend(extras.iter().filter(|e| *e != DISCHARGE).cloned());
    let stats = NormalizationStats::fit(datasets, &split.training_years, &dynamic, &statics)?;
    PreparedData::new(datasets, stats, &drivers, &statics, extras, cfg.window)
}

struct Pools {
    sampler: BatchSampler,
    validation: Vec<Batch>,
}

fn pools(data: &PreparedData, split: &SplitPlan, cfg: &TrainConfig, only: Option<usize>, require_extras: bool) -> Result<Pools> {
    let months = cfg.months.as_deref();
    let mut train = Vec::with_capacity(data.catchments.len());
    let mut validation = Vec::new();
    for c in 0..data.catchments.len() {
        if only.is_some_and(|o| o != c) {
            train.push(Vec::new());
            continue;
        }
        let sel = Selection { years: &split.training_years, window_within_years: true, require_extras, months };
        train.push(data.example_days(c, &sel)?);
        let sel = Selection { years: &split.validation_years, window_within_years: false, require_extras, months };
        for chunk in data.example_days(c, &sel)?.chunks(cfg.evaluation_batch_size) {
            validation.push(Batch { catchment: c, days: chunk.to_vec() });
        }
    }
    Ok(Pools { sampler: BatchSampler::new(train, cfg.batch_size)?, validation })
}

/// Trains one experiment on one split. Hydra experiments run both phases.
/// A diverged run returns normally with [`StopReason::Diverged`] recorded.
pub fn train_model(experiment: &Experiment, datasets: &[CatchmentDataset], split: &SplitPlan, cfg: &TrainConfig) -> Result<TrainedRun> {
    experiment.validate()?;
    if experiment.architecture() == Architecture::Hydra {
        let mut h = HydraTraining::new(experiment, datasets, split, cfg)?;
        h.run_phase1()?;
        if !h.diverged() {
            h.run_phase2(None)?;
        }
        return Ok(h.finish());
    }
    let data = prepare(datasets, split, &experiment.extras, cfg)?;
    let features = experiment.features();
    let layout = FeatureLayout::new(data.shared_names.clone(), experiment.extras.clone(), features == Features::Flagged);
    let fold = split.fold_id;
    let mut records = Vec::new();
    let mut timing = BTreeMap::new();
    let model = if experiment.architecture() == Architecture::SingleCatchment {
        let mut models = BTreeMap::new();
        for c in 0..data.catchments.len() {
            let id = data.catchments[c].catchment_id.clone();
            if features != Features::Shared && !data.catchments[c].has_extras() {
                log::warn!("{id} lacks {:?}; no single-catchment model", experiment.extras);
                continue;
            }
            let job = format!("fold{fold}/single_catchment/{id}");
            let mut spec = experiment.spec;
            spec.seed = job_seed(experiment.spec.seed, &job);
            let model = BaselineModel::new(spec, layout.clone())?;
            let started = Instant::now();
            let (model, record) = train_baseline(model, &data, split, cfg, features, Some(c), &job, &format!("model_{id}.json"))?;
            timing.insert(job, started.elapsed().as_secs_f64());
            records.push(record);
            models.insert(id, model);
        }
        if models.is_empty() {
            return Err(Error::Data("no catchment has the extra variables of the single-catchment model".into()));
        }
        TrainedModel::PerCatchment(models)
    } else {
        let job = format!("fold{fold}/{}", experiment.architecture());
        let model = BaselineModel::new(experiment.spec, layout)?;
        let started = Instant::now();
        let (model, record) = train_baseline(model, &data, split, cfg, features, None, &job, "model.json")?;
        timing.insert(job, started.elapsed().as_secs_f64());
        records.push(record);
        TrainedModel::Baseline(model)
    };
    Ok(TrainedRun { experiment: experiment.clone(), split: split.clone(), config: cfg.clone(), data, model, records, timing })
}

#[allow(clippy::too_many_arguments)]
fn train_baseline(
    mut model: BaselineModel,
    data: &PreparedData,
    split: &SplitPlan,
    cfg: &TrainConfig,
    features: Features,
    only: Option<usize>,
    job: &str,
    checkpoint: &str,
) -> Result<(BaselineModel, TrainingRunRecord)> {
    let require_extras = features != Features::Shared && features != Features::Flagged;
    let p = pools(data, split, cfg, only, require_extras)?;
    model.net.set_training(true);
    let lr = model.spec.hyperparameters.learning_rate;
    let seed = model.spec.seed;
    let mut net = BaselineNet { model, data, features, mask_probability: cfg.mask_probability };
    let mut rng = job_rng(seed, job);
    let out = fit(&mut net, &p.sampler, &p.validation, cfg, lr, &mut rng)?;
    let mut model = net.model;
    model.net.set_training(false);
    let n = model.num_parameters();
    Ok((model, TrainingRunRecord::new(job.to_string(), seed, n, &p.sampler, &p.validation, out, checkpoint.to_string())))
}

/// Two-phase Hydra training: body and multi-catchment head jointly, then
/// single-catchment heads against the frozen body.
#[derive(Debug, Clone)]
pub struct HydraTraining {
    pub experiment: Experiment,
    pub split: SplitPlan,
    pub config: TrainConfig,
    pub data: PreparedData,
    pub model: HydraModel,
    pub body_record: Option<TrainingRunRecord>,
    pub head_records: Vec<TrainingRunRecord>,
    pub timing: BTreeMap<String, f64>,
}

impl HydraTraining {
    pub fn new(experiment: &Experiment, datasets: &[CatchmentDataset], split: &SplitPlan, cfg: &TrainConfig) -> Result<Self> {
        if experiment.architecture() != Architecture::Hydra {
            return Err(Error::Config(format!("{} is not a hydra experiment", experiment.architecture())));
        }
        experiment.validate()?;
        let data = prepare(datasets, split, &experiment.extras, cfg)?;
        let model = HydraModel::new(experiment.spec, data.shared_names.clone())?;
        Ok(HydraTraining {
            experiment: experiment.clone(),
            split: split.clone(),
            config: cfg.clone(),
            data,
            model,
            body_record: None,
            head_records: Vec::new(),
            timing: BTreeMap::new(),
        })
    }

    pub fn diverged(&self) -> bool {
        self.body_record.as_ref().is_some_and(|r| r.stop_reason == StopReason::Diverged)
    }

    pub fn run_phase1(&mut self) -> Result<&TrainingRunRecord> {
        let job = format!("fold{}/hydra/body", self.split.fold_id);
        let started = Instant::now();
        let p = pools(&self.data, &self.split, &self.config, None, false)?;
        let hp = self.experiment.spec.hyperparameters;
        let mut body = self.model.body.clone();
        let mut head = self.model.multi_head.clone();
        body.stack.training = true;
        head.net.set_training(true);
        let mut net = HydraNet { body, head, data: &self.data };
        let mut rng = job_rng(self.experiment.spec.seed, &job);
        let out = fit(&mut net, &p.sampler, &p.validation, &self.config, hp.learning_rate, &mut rng)?;
        let (mut body, mut head) = (net.body, net.head);
        body.stack.training = false;
        head.net.set_training(false);
        let n = body.num_parameters() + head.num_parameters();
        self.model.body = body;
        self.model.multi_head = head;
        self.model.single_heads.clear();
        self.head_records.clear();
        self.timing.insert(job.clone(), started.elapsed().as_secs_f64());
        let record = TrainingRunRecord::new(job, self.experiment.spec.seed, n, &p.sampler, &p.validation, out, "body.json".into());
        Ok(self.body_record.insert(record))
    }

    /// Catchments that can receive a single-catchment head.
    pub fn head_catchments(&self) -> Vec<String> {
        if self.experiment.extras.is_empty() {
            return Vec::new();
        }
        self.data.catchments.iter().filter(|c| c.has_extras()).map(|c| c.catchment_id.clone()).collect()
    }

    /// Trains one single-catchment head. Pure in `self`, so jobs can run in
    /// any order or in parallel. `precompute` forces the encoding strategy;
    /// by default encodings are cached when they fit the memory budget.
    pub fn train_head(&self, catchment_id: &str, precompute: Option<bool>) -> Result<(SingleCatchmentHead, TrainingRunRecord, f64)> {
        if self.body_record.is_none() {
            return Err(Error::Ordering("single-catchment heads need a trained body (run phase 1 first)".into()));
        }
        let c = self
            .data
            .catchment_index(catchment_id)
            .ok_or_else(|| Error::Config(format!("unknown catchment {catchment_id}")))?;
        if self.experiment.extras.is_empty() || !self.data.catchments[c].has_extras() {
            return Err(Error::Config(format!("{catchment_id} lacks the extra variables {:?}", self.experiment.extras)));
        }
        let started = Instant::now();
        let job = format!("fold{}/hydra/head/{catchment_id}", self.split.fold_id);
        let seed = job_seed(self.experiment.spec.seed, &job);
        let mut head = self.model.new_single_head(catchment_id, self.data.extra_names.clone(), seed)?;
        head.net.set_training(true);
        let p = pools(&self.data, &self.split, &self.config, Some(c), true)?;
        let n_days = p.sampler.n_examples() + p.validation.iter().map(|b| b.days.len()).sum::<usize>();
        let bytes = EncodingCache::bytes_needed(n_days, self.data.window, self.model.body.hidden_size());
        let cache = if precompute.unwrap_or(bytes <= self.config.encoding_cache_bytes) {
            let mut days: Vec<usize> = p.sampler.pools()[c].clone();
            days.extend(p.validation.iter().flat_map(|b| b.days.iter().copied()));
            Some(EncodingCache::build(&self.model.body, &self.data, c, &days, self.config.evaluation_batch_size)?)
        } else {
            None
        };
        let lr = self.experiment.spec.hyperparameters.learning_rate;
        let mut net = SingleHeadNet { head, body: &self.model.body, data: &self.data, catchment: c, cache };
        let mut rng = job_rng(seed, &job);
        let out = fit(&mut net, &p.sampler, &p.validation, &self.config, lr, &mut rng)?;
        let mut head = net.head;
        head.net.set_training(false);
        let n = head.num_parameters();
        let record =
            TrainingRunRecord::new(job, seed, n, &p.sampler, &p.validation, out, format!("head_{catchment_id}.json"));
        Ok((head, record, started.elapsed().as_secs_f64()))
    }

    /// Trains heads for `catchments` (every eligible catchment by default),
    /// in parallel on the current rayon pool. Body parameters are untouched.
    pub fn run_phase2(&mut self, catchments: Option<&[String]>) -> Result<&[TrainingRunRecord]> {
        if self.body_record.is_none() {
            return Err(Error::Ordering("phase 2 requested before phase 1 completed".into()));
        }
        let ids: Vec<String> = match catchments {
            Some(c) => c.to_vec(),
            None => self.head_catchments(),
        };
        let results: Vec<_> = ids.par_iter().map(|id| self.train_head(id, None)).collect::<Result<Vec<_>>>()?;
        for (head, record, secs) in results {
            self.timing.insert(record.job.clone(), secs);
            self.model.single_heads.insert(head.catchment_id.clone(), head);
            self.head_records.push(record);
        }
        Ok(&self.head_records)
    }

    pub fn finish(self) -> TrainedRun {
        let mut records: Vec<TrainingRunRecord> = self.body_record.into_iter().collect();
        records.extend(self.head_records);
        TrainedRun {
            experiment: self.experiment,
            split: self.split,
            config: self.config,
            data: self.data,
            model: TrainedModel::Hydra(self.model),
            records,
            timing: self.timing,
        }
    }
}

/// Evaluation-mode predictions `[q10, q50, q90]` in normalized units.
pub fn predict_normalized<N: Net + ?Sized>(net: &N, catchment: usize, days: &[usize], mode: Mode, chunk: usize) -> Result<Vec<[f64; N_QUANTILES]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::with_capacity(days.len());
    for part in days.chunks(chunk.max(1)) {
        let mut g = Graph::new();
        let (pred, _) = net.forward(&mut g, &Batch { catchment, days: part.to_vec() }, mode, &mut rng)?;
        out.extend(g.value(pred).values().chunks(N_QUANTILES).map(|q| [q[0], q[1], q[2]]));
    }
    Ok(out)
}

impl TrainedRun {
    pub fn diverged(&self) -> bool {
        self.records.iter().any(|r| r.stop_reason == StopReason::Diverged)
    }

    /// Loss used to rank sweep cells: the best validation loss of the main
    /// job (the body phase for Hydra; the mean over catchments for
    /// single-catchment models).
    pub fn validation_loss(&self) -> Option<f64> {
        match &self.model {
            TrainedModel::PerCatchment(_) => {
                let losses: Option<Vec<f64>> = self.records.iter().map(|r| r.best_validation_loss).collect();
                losses.filter(|l| !l.is_empty()).map(|l| l.iter().sum::<f64>() / l.len() as f64)
            }
            _ => self.records.first().and_then(|r| r.best_validation_loss),
        }
    }

    pub fn checkpoints(&self) -> Vec<(String, Checkpoint)> {
        match &self.model {
            TrainedModel::Baseline(m) => vec![("model.json".into(), Checkpoint::capture(m))],
            TrainedModel::PerCatchment(ms) => {
                ms.iter().map(|(id, m)| (format!("model_{id}.json"), Checkpoint::capture(m))).collect()
            }
            TrainedModel::Hydra(h) => {
                let mut out = vec![
                    ("body.json".to_string(), Checkpoint::capture(&h.body)),
                    ("head_multi.json".to_string(), Checkpoint::capture(&h.multi_head)),
                ];
                out.extend(h.single_heads.iter().map(|(id, m)| (format!("head_{id}.json"), Checkpoint::capture(m))));
                out
            }
        }
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            experiment: self.experiment.clone(),
            split: self.split.clone(),
            train: self.config.clone(),
            shared_variables: self.data.shared_names.clone(),
            extra_variables: self.data.extra_names.clone(),
            stats: self.data.stats.clone(),
            checkpoints: self.checkpoints().into_iter().map(|(n, _)| n).collect(),
        }
    }

    fn eval_days(&self, c: usize, years: &[i32], require_extras: bool) -> Result<Vec<usize>> {
        let sel = Selection { years, window_within_years: false, require_extras, months: self.config.months.as_deref() };
        self.data.example_days(c, &sel)
    }

    fn records_for(&self, c: usize, days: &[usize], z: Vec<[f64; N_QUANTILES]>) -> Result<Vec<ForecastRecord>> {
        let pc = &self.data.catchments[c];
        days.iter()
            .zip(z)
            .map(|(&t, q)| {
                let d = |v: f64| self.data.stats.denormalize_target(&pc.catchment_id, v);
                Ok(ForecastRecord {
                    catchment_id: pc.catchment_id.clone(),
                    date: pc.date(t),
                    q10: d(q[0])?,
                    q50: d(q[1])?,
                    q90: d(q[2])?,
                    observed: pc.observed[t],
                })
            })
            .collect()
    }

    /// Physical-unit forecasts for every variant over forecast dates in
    /// `years`, ordered by catchment then date.
    pub fn forecasts(&self, years: &[i32]) -> Result<BTreeMap<String, Vec<ForecastRecord>>> {
        let variants = self.experiment.variants();
        let chunk = self.config.evaluation_batch_size;
        let features = self.experiment.features();
        let mut out: BTreeMap<String, Vec<ForecastRecord>> = variants.iter().map(|v| (v.clone(), Vec::new())).collect();
        for c in 0..self.data.catchments.len() {
            let id = self.data.catchments[c].catchment_id.clone();
            match &self.model {
                TrainedModel::Baseline(m) => {
                    let needs_extras = features == Features::SharedAndExtras;
                    let days = self.eval_days(c, years, needs_extras)?;
                    let net = BaselineNet { model: m.clone(), data: &self.data, features, mask_probability: 0.0 };
                    if features == Features::Flagged {
                        let masked = predict_normalized(&net, c, &days, Mode::EvalMasked(true), chunk)?;
                        out.get_mut(&variants[0]).expect("variant").extend(self.records_for(c, &days, masked)?);
                        let days = self.eval_days(c, years, true)?;
                        if self.data.catchments[c].has_extras() {
                            let open = predict_normalized(&net, c, &days, Mode::EvalMasked(false), chunk)?;
                            out.get_mut(&variants[1]).expect("variant").extend(self.records_for(c, &days, open)?);
                        }
                    } else {
                        let z = predict_normalized(&net, c, &days, Mode::Eval, chunk)?;
                        out.get_mut(&variants[0]).expect("variant").extend(self.records_for(c, &days, z)?);
                    }
                }
                TrainedModel::PerCatchment(ms) => {
                    let Some(m) = ms.get(&id) else { continue };
                    let days = self.eval_days(c, years, features == Features::SharedAndExtras)?;
                    let net = BaselineNet { model: m.clone(), data: &self.data, features, mask_probability: 0.0 };
                    let z = predict_normalized(&net, c, &days, Mode::Eval, chunk)?;
                    out.get_mut(&variants[0]).expect("variant").extend(self.records_for(c, &days, z)?);
                }
                TrainedModel::Hydra(h) => {
                    let days = self.eval_days(c, years, false)?;
                    let net = HydraNet { body: h.body.clone(), head: h.multi_head.clone(), data: &self.data };
                    let z = predict_normalized(&net, c, &days, Mode::Eval, chunk)?;
                    out.get_mut(HYDRA_MULTI).expect("variant").extend(self.records_for(c, &days, z)?);
                    if let Some(head) = h.single_heads.get(&id) {
                        let days = self.eval_days(c, years, true)?;
                        let net =
                            SingleHeadNet { head: head.clone(), body: &h.body, data: &self.data, catchment: c, cache: None };
                        let z = predict_normalized(&net, c, &days, Mode::Eval, chunk)?;
                        out.get_mut(HYDRA_SINGLE).expect("variant").extend(self.records_for(c, &days, z)?);
                    }
                }
            }
        }
        Ok(out)
    }
}
