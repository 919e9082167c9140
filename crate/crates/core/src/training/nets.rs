use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use super::fit::{constants, Mode, Net};
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::data::{draw_masks, Batch, Features, PreparedData};
use crate::error::{Error, Result};
use crate::models::{encode_graph, head_graph, BaselineModel, HydraBody, MultiCatchmentHead, SingleCatchmentHead};
use crate::recurrent::{regress, Parameters};

/// A single-stack baseline over one of the feature layouts.
pub struct BaselineNet<'a> {
    pub model: BaselineModel,
    pub data: &'a PreparedData,
    pub features: Features,
    pub mask_probability: f64,
}

impl Parameters for BaselineNet<'_> {
    fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.model.named_parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.model.parameters_mut()
    }
}

impl Net for BaselineNet<'_> {
    fn forward(&self, g: &mut Graph, batch: &Batch, mode: Mode, rng: &mut ChaCha8Rng) -> Result<(NodeId, Vec<NodeId>)> {
        let masks = match (self.features, mode) {
            (Features::Flagged, Mode::Train) => Some(draw_masks(batch.days.len(), self.mask_probability, rng)),
            (Features::Flagged, Mode::EvalMasked(m)) => Some(vec![m; batch.days.len()]),
            (Features::Flagged, Mode::Eval) => {
                return Err(Error::Contract("a flag model is evaluated with an explicit masking choice".into()));
            }
            _ => None,
        };
        let steps = self.data.steps(batch.catchment, &batch.days, self.features, masks.as_deref())?;
        let steps = constants(g, steps);
        let mut bound = self.model.net.bind(g, true)?;
        bound.stack.training = mode == Mode::Train;
        let pred = regress(g, &bound, &steps, rng)?;
        Ok((pred, bound.leaves()))
    }

    fn targets(&self, batch: &Batch) -> Vec<f64> {
        self.data.targets(batch.catchment, &batch.days)
    }

    fn eval_modes(&self) -> Vec<Mode> {
        if self.features == Features::Flagged {
            vec![Mode::EvalMasked(true), Mode::EvalMasked(false)]
        } else {
            vec![Mode::Eval]
        }
    }
}

/// Body and multi-catchment head trained together.
pub struct HydraNet<'a> {
    pub body: HydraBody,
    pub head: MultiCatchmentHead,
    pub data: &'a PreparedData,
}

impl Parameters for HydraNet<'_> {
    fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.body.named_parameters();
        out.extend(self.head.named_parameters());
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.body.parameters_mut();
        out.extend(self.head.parameters_mut());
        out
    }
}

impl Net for HydraNet<'_> {
    fn forward(&self, g: &mut Graph, batch: &Batch, mode: Mode, rng: &mut ChaCha8Rng) -> Result<(NodeId, Vec<NodeId>)> {
        let steps = self.data.steps(batch.catchment, &batch.days, Features::Shared, None)?;
        let steps = constants(g, steps);
        let training = mode == Mode::Train;
        let mut body = self.body.stack.bind(g, true)?;
        body.training = training;
        let mut head = self.head.net.bind(g, true)?;
        head.stack.training = training;
        let enc = encode_graph(g, &body, &steps, rng)?;
        let pred = head_graph(g, &head, &enc, None, rng)?;
        let mut leaves = body.leaves();
        leaves.extend(head.leaves());
        Ok((pred, leaves))
    }

    fn targets(&self, batch: &Batch) -> Vec<f64> {
        self.data.targets(batch.catchment, &batch.days)
    }
}

/// Frozen-body encodings `[W x H]` per forecast day of one catchment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncodingCache {
    pub hidden_size: usize,
    pub window: usize,
    pub encodings: BTreeMap<usize, Vec<f64>>,
}

impl EncodingCache {
    pub fn bytes_needed(n_days: usize, window: usize, hidden: usize) -> usize {
        n_days * window * hidden * std::mem::size_of::<f64>()
    }

    /// Runs the body in evaluation mode over `days` in chunks of `chunk`.
    pub fn build(body: &HydraBody, data: &PreparedData, catchment: usize, days: &[usize], chunk: usize) -> Result<Self> {
        let (w, h) = (data.window, body.hidden_size());
        let mut encodings = BTreeMap::new();
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        for part in days.chunks(chunk.max(1)) {
            let mut g = Graph::new();
            let steps = data.steps(catchment, part, Features::Shared, None)?;
            let steps = constants(&mut g, steps);
            let mut bound = body.stack.bind(&mut g, false)?;
            bound.training = false;
            let enc = encode_graph(&mut g, &bound, &steps, &mut rng)?;
            for (i, &day) in part.iter().enumerate() {
                let mut rows = Vec::with_capacity(w * h);
                for e in &enc {
                    rows.extend_from_slice(g.value(*e).row(i));
                }
                encodings.insert(day, rows);
            }
        }
        Ok(EncodingCache { hidden_size: h, window: w, encodings })
    }

    fn steps(&self, days: &[usize]) -> Result<Vec<Tensor>> {
        let h = self.hidden_size;
        let rows: Vec<&Vec<f64>> = days
            .iter()
            .map(|d| self.encodings.get(d).ok_or_else(|| Error::Contract(format!("no cached encoding for day {d}"))))
            .collect::<Result<_>>()?;
        (0..self.window)
            .map(|k| {
                let values: Vec<f64> = rows.iter().flat_map(|r| r[k * h..(k + 1) * h].iter().copied()).collect();
                Tensor::matrix(days.len(), h, values)
            })
            .collect()
    }
}

/// A single-catchment head trained against a frozen body.
pub struct SingleHeadNet<'a> {
    pub head: SingleCatchmentHead,
    pub body: &'a HydraBody,
    pub data: &'a PreparedData,
    pub catchment: usize,
    pub cache: Option<EncodingCache>,
}

impl SingleHeadNet<'_> {
    fn encoding(&self, g: &mut Graph, batch: &Batch, rng: &mut ChaCha8Rng) -> Result<Vec<NodeId>> {
        match &self.cache {
            Some(cache) => Ok(constants(g, cache.steps(&batch.days)?)),
            None => {
                let steps = self.data.steps(batch.catchment, &batch.days, Features::Shared, None)?;
                let steps = constants(g, steps);
                let mut body = self.body.stack.bind(g, false)?;
                body.training = false;
                encode_graph(g, &body, &steps, rng)
            }
        }
    }
}

impl Parameters for SingleHeadNet<'_> {
    fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.head.named_parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.head.parameters_mut()
    }
}

impl Net for SingleHeadNet<'_> {
    fn forward(&self, g: &mut Graph, batch: &Batch, mode: Mode, rng: &mut ChaCha8Rng) -> Result<(NodeId, Vec<NodeId>)> {
        if batch.catchment != self.catchment {
            return Err(Error::Contract(format!(
                "head for {} given a batch from another catchment",
                self.head.catchment_id
            )));
        }
        let enc = self.encoding(g, batch, rng)?;
        let extra = self.data.steps(batch.catchment, &batch.days, Features::Extras, None)?;
        let extra = constants(g, extra);
        let mut head = self.head.net.bind(g, true)?;
        head.stack.training = mode == Mode::Train;
        let pred = head_graph(g, &head, &enc, Some(&extra), rng)?;
        Ok((pred, head.leaves()))
    }

    fn targets(&self, batch: &Batch) -> Vec<f64> {
        self.data.targets(batch.catchment, &batch.days)
    }
}
