use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::is_catchment_specific;
use super::spec::{Architecture, HeadHyperparameters, ModelSpec};
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::recurrent::{
    linear_head, run_sequence, unbatched_steps, BoundRegressor, BoundStack, LstmStack, Parameters,
    SequenceRegressor,
};

pub const BODY_PREFIX: &str = "body.";
pub const HEAD_PREFIX: &str = "head.";

/// Shared encoder over the variables available at every catchment.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraBody {
    pub variables: Vec<String>,
    pub stack: LstmStack,
}

impl HydraBody {
    pub fn new(variables: Vec<String>, stack: LstmStack) -> Result<Self> {
        if let Some(v) = variables.iter().find(|v| is_catchment_specific(v)) {
            return Err(Error::Config(format!("the body cannot consume catchment-specific variable {v}")));
        }
        if variables.len() != stack.input_size() {
            return Err(Error::Dimension(format!(
                "body declares {} variables but its stack takes {} inputs",
                variables.len(),
                stack.input_size()
            )));
        }
        Ok(HydraBody { variables, stack })
    }

    pub fn hidden_size(&self) -> usize {
        self.stack.hidden_size()
    }

    /// Encoding time series `[T x hidden]` of one window, evaluation mode.
    pub fn encode(&self, shared: &Tensor) -> Result<Tensor> {
        let mut stack = self.stack.clone();
        stack.training = false;
        stack.run_sequence(shared, 0)
    }
}

impl Parameters for HydraBody {
    fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.stack.named_params(BODY_PREFIX)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.stack.params_mut()
    }
}

/// Head used wherever no catchment-specific data exists.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCatchmentHead {
    pub net: SequenceRegressor,
}

impl MultiCatchmentHead {
    pub fn new(body_hidden: usize, hp: HeadHyperparameters, dropout: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(MultiCatchmentHead { net: SequenceRegressor::new(body_hidden, hp.hidden_size, hp.num_layers, dropout, rng)? })
    }
}

impl Parameters for MultiCatchmentHead {
    fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.net.named_params(HEAD_PREFIX)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.params_mut()
    }
}

/// Head for one catchment; sees the encoding concatenated with that
/// catchment's extra series.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleCatchmentHead {
    pub catchment_id: String,
    pub extra_variables: Vec<String>,
    pub net: SequenceRegressor,
}

impl SingleCatchmentHead {
    pub fn new(
        catchment_id: String,
        extra_variables: Vec<String>,
        body_hidden: usize,
        hp: HeadHyperparameters,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if extra_variables.is_empty() {
            return Err(Error::Config(format!("single-catchment head for {catchment_id} has no extra variables")));
        }
        let net = SequenceRegressor::new(body_hidden + extra_variables.len(), hp.hidden_size, hp.num_layers, dropout, rng)?;
        Ok(SingleCatchmentHead { catchment_id, extra_variables, net })
    }
}

impl Parameters for SingleCatchmentHead {
    fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.net.named_params(HEAD_PREFIX)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.params_mut()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Head<'a> {
    Multi(&'a MultiCatchmentHead),
    Single(&'a SingleCatchmentHead),
}

/// Evaluation-mode prediction: body encoding, then the head over the
/// encoding (concatenated with `extra` for a single-catchment head).
pub fn hydra_forward(body: &HydraBody, head: Head<'_>, shared: &Tensor, extra: Option<&Tensor>) -> Result<Tensor> {
    let net = match (head, extra) {
        (Head::Multi(_), Some(_)) => {
            return Err(Error::Config("extra inputs were supplied to a multi-catchment head".into()));
        }
        (Head::Single(h), None) => {
            return Err(Error::Config(format!("single-catchment head for {} needs its extra inputs", h.catchment_id)));
        }
        (Head::Multi(h), None) => &h.net,
        (Head::Single(h), Some(x)) => {
            if x.rank() != 2 || x.cols() != h.extra_variables.len() || x.rows() != shared.rows() {
                return Err(Error::Dimension(format!(
                    "extra inputs of shape {:?} for {} extra variables over {} steps",
                    x.shape(),
                    h.extra_variables.len(),
                    shared.rows()
                )));
            }
            &h.net
        }
    };
    if shared.rank() != 2 || shared.cols() != body.variables.len() {
        return Err(Error::Dimension(format!(
            "shared inputs of shape {:?} for a body over {} variables",
            shared.shape(),
            body.variables.len()
        )));
    }
    let mut g = Graph::new();
    let mut body_bound = body.stack.bind(&mut g, false)?;
    body_bound.training = false;
    let mut head_bound = net.bind(&mut g, false)?;
    head_bound.stack.training = false;
    let steps = unbatched_steps(&mut g, shared)?;
    let extra_steps = match extra {
        Some(x) => Some(unbatched_steps(&mut g, x)?),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let enc = encode_graph(&mut g, &body_bound, &steps, &mut rng)?;
    let out = head_graph(&mut g, &head_bound, &enc, extra_steps.as_deref(), &mut rng)?;
    Ok(Tensor::vector(g.value(out).values().to_vec()))
}

/// Batched body pass on a graph.
pub fn encode_graph(g: &mut Graph, body: &BoundStack, steps: &[NodeId], rng: &mut dyn RngCore) -> Result<Vec<NodeId>> {
    run_sequence(g, body, steps, rng)
}

/// Batched head pass over encoding steps, optionally joined with extra steps
/// on the feature axis.
pub fn head_graph(
    g: &mut Graph,
    head: &BoundRegressor,
    encoding: &[NodeId],
    extra: Option<&[NodeId]>,
    rng: &mut dyn RngCore,
) -> Result<NodeId> {
    let inputs = match extra {
        None => encoding.to_vec(),
        Some(extra) => {
            if extra.len() != encoding.len() {
                return Err(Error::Dimension(format!(
                    "{} extra steps for {} encoding steps",
                    extra.len(),
                    encoding.len()
                )));
            }
            encoding.iter().zip(extra).map(|(e, x)| g.concat(&[*e, *x], 1)).collect::<Result<Vec<_>>>()?
        }
    };
    let seq = run_sequence(g, &head.stack, &inputs, rng)?;
    linear_head(g, &head.proj, *seq.last().expect("non-empty sequence"))
}

/// A body with its multi-catchment head and any single-catchment heads.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraModel {
    pub spec: ModelSpec,
    pub body: HydraBody,
    pub multi_head: MultiCatchmentHead,
    pub single_heads: BTreeMap<String, SingleCatchmentHead>,
}

impl HydraModel {
    /// Freshly initialized body and multi-catchment head.
    pub fn new(spec: ModelSpec, shared_variables: Vec<String>) -> Result<Self> {
        if spec.architecture != Architecture::Hydra {
            return Err(Error::Config(format!("{} is not a hydra spec", spec.architecture)));
        }
        let hp = spec.hyperparameters;
        hp.validate(Architecture::Hydra)?;
        let head_hp = hp.head.expect("validated");
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let stack = LstmStack::new(shared_variables.len(), hp.hidden_size, hp.num_layers, hp.dropout, &mut rng)?;
        let body = HydraBody::new(shared_variables, stack)?;
        let multi_head = MultiCatchmentHead::new(hp.hidden_size, head_hp, hp.dropout, &mut rng)?;
        Ok(HydraModel { spec, body, multi_head, single_heads: BTreeMap::new() })
    }

    /// Fresh single-catchment head seeded from the model seed and catchment.
    pub fn new_single_head(&self, catchment_id: &str, extra_variables: Vec<String>, seed: u64) -> Result<SingleCatchmentHead> {
        let hp = self.spec.hyperparameters;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SingleCatchmentHead::new(
            catchment_id.to_string(),
            extra_variables,
            self.body.hidden_size(),
            hp.head.expect("validated"),
            hp.dropout,
            &mut rng,
        )
    }
}
