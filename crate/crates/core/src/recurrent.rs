//! LSTM layers, stacks with inter-layer dropout, and the three-quantile
//! projection used by every model.
//!
//! Gate layout inside the `4 * hidden` dimension is `[input, forget, cell,
//! output]`. Batched sequences are passed as one `[batch x features]` node per
//! timestep.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};

/// Number of quantile outputs (10%, 50%, 90%).
pub const N_QUANTILES: usize = 3;

/// Anything owning trainable tensors in a stable order.
pub trait Parameters {
    /// Fully qualified names paired with their tensors, in a fixed order.
    fn named_parameters(&self) -> Vec<(String, &Tensor)>;

    /// Mutable access in the same order as [`Parameters::named_parameters`].
    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_parameters(&self) -> usize {
        self.named_parameters().iter().map(|(_, t)| t.numel()).sum()
    }
}

/// One LSTM layer: input weights `W [4h x in]`, recurrent weights
/// `U [4h x h]` and bias `b [4h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

impl LstmLayerParams {
    /// Uniform `[-1/sqrt(h), 1/sqrt(h)]` initialization with the forget-gate
    /// bias shifted by +1.
    pub fn init(input_size: usize, hidden_size: usize, rng: &mut impl Rng) -> Result<Self> {
        check_sizes(input_size, hidden_size)?;
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let w = draw(4 * hidden_size * input_size);
        let u = draw(4 * hidden_size * hidden_size);
        let mut b = draw(4 * hidden_size);
        b[hidden_size..2 * hidden_size].iter_mut().for_each(|v| *v += 1.0);
        LstmLayerParams::from_values(input_size, hidden_size, w, u, b)
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Result<Self> {
        check_sizes(input_size, hidden_size)?;
        let h4 = 4 * hidden_size;
        LstmLayerParams::from_values(
            input_size,
            hidden_size,
            vec![0.0; h4 * input_size],
            vec![0.0; h4 * hidden_size],
            vec![0.0; h4],
        )
    }

    pub fn from_values(input_size: usize, hidden_size: usize, w: Vec<f64>, u: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_sizes(input_size, hidden_size)?;
        let h4 = 4 * hidden_size;
        Ok(LstmLayerParams {
            input_size,
            hidden_size,
            w: Tensor::matrix(h4, input_size, w)?.with_requires_grad(true),
            u: Tensor::matrix(h4, hidden_size, u)?.with_requires_grad(true),
            b: vector_of_len(b, h4)?.with_requires_grad(true),
        })
    }

    pub fn num_parameters(&self) -> usize {
        4 * self.hidden_size * (self.input_size + self.hidden_size + 1)
    }

    /// One step on unbatched vectors, outside any training graph.
    pub fn step(&self, x: &Tensor, h_prev: &Tensor, c_prev: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut g = Graph::new();
        let bound = BoundLayer::bind(self, &mut g, false)?;
        let row = |t: &Tensor| Tensor::matrix(1, t.numel(), t.values().to_vec());
        let x = g.constant(row(x)?);
        let h = g.constant(row(h_prev)?);
        let c = g.constant(row(c_prev)?);
        let (h, c) = lstm_step(&mut g, &bound, x, h, c)?;
        Ok((Tensor::vector(g.value(h).values().to_vec()), Tensor::vector(g.value(c).values().to_vec())))
    }
}

fn check_sizes(input_size: usize, hidden_size: usize) -> Result<()> {
    if input_size == 0 || hidden_size == 0 {
        return Err(Error::Config(format!(
            "LSTM sizes must be positive (input {input_size}, hidden {hidden_size})"
        )));
    }
    Ok(())
}

fn vector_of_len(values: Vec<f64>, n: usize) -> Result<Tensor> {
    if values.len() != n {
        return Err(Error::Dimension(format!("expected {n} values, got {}", values.len())));
    }
    Ok(Tensor::vector(values))
}

/// Layer parameters registered on a graph. Weights are stored transposed so
/// that batched rows can be multiplied directly.
#[derive(Debug, Clone)]
pub struct BoundLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    w_t: NodeId,
    u_t: NodeId,
    b: NodeId,
    leaves: [NodeId; 3],
}

impl BoundLayer {
    fn bind(params: &LstmLayerParams, g: &mut Graph, trainable: bool) -> Result<Self> {
        let reg = |g: &mut Graph, t: &Tensor| g.leaf(t.detached().with_requires_grad(trainable));
        let w = reg(g, &params.w);
        let u = reg(g, &params.u);
        let b = reg(g, &params.b);
        Ok(BoundLayer {
            input_size: params.input_size,
            hidden_size: params.hidden_size,
            w_t: g.transpose(w)?,
            u_t: g.transpose(u)?,
            b,
            leaves: [w, u, b],
        })
    }
}

/// Single LSTM step on batched rows `x [B x in]`, `h, c [B x hidden]`.
pub fn lstm_step(g: &mut Graph, layer: &BoundLayer, x: NodeId, h_prev: NodeId, c_prev: NodeId) -> Result<(NodeId, NodeId)> {
    let hs = layer.hidden_size;
    let xw = g.matmul(x, layer.w_t)?;
    let hu = g.matmul(h_prev, layer.u_t)?;
    let pre = g.add(xw, hu)?;
    let gates = g.add_row_broadcast(pre, layer.b)?;
    let i = g.slice(gates, 1, 0, hs)?;
    let f = g.slice(gates, 1, hs, hs)?;
    let c_hat = g.slice(gates, 1, 2 * hs, hs)?;
    let o = g.slice(gates, 1, 3 * hs, hs)?;
    let i = g.sigmoid(i);
    let f = g.sigmoid(f);
    let c_hat = g.tanh(c_hat);
    let o = g.sigmoid(o);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, c_hat)?;
    let c = g.add(keep, write)?;
    let squashed = g.tanh(c);
    let h = g.mul(o, squashed)?;
    Ok((h, c))
}

/// Stacked LSTM. Dropout acts on the hidden sequence passed between layers,
/// with one mask per layer held fixed across the timesteps of a call.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmLayerParams>,
    pub dropout: f64,
    pub training: bool,
}

impl LstmStack {
    pub fn new(input_size: usize, hidden_size: usize, num_layers: usize, dropout: f64, rng: &mut impl Rng) -> Result<Self> {
        if num_layers == 0 {
            return Err(Error::Config("an LSTM stack needs at least one layer".into()));
        }
        let layers = (0..num_layers)
            .map(|l| LstmLayerParams::init(if l == 0 { input_size } else { hidden_size }, hidden_size, rng))
            .collect::<Result<Vec<_>>>()?;
        LstmStack::from_layers(layers, dropout)
    }

    pub fn from_layers(layers: Vec<LstmLayerParams>, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an LSTM stack needs at least one layer".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout rate {dropout} outside [0, 1)")));
        }
        for pair in layers.windows(2) {
            if pair[1].input_size != pair[0].hidden_size {
                return Err(Error::Dimension(format!(
                    "layer input size {} does not follow hidden size {}",
                    pair[1].input_size, pair[0].hidden_size
                )));
            }
        }
        Ok(LstmStack { layers, dropout, training: false })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.layers.last().expect("non-empty").hidden_size
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Registers all layers on `g`; `trainable = false` freezes them.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Result<BoundStack> {
        let layers = self.layers.iter().map(|l| BoundLayer::bind(l, g, trainable)).collect::<Result<Vec<_>>>()?;
        Ok(BoundStack { layers, dropout: self.dropout, training: self.training })
    }

    /// Adds gradients accumulated on `g` into the parameter tensors.
    pub fn absorb_grads(&mut self, g: &Graph, bound: &BoundStack) {
        for (params, b) in self.layers.iter_mut().zip(&bound.layers) {
            for (t, id) in [&mut params.w, &mut params.u, &mut params.b].into_iter().zip(b.leaves) {
                if let Some(grad) = g.grad(id) {
                    t.accumulate_grad(grad);
                }
            }
        }
    }

    /// Full hidden-state sequence `[T x hidden]` of the last layer for one
    /// unbatched input sequence `[T x features]`.
    pub fn run_sequence(&self, inputs: &Tensor, seed: u64) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false)?;
        let steps = unbatched_steps(&mut g, inputs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = run_sequence(&mut g, &bound, &steps, &mut rng)?;
        stack_rows(&g, &out)
    }

    /// Concatenates the layers of two stacks (`self` feeding `next`).
    pub fn stacked_with(&self, next: &LstmStack) -> Result<LstmStack> {
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        LstmStack::from_layers(layers, self.dropout)
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(3 * self.layers.len());
        for (k, l) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}layer{k}.W"), &l.w));
            out.push((format!("{prefix}layer{k}.U"), &l.u));
            out.push((format!("{prefix}layer{k}.b"), &l.b));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.u, &mut l.b]).collect()
    }
}

impl Parameters for LstmStack {
    fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.named_params("")
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.params_mut()
    }
}

/// A stack registered on a graph.
#[derive(Debug, Clone)]
pub struct BoundStack {
    pub layers: Vec<BoundLayer>,
    pub dropout: f64,
    pub training: bool,
}

impl BoundStack {
    /// Parameter leaves in [`LstmStack::params_mut`] order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.layers.iter().flat_map(|l| l.leaves).collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.layers.last().expect("non-empty").hidden_size
    }
}

/// Runs a bound stack over per-timestep batches `[B x features]` from zero
/// initial state and returns the last layer's hidden state at every step.
pub fn run_sequence(g: &mut Graph, stack: &BoundStack, inputs: &[NodeId], rng: &mut dyn RngCore) -> Result<Vec<NodeId>> {
    let first = inputs.first().ok_or_else(|| Error::Contract("empty input sequence".into()))?;
    let shape = g.shape(*first).to_vec();
    if shape.len() != 2 || shape[1] != stack.input_size() {
        return Err(Error::Dimension(format!(
            "sequence step of shape {:?} for a stack with input size {}",
            shape,
            stack.input_size()
        )));
    }
    let batch = shape[0];
    let mut seq = inputs.to_vec();
    let n_layers = stack.layers.len();
    for (l, layer) in stack.layers.iter().enumerate() {
        let zero = Tensor::zeros(&[batch, layer.hidden_size]);
        let mut h = g.constant(zero.clone());
        let mut c = g.constant(zero);
        let mut out = Vec::with_capacity(seq.len());
        for x in &seq {
            let (h_next, c_next) = lstm_step(g, layer, *x, h, c)?;
            out.push(h_next);
            h = h_next;
            c = c_next;
        }
        if l + 1 < n_layers && stack.training && stack.dropout > 0.0 {
            let mask = g.constant(dropout_mask(batch, layer.hidden_size, stack.dropout, rng));
            for h in out.iter_mut() {
                *h = g.mul(*h, mask)?;
            }
        }
        seq = out;
    }
    Ok(seq)
}

/// Inverted-scaling Bernoulli mask: kept units are divided by the keep rate.
fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut dyn RngCore) -> Tensor {
    let keep = 1.0 - rate;
    let values = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    Tensor::new(vec![rows, cols], values).expect("mask shape")
}

/// Splits an unbatched `[T x F]` tensor into `T` constant `[1 x F]` steps.
pub fn unbatched_steps(g: &mut Graph, inputs: &Tensor) -> Result<Vec<NodeId>> {
    if inputs.rank() != 2 {
        return Err(Error::Dimension(format!("sequence input of shape {:?}", inputs.shape())));
    }
    if inputs.rows() == 0 {
        return Err(Error::Contract("empty input sequence".into()));
    }
    let f = inputs.cols();
    Ok((0..inputs.rows())
        .map(|t| g.constant(Tensor::matrix(1, f, inputs.row(t).to_vec()).expect("row shape")))
        .collect())
}

/// Stacks single-row step outputs back into a `[T x width]` tensor.
pub fn stack_rows(g: &Graph, steps: &[NodeId]) -> Result<Tensor> {
    let width = g.shape(steps[0])[1];
    let mut values = Vec::with_capacity(steps.len() * width);
    for s in steps {
        values.extend_from_slice(g.value(*s).values());
    }
    Tensor::matrix(steps.len(), width, values)
}

/// Affine map from the final hidden state to the three quantile outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    /// `[3 x hidden]`
    pub w: Tensor,
    /// `[3]`
    pub b: Tensor,
}

impl LinearHead {
    pub fn init(hidden_size: usize, rng: &mut impl Rng) -> Result<Self> {
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let w = (0..N_QUANTILES * hidden_size).map(|_| rng.random_range(-bound..=bound)).collect();
        LinearHead::from_values(hidden_size, w, vec![0.0; N_QUANTILES])
    }

    pub fn from_values(hidden_size: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Ok(LinearHead {
            w: Tensor::matrix(N_QUANTILES, hidden_size, w)?.with_requires_grad(true),
            b: vector_of_len(b, N_QUANTILES)?.with_requires_grad(true),
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.w.cols()
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Result<BoundHead> {
        let w = g.leaf(self.w.detached().with_requires_grad(trainable));
        let b = g.leaf(self.b.detached().with_requires_grad(trainable));
        Ok(BoundHead { w_t: g.transpose(w)?, b, leaves: [w, b] })
    }

    pub fn absorb_grads(&mut self, g: &Graph, bound: &BoundHead) {
        for (t, id) in [&mut self.w, &mut self.b].into_iter().zip(bound.leaves) {
            if let Some(grad) = g.grad(id) {
                t.accumulate_grad(grad);
            }
        }
    }

    /// Projection of one unbatched hidden vector.
    pub fn apply(&self, h_last: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false)?;
        let h = g.constant(Tensor::matrix(1, h_last.numel(), h_last.values().to_vec())?);
        let out = linear_head(&mut g, &bound, h)?;
        Ok(Tensor::vector(g.value(out).values().to_vec()))
    }
}

#[derive(Debug, Clone)]
pub struct BoundHead {
    w_t: NodeId,
    b: NodeId,
    leaves: [NodeId; 2],
}

impl BoundHead {
    pub fn leaves(&self) -> Vec<NodeId> {
        self.leaves.to_vec()
    }
}

/// `h_last [B x hidden]` to quantile outputs `[B x 3]`.
pub fn linear_head(g: &mut Graph, head: &BoundHead, h_last: NodeId) -> Result<NodeId> {
    let z = g.matmul(h_last, head.w_t)?;
    g.add_row_broadcast(z, head.b)
}

/// An LSTM stack followed by a quantile projection of its final hidden state.
/// Baseline models and both Hydra head types share this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRegressor {
    pub stack: LstmStack,
    pub proj: LinearHead,
}

#[derive(Debug, Clone)]
pub struct BoundRegressor {
    pub stack: BoundStack,
    pub proj: BoundHead,
}

impl BoundRegressor {
    /// Parameter leaves in [`SequenceRegressor::params_mut`] order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = self.stack.leaves();
        out.extend(self.proj.leaves());
        out
    }
}

/// Adds the gradients recorded on `g` for `leaves` into the matching tensors.
pub fn absorb_gradients(params: Vec<&mut Tensor>, g: &Graph, leaves: &[NodeId]) {
    debug_assert_eq!(params.len(), leaves.len());
    for (t, id) in params.into_iter().zip(leaves) {
        if let Some(grad) = g.grad(*id) {
            t.accumulate_grad(grad);
        }
    }
}

impl SequenceRegressor {
    pub fn new(input_size: usize, hidden_size: usize, num_layers: usize, dropout: f64, rng: &mut impl Rng) -> Result<Self> {
        let stack = LstmStack::new(input_size, hidden_size, num_layers, dropout, rng)?;
        let proj = LinearHead::init(hidden_size, rng)?;
        Ok(SequenceRegressor { stack, proj })
    }

    pub fn input_size(&self) -> usize {
        self.stack.input_size()
    }

    pub fn set_training(&mut self, training: bool) {
        self.stack.training = training;
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Result<BoundRegressor> {
        Ok(BoundRegressor { stack: self.stack.bind(g, trainable)?, proj: self.proj.bind(g, trainable)? })
    }

    pub fn absorb_grads(&mut self, g: &Graph, bound: &BoundRegressor) {
        self.stack.absorb_grads(g, &bound.stack);
        self.proj.absorb_grads(g, &bound.proj);
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = self.stack.named_params(prefix);
        out.push((format!("{prefix}proj.W"), &self.proj.w));
        out.push((format!("{prefix}proj.b"), &self.proj.b));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.stack.params_mut();
        out.push(&mut self.proj.w);
        out.push(&mut self.proj.b);
        out
    }
}

/// Runs the regressor over batched steps and projects the final state.
pub fn regress(g: &mut Graph, model: &BoundRegressor, steps: &[NodeId], rng: &mut dyn RngCore) -> Result<NodeId> {
    let seq = run_sequence(g, &model.stack, steps, rng)?;
    linear_head(g, &model.proj, *seq.last().expect("non-empty sequence"))
}
