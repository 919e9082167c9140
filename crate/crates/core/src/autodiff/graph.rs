use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise functions of one argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Relu,
    Exp,
    Log1p,
}

/// Elementwise functions of two arguments. Operands must have equal shapes,
/// or one of them must hold a single value (scalar broadcasting).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone)]
enum Op {
    MatMul { a: NodeId, b: NodeId, out: NodeId },
    Transpose { a: NodeId, out: NodeId },
    Binary { kind: Binary, a: NodeId, b: NodeId, out: NodeId },
    Scale { a: NodeId, factor: f64, out: NodeId },
    RowBroadcastAdd { a: NodeId, bias: NodeId, out: NodeId },
    Unary { kind: Unary, a: NodeId, out: NodeId },
    Concat { parts: Vec<NodeId>, axis: usize, out: NodeId },
    Slice { a: NodeId, axis: usize, start: usize, out: NodeId },
    Sum { a: NodeId, out: NodeId },
    Mean { a: NodeId, out: NodeId },
}

impl Op {
    fn output(&self) -> NodeId {
        match *self {
            Op::MatMul { out, .. }
            | Op::Transpose { out, .. }
            | Op::Binary { out, .. }
            | Op::Scale { out, .. }
            | Op::RowBroadcastAdd { out, .. }
            | Op::Unary { out, .. }
            | Op::Concat { out, .. }
            | Op::Slice { out, .. }
            | Op::Sum { out, .. }
            | Op::Mean { out, .. } => out,
        }
    }
}

#[derive(Debug)]
struct Node {
    tensor: Tensor,
    is_leaf: bool,
    needs_grad: bool,
}

/// Dynamic tape for reverse-mode differentiation.
///
/// Every primitive appends its output node and an operation record; the
/// records are therefore topologically ordered by construction. `backward`
/// walks them once in reverse and accumulates gradients into the leaves that
/// require them. A graph is single-use scratch space: build one per forward
/// pass and drop it afterwards.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    ops: Vec<Op>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    /// Registers a leaf. Its `requires_grad` flag decides whether `backward`
    /// fills a gradient for it; any gradient carried by `tensor` is discarded.
    pub fn leaf(&mut self, mut tensor: Tensor) -> NodeId {
        tensor.clear_grad();
        let needs_grad = tensor.requires_grad();
        self.push(tensor, true, needs_grad)
    }

    /// Registers a leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> NodeId {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].tensor.shape()
    }

    /// Gradient of a leaf after `backward`, if one was allocated.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].tensor.grad()
    }

    fn push(&mut self, tensor: Tensor, is_leaf: bool, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { tensor, is_leaf, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn push_op(&mut self, tensor: Tensor, inputs: &[NodeId], make: impl FnOnce(NodeId) -> Op) -> NodeId {
        let needs_grad = inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        let out = self.push(tensor, false, needs_grad);
        self.ops.push(make(out));
        out
    }

    /// Matrix product of `[m x k]` and `[k x n]` operands.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::Dimension(format!(
                "matmul of shapes {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        matmul_into(ta.values(), tb.values(), &mut out, m, k, n);
        let t = Tensor::matrix(m, n, out)?;
        Ok(self.push_op(t, &[a, b], |out| Op::MatMul { a, b, out }))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let ta = self.value(a);
        if ta.rank() != 2 {
            return Err(Error::Dimension(format!("transpose of shape {:?}", ta.shape())));
        }
        let (r, c) = (ta.shape()[0], ta.shape()[1]);
        let t = Tensor::matrix(c, r, transposed(ta.values(), r, c))?;
        Ok(self.push_op(t, &[a], |out| Op::Transpose { a, out }))
    }

    pub fn binary(&mut self, kind: Binary, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape(ta, tb)?;
        let n: usize = shape.iter().product();
        let (va, vb) = (ta.values(), tb.values());
        let (sa, sb) = (va.len() == 1 && n != 1, vb.len() == 1 && n != 1);
        let f = match kind {
            Binary::Add => |x: f64, y: f64| x + y,
            Binary::Sub => |x: f64, y: f64| x - y,
            Binary::Mul => |x: f64, y: f64| x * y,
        };
        let values = (0..n)
            .map(|i| f(if sa { va[0] } else { va[i] }, if sb { vb[0] } else { vb[i] }))
            .collect();
        let t = Tensor::new(shape, values)?;
        Ok(self.push_op(t, &[a, b], |out| Op::Binary { kind, a, b, out }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Mul, a, b)
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let ta = self.value(a);
        let values = ta.values().iter().map(|v| v * factor).collect();
        let t = Tensor::new(ta.shape().to_vec(), values).expect("same shape");
        self.push_op(t, &[a], |out| Op::Scale { a, factor, out })
    }

    /// Adds a length-`n` vector to every row of an `[m x n]` matrix.
    pub fn add_row_broadcast(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if ta.rank() != 2 || tb.numel() != ta.shape()[1] {
            return Err(Error::Dimension(format!(
                "row broadcast of {:?} onto {:?}",
                tb.shape(),
                ta.shape()
            )));
        }
        let n = ta.shape()[1];
        let vb = tb.values();
        let values = ta.values().iter().enumerate().map(|(i, v)| v + vb[i % n]).collect();
        let t = Tensor::new(ta.shape().to_vec(), values)?;
        Ok(self.push_op(t, &[a, bias], |out| Op::RowBroadcastAdd { a, bias, out }))
    }

    pub fn unary(&mut self, kind: Unary, a: NodeId) -> Result<NodeId> {
        let ta = self.value(a);
        if kind == Unary::Log1p {
            if let Some(bad) = ta.values().iter().find(|v| **v <= -1.0) {
                return Err(Error::Domain(format!("log1p of {bad}")));
            }
        }
        let f: fn(f64) -> f64 = match kind {
            Unary::Sigmoid => sigmoid,
            Unary::Tanh => f64::tanh,
            Unary::Relu => |x| if x > 0.0 { x } else { 0.0 },
            Unary::Exp => f64::exp,
            Unary::Log1p => f64::ln_1p,
        };
        let values = ta.values().iter().map(|v| f(*v)).collect();
        let t = Tensor::new(ta.shape().to_vec(), values)?;
        Ok(self.push_op(t, &[a], |out| Op::Unary { kind, a, out }))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Sigmoid, a).expect("total function")
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Tanh, a).expect("total function")
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Relu, a).expect("total function")
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(Unary::Exp, a).expect("total function")
    }

    pub fn log1p(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(Unary::Log1p, a)
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        let first = parts.first().ok_or_else(|| Error::Dimension("concat of nothing".into()))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::Dimension(format!("concat axis {axis} for shape {base:?}")));
        }
        let mut axis_total = 0;
        for p in parts {
            let s = self.value(*p).shape();
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::Dimension(format!(
                    "cannot concat {:?} with {:?} on axis {}",
                    base, s, axis
                )));
            }
            axis_total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut shape = base.clone();
        shape[axis] = axis_total;
        let mut values = Vec::with_capacity(outer * axis_total * inner);
        for o in 0..outer {
            for p in parts {
                let t = self.value(*p);
                let chunk = t.shape()[axis] * inner;
                values.extend_from_slice(&t.values()[o * chunk..(o + 1) * chunk]);
            }
        }
        let t = Tensor::new(shape, values)?;
        let parts_vec = parts.to_vec();
        Ok(self.push_op(t, parts, |out| Op::Concat { parts: parts_vec, axis, out }))
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, a: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        let ta = self.value(a);
        let s = ta.shape();
        if axis >= s.len() || start + len > s[axis] {
            return Err(Error::Dimension(format!(
                "slice [{}..{}) on axis {} of shape {:?}",
                start,
                start + len,
                axis,
                s
            )));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let full = s[axis] * inner;
        let mut values = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * full + start * inner;
            values.extend_from_slice(&ta.values()[base..base + len * inner]);
        }
        let mut shape = s.to_vec();
        shape[axis] = len;
        let t = Tensor::new(shape, values)?;
        Ok(self.push_op(t, &[a], |out| Op::Slice { a, axis, start, out }))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).values().iter().sum();
        self.push_op(Tensor::scalar(s), &[a], |out| Op::Sum { a, out })
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let m = t.values().iter().sum::<f64>() / t.numel() as f64;
        self.push_op(Tensor::scalar(m), &[a], |out| Op::Mean { a, out })
    }

    /// Back-propagates from a scalar `loss`.
    ///
    /// Every leaf with `requires_grad` gets a gradient buffer (zeros when it
    /// does not influence the loss); repeated calls accumulate into it.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(vec![1.0]);

        for op in self.ops.iter().rev() {
            let out = op.output();
            let Some(dout) = adj[out.0].take() else { continue };
            if !self.nodes[out.0].needs_grad {
                continue;
            }
            self.propagate(op, &dout, &mut adj);
        }

        for (node, a) in self.nodes.iter_mut().zip(adj) {
            if node.is_leaf && node.tensor.requires_grad() {
                let n = node.tensor.numel();
                node.tensor.accumulate_grad(&a.unwrap_or_else(|| vec![0.0; n]));
            }
        }
        Ok(())
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn propagate(&self, op: &Op, dout: &[f64], adj: &mut [Option<Vec<f64>>]) {
        match op {
            Op::MatMul { a, b, .. } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.wants(*a) {
                    // dA = dOut · Bᵀ
                    let da = slot(adj, *a, m * k);
                    let vb = tb.values();
                    for i in 0..m {
                        let drow = &dout[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &vb[p * n..(p + 1) * n];
                            da[i * k + p] += dot(drow, brow);
                        }
                    }
                }
                if self.wants(*b) {
                    // dB = Aᵀ · dOut
                    let db = slot(adj, *b, k * n);
                    let va = ta.values();
                    for i in 0..m {
                        let drow = &dout[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = va[i * k + p];
                            if aip != 0.0 {
                                axpy(aip, drow, &mut db[p * n..(p + 1) * n]);
                            }
                        }
                    }
                }
            }
            Op::Transpose { a, .. } => {
                if self.wants(*a) {
                    let s = self.value(*a).shape();
                    let (r, c) = (s[0], s[1]);
                    let back = transposed(dout, c, r);
                    add_into(slot(adj, *a, r * c), &back);
                }
            }
            Op::Binary { kind, a, b, .. } => {
                let (va, vb) = (self.value(*a).values(), self.value(*b).values());
                let n = dout.len();
                let at = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
                for (target, other, sign) in [(*a, vb, 1.0), (*b, va, -1.0)] {
                    if !self.wants(target) {
                        continue;
                    }
                    let len = self.value(target).numel();
                    let broadcast = len == 1 && n != 1;
                    let d = slot(adj, target, len);
                    for i in 0..n {
                        let g = match kind {
                            Binary::Add => dout[i],
                            Binary::Sub => sign * dout[i],
                            Binary::Mul => dout[i] * at(other, i),
                        };
                        d[if broadcast { 0 } else { i }] += g;
                    }
                }
            }
            Op::Scale { a, factor, .. } => {
                if self.wants(*a) {
                    axpy(*factor, dout, slot(adj, *a, dout.len()));
                }
            }
            Op::RowBroadcastAdd { a, bias, .. } => {
                if self.wants(*a) {
                    add_into(slot(adj, *a, dout.len()), dout);
                }
                if self.wants(*bias) {
                    let n = self.value(*bias).numel();
                    let db = slot(adj, *bias, n);
                    for row in dout.chunks(n) {
                        add_into(db, row);
                    }
                }
            }
            Op::Unary { kind, a, out } => {
                if !self.wants(*a) {
                    return;
                }
                let x = self.value(*a).values();
                let y = self.value(*out).values();
                let d = slot(adj, *a, x.len());
                for i in 0..x.len() {
                    let local = match kind {
                        Unary::Sigmoid => y[i] * (1.0 - y[i]),
                        Unary::Tanh => 1.0 - y[i] * y[i],
                        Unary::Relu => {
                            if x[i] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Unary::Exp => y[i],
                        Unary::Log1p => 1.0 / (1.0 + x[i]),
                    };
                    d[i] += dout[i] * local;
                }
            }
            Op::Concat { parts, axis, out } => {
                let shape = self.value(*out).shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let chunk = self.value(*p).shape()[*axis] * inner;
                    if self.wants(*p) {
                        let d = slot(adj, *p, outer * chunk);
                        for o in 0..outer {
                            let src = &dout[o * row + offset..o * row + offset + chunk];
                            add_into(&mut d[o * chunk..(o + 1) * chunk], src);
                        }
                    }
                    offset += chunk;
                }
            }
            Op::Slice { a, axis, start, out } => {
                if !self.wants(*a) {
                    return;
                }
                let s = self.value(*a).shape();
                let len = self.value(*out).shape()[*axis];
                let outer: usize = s[..*axis].iter().product();
                let inner: usize = s[axis + 1..].iter().product();
                let full = s[*axis] * inner;
                let d = slot(adj, *a, outer * full);
                for o in 0..outer {
                    let base = o * full + start * inner;
                    add_into(&mut d[base..base + len * inner], &dout[o * len * inner..(o + 1) * len * inner]);
                }
            }
            Op::Sum { a, .. } => {
                if self.wants(*a) {
                    let n = self.value(*a).numel();
                    slot(adj, *a, n).iter_mut().for_each(|v| *v += dout[0]);
                }
            }
            Op::Mean { a, .. } => {
                if self.wants(*a) {
                    let n = self.value(*a).numel();
                    let g = dout[0] / n as f64;
                    slot(adj, *a, n).iter_mut().for_each(|v| *v += g);
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn broadcast_shape(a: &Tensor, b: &Tensor) -> Result<Vec<usize>> {
    if a.shape() == b.shape() || (a.numel() == 1 && b.numel() == 1) {
        Ok(a.shape().to_vec())
    } else if a.numel() == 1 {
        Ok(b.shape().to_vec())
    } else if b.numel() == 1 {
        Ok(a.shape().to_vec())
    } else {
        Err(Error::Dimension(format!(
            "elementwise operands {:?} and {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

fn slot<'a>(adj: &'a mut [Option<Vec<f64>>], id: NodeId, n: usize) -> &'a mut Vec<f64> {
    adj[id.0].get_or_insert_with(|| vec![0.0; n])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn transposed(v: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = v[r * cols + c];
        }
    }
    out
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip != 0.0 {
                axpy(aip, &b[p * n..(p + 1) * n], orow);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{central_difference, relative_error};

    fn param(shape: &[usize], values: Vec<f64>) -> Tensor {
        Tensor::new(shape.to_vec(), values).unwrap().with_requires_grad(true)
    }

    #[test]
    fn identity_matmul() {
        let mut g = Graph::new();
        let i2 = g.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let x = g.constant(Tensor::matrix(2, 1, vec![0.3, -7.5]).unwrap());
        let y = g.matmul(i2, x).unwrap();
        assert_eq!(g.value(y).values(), &[0.3, -7.5]);
    }

    #[test]
    fn small_matmul() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let b = g.constant(Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap());
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 1]);
        assert_eq!(g.value(c).values(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        let msg = g.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("dimension"), "{msg}");
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let a0 = vec![0.5, -1.2, 0.3, 1.7, -0.4, 0.9];
        let b0 = vec![1.1, -0.6, 0.2, 0.8, -1.5, 0.4];
        let f = |av: &[f64]| {
            let mut g = Graph::new();
            let a = g.constant(Tensor::matrix(2, 3, av.to_vec()).unwrap());
            let b = g.constant(Tensor::matrix(3, 2, b0.clone()).unwrap());
            let c = g.matmul(a, b).unwrap();
            let s = g.sum(c);
            g.value(s).item().unwrap()
        };
        let mut g = Graph::new();
        let a = g.leaf(param(&[2, 3], a0.clone()));
        let b = g.constant(Tensor::matrix(3, 2, b0.clone()).unwrap());
        let c = g.matmul(a, b).unwrap();
        let s = g.sum(c);
        g.backward(s).unwrap();
        let fd = central_difference(f, &a0, 1e-5);
        assert!(relative_error(g.grad(a).unwrap(), &fd) < 1e-6);
    }

    #[test]
    fn elementwise_values() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::scalar(0.0));
        let s = g.sigmoid(z);
        let t = g.tanh(z);
        assert_eq!(g.value(s).item().unwrap(), 0.5);
        assert_eq!(g.value(t).item().unwrap(), 0.0);
        let bad = g.constant(Tensor::vector(vec![0.0, -1.0]));
        assert!(matches!(g.log1p(bad), Err(Error::Domain(_))));
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let mut g = Graph::new();
        let x = g.leaf(param(&[], vec![0.0]));
        let s = g.sigmoid(x);
        g.backward(s).unwrap();
        let fd = central_difference(|v| sigmoid(v[0]), &[0.0], 1e-5);
        assert!((g.grad(x).unwrap()[0] - 0.25).abs() < 1e-15);
        assert!((fd[0] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn scalar_broadcasting_and_shape_errors() {
        let mut g = Graph::new();
        let v = g.leaf(param(&[3], vec![1.0, 2.0, 3.0]));
        let s = g.leaf(param(&[], vec![2.0]));
        let p = g.mul(v, s).unwrap();
        assert_eq!(g.value(p).values(), &[2.0, 4.0, 6.0]);
        let total = g.sum(p);
        g.backward(total).unwrap();
        assert_eq!(g.grad(s).unwrap(), &[6.0]);
        assert_eq!(g.grad(v).unwrap(), &[2.0, 2.0, 2.0]);
        let w = g.constant(Tensor::zeros(&[2]));
        assert!(matches!(g.add(v, w), Err(Error::Dimension(_))));
    }

    #[test]
    fn concat_identity_and_shapes() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(2, 3, (0..6).map(f64::from).collect()).unwrap());
        let same = g.concat(&[x], 0).unwrap();
        assert_eq!(g.value(same), g.value(x));
        let a = g.constant(Tensor::zeros(&[5, 8]));
        let b = g.constant(Tensor::zeros(&[5, 2]));
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c).shape(), &[5, 10]);
        assert!(g.concat(&[a, b], 0).is_err());
    }

    #[test]
    fn concat_gradient_splits_back_to_parts() {
        let mut g = Graph::new();
        let a = g.leaf(param(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let b = g.leaf(param(&[2, 1], vec![5.0, 6.0]));
        let c = g.concat(&[a, b], 1).unwrap();
        let weights = g.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let p = g.mul(c, weights).unwrap();
        let s = g.sum(p);
        g.backward(s).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[1.0, 2.0, 4.0, 5.0]);
        assert_eq!(g.grad(b).unwrap(), &[3.0, 6.0]);
    }

    #[test]
    fn backward_requires_scalar_and_accumulates() {
        let mut g = Graph::new();
        let w = g.leaf(param(&[3], vec![1.0, -2.0, 0.5]));
        assert!(matches!(g.backward(w), Err(Error::Contract(_))));
        let s = g.sum(w);
        g.backward(s).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[1.0, 1.0, 1.0]);
        g.backward(s).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut g = Graph::new();
        let w = g.leaf(param(&[2], vec![1.0, 2.0]));
        let c = g.constant(Tensor::scalar(3.0));
        g.backward(c).unwrap();
        assert_eq!(g.grad(w).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn reused_tensor_accumulates_additively() {
        let mut g = Graph::new();
        let x = g.leaf(param(&[], vec![3.0]));
        let y = g.mul(x, x).unwrap();
        let z = g.add(y, x).unwrap();
        g.backward(z).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[7.0]);
    }

    #[test]
    fn slice_and_row_broadcast() {
        let mut g = Graph::new();
        let m = g.leaf(param(&[2, 4], (0..8).map(f64::from).collect()));
        let bias = g.leaf(param(&[4], vec![10.0, 20.0, 30.0, 40.0]));
        let shifted = g.add_row_broadcast(m, bias).unwrap();
        let mid = g.slice(shifted, 1, 1, 2).unwrap();
        assert_eq!(g.value(mid).values(), &[21.0, 32.0, 25.0, 36.0]);
        let s = g.sum(mid);
        g.backward(s).unwrap();
        assert_eq!(g.grad(bias).unwrap(), &[0.0, 2.0, 2.0, 0.0]);
        assert_eq!(g.grad(m).unwrap(), &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
    }
}
