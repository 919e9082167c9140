//! Reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records primitives as they execute and replays them backwards
//! in [`Graph::backward`]. The primitive set is exactly what the recurrent
//! models and the quantile loss need: matrix products, transposes, equal-shape
//! or scalar-broadcast elementwise arithmetic, row-broadcast bias addition,
//! a handful of activations, concatenation, slicing and reductions.

pub mod gradcheck;
mod graph;
mod tensor;

pub use graph::{sigmoid, Binary, Graph, NodeId, Unary};
pub use tensor::Tensor;
