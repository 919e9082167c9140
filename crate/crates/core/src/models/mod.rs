//! The compared architectures: four single-stack baselines and the Hydra
//! body/head composition, plus checkpoint serialization.

mod baseline;
mod checkpoint;
mod flag;
mod hydra;
mod layout;
mod spec;

pub use baseline::{lstm_parameter_count, BaselineModel, BASELINE_PREFIX};
pub use checkpoint::{Checkpoint, NamedTensor};
pub use flag::{flag_forward, FlagAugmentedInput, PLACEHOLDER};
pub use hydra::{
    encode_graph, head_graph, hydra_forward, Head, HydraBody, HydraModel, MultiCatchmentHead, SingleCatchmentHead,
    BODY_PREFIX, HEAD_PREFIX,
};
pub use layout::{is_catchment_specific, FeatureLayout};
pub use spec::{Architecture, HeadHyperparameters, HyperparameterGrid, Hyperparameters, ModelSpec};
