use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layout::FeatureLayout;
use super::spec::{Architecture, ModelSpec};
use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::recurrent::{regress, unbatched_steps, Parameters, SequenceRegressor};

/// Parameter-name prefix of the single stack in a baseline checkpoint.
pub const BASELINE_PREFIX: &str = "model.";

/// One of the four single-stack baselines: an LSTM over the full feature
/// matrix followed by the quantile projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub spec: ModelSpec,
    pub layout: FeatureLayout,
    pub net: SequenceRegressor,
}

impl BaselineModel {
    pub fn new(spec: ModelSpec, layout: FeatureLayout) -> Result<Self> {
        if spec.architecture == Architecture::Hydra {
            return Err(Error::Config("hydra is not a single-stack baseline".into()));
        }
        let hp = spec.hyperparameters;
        hp.validate(spec.architecture)?;
        layout.check(spec.architecture)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let net = SequenceRegressor::new(layout.width(), hp.hidden_size, hp.num_layers, hp.dropout, &mut rng)?;
        Ok(BaselineModel { spec, layout, net })
    }

    pub fn architecture(&self) -> Architecture {
        self.spec.architecture
    }

    /// Evaluation-mode prediction from one `[T x F]` window.
    pub fn forward(&self, inputs: &Tensor) -> Result<Tensor> {
        if inputs.rank() != 2 || inputs.cols() != self.layout.width() {
            return Err(Error::Dimension(format!(
                "{} expects {} features per step, got shape {:?}",
                self.architecture(),
                self.layout.width(),
                inputs.shape()
            )));
        }
        let mut g = Graph::new();
        let mut bound = self.net.bind(&mut g, false)?;
        bound.stack.training = false;
        let steps = unbatched_steps(&mut g, inputs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = regress(&mut g, &bound, &steps, &mut rng)?;
        Ok(Tensor::vector(g.value(out).values().to_vec()))
    }

    /// Like [`BaselineModel::forward`], but first checks that the columns of
    /// `inputs` are exactly the declared variable set.
    pub fn forward_named(&self, variables: &[String], inputs: &Tensor) -> Result<Tensor> {
        if variables != self.layout.feature_names().as_slice() {
            return Err(Error::Config(format!(
                "{} declares variables {:?} but received {:?}",
                self.architecture(),
                self.layout.feature_names(),
                variables
            )));
        }
        self.forward(inputs)
    }
}

impl Parameters for BaselineModel {
    fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.net.named_params(BASELINE_PREFIX)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.params_mut()
    }
}

/// Closed-form parameter count of a stack with the given layer sizes.
pub fn lstm_parameter_count(input_size: usize, hidden_size: usize, num_layers: usize) -> usize {
    (0..num_layers)
        .map(|l| {
            let inp = if l == 0 { input_size } else { hidden_size };
            4 * hidden_size * (inp + hidden_size + 1)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::variables::{DISCHARGE, DRIVERS};
    use crate::models::spec::Hyperparameters;

    fn layout(extras: &[&str]) -> FeatureLayout {
        FeatureLayout::new(
            DRIVERS.iter().map(|s| s.to_string()).collect(),
            extras.iter().map(|s| s.to_string()).collect(),
            false,
        )
    }

    #[test]
    fn zero_parameters_give_projection_bias() {
        let mut m = BaselineModel::new(ModelSpec::new(Architecture::MultiCatchmentNoQ, 1), layout(&[])).unwrap();
        for t in m.parameters_mut() {
            t.values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        m.net.proj.b.values_mut().copy_from_slice(&[-1.0, 0.0, 2.5]);
        let x = Tensor::full(&[10, 6], 0.3);
        assert_eq!(m.forward(&x).unwrap().values(), &[-1.0, 0.0, 2.5]);
    }

    #[test]
    fn no_q_rejects_discharge() {
        let err = BaselineModel::new(ModelSpec::new(Architecture::MultiCatchmentNoQ, 1), layout(&[DISCHARGE]));
        assert!(matches!(err, Err(Error::Config(_))));
        let m = BaselineModel::new(ModelSpec::new(Architecture::MultiCatchmentNoQ, 1), layout(&[])).unwrap();
        let mut names = m.layout.feature_names();
        names.push(DISCHARGE.into());
        assert!(matches!(m.forward_named(&names, &Tensor::zeros(&[4, 7])), Err(Error::Config(_))));
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        let spec = ModelSpec::new(Architecture::MultiCatchmentWithQ, 3);
        let m = BaselineModel::new(spec, layout(&[DISCHARGE])).unwrap();
        let (h, f) = (128, 7);
        let closed = 4 * h * (f + h + 1) + 4 * h * (h + h + 1);
        assert_eq!(lstm_parameter_count(f, h, 2), closed);
        assert_eq!(m.num_parameters(), closed + 3 * h + 3);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let spec = ModelSpec {
            architecture: Architecture::SingleCatchment,
            hyperparameters: Hyperparameters { hidden_size: 8, num_layers: 2, learning_rate: 1e-3, dropout: 0.4, head: None },
            seed: 5,
        };
        let mut m = BaselineModel::new(spec, layout(&[])).unwrap();
        m.net.set_training(true);
        let x = Tensor::full(&[12, 6], -0.7);
        assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
    }
}
