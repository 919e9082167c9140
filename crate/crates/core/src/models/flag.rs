use super::baseline::BaselineModel;
use super::spec::Architecture;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Value substituted for an unavailable variable, in normalized units
/// (the training mean).
pub const PLACEHOLDER: f64 = 0.0;

/// Base variables plus optional variables with their 0/1 availability flags,
/// all `[T x _]` and aligned in time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagAugmentedInput {
    pub base: Tensor,
    pub optional: Tensor,
    pub flags: Tensor,
}

impl FlagAugmentedInput {
    /// Optional variables available everywhere (flags 1).
    pub fn available(base: Tensor, optional: Tensor) -> Result<Self> {
        let flags = Tensor::full(optional.shape(), 1.0);
        FlagAugmentedInput::new(base, optional, flags)
    }

    /// Optional variables withheld for the whole window (placeholders, flags 0).
    pub fn masked(base: Tensor, optional: &Tensor) -> Result<Self> {
        let values = Tensor::full(optional.shape(), PLACEHOLDER);
        let flags = Tensor::zeros(optional.shape());
        FlagAugmentedInput::new(base, values, flags)
    }

    pub fn new(base: Tensor, optional: Tensor, flags: Tensor) -> Result<Self> {
        if base.rank() != 2 || optional.rank() != 2 || optional.shape() != flags.shape() || base.rows() != optional.rows()
        {
            return Err(Error::Dimension(format!(
                "flag input parts of shapes {:?}, {:?}, {:?} are not aligned",
                base.shape(),
                optional.shape(),
                flags.shape()
            )));
        }
        Ok(FlagAugmentedInput { base, optional, flags })
    }

    /// Flags are 0 or 1, and flag 0 holds exactly the placeholder.
    pub fn validate(&self) -> Result<()> {
        let cols = self.flags.cols();
        for (i, (&f, &v)) in self.flags.values().iter().zip(self.optional.values()).enumerate() {
            if f != 0.0 && f != 1.0 {
                return Err(Error::Data(format!("flag value {f} at step {}, column {}", i / cols, i % cols)));
            }
            if f == 0.0 && v != PLACEHOLDER {
                return Err(Error::Data(format!(
                    "flag 0 at step {}, column {} but value {v} is not the placeholder",
                    i / cols,
                    i % cols
                )));
            }
        }
        Ok(())
    }

    /// `[base | optional | flags]` feature matrix.
    pub fn features(&self) -> Result<Tensor> {
        let (b, o) = (self.base.cols(), self.optional.cols());
        let width = b + 2 * o;
        let mut values = Vec::with_capacity(self.base.rows() * width);
        for t in 0..self.base.rows() {
            values.extend_from_slice(self.base.row(t));
            values.extend_from_slice(self.optional.row(t));
            values.extend_from_slice(self.flags.row(t));
        }
        Tensor::matrix(self.base.rows(), width, values)
    }
}

pub fn flag_forward(model: &BaselineModel, input: &FlagAugmentedInput) -> Result<Tensor> {
    if model.architecture() != Architecture::Flag {
        return Err(Error::Config(format!("{} model given flag-augmented input", model.architecture())));
    }
    input.validate()?;
    model.forward(&input.features()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::variables::{DISCHARGE, DRIVERS};
    use crate::models::layout::FeatureLayout;
    use crate::models::spec::ModelSpec;

    fn model() -> BaselineModel {
        let layout = FeatureLayout::new(DRIVERS.iter().map(|s| s.to_string()).collect(), vec![DISCHARGE.into()], true);
        let mut spec = ModelSpec::new(Architecture::Flag, 2);
        spec.hyperparameters.hidden_size = 8;
        BaselineModel::new(spec, layout).unwrap()
    }

    fn ramp(rows: usize, cols: usize, offset: f64) -> Tensor {
        Tensor::matrix(rows, cols, (0..rows * cols).map(|i| (i as f64 * 0.37 + offset).sin()).collect()).unwrap()
    }

    #[test]
    fn all_available_is_an_ordinary_lstm() {
        let m = model();
        let (base, q) = (ramp(8, 6, 0.0), ramp(8, 1, 1.0));
        let input = FlagAugmentedInput::available(base.clone(), q.clone()).unwrap();
        let mut direct = Vec::new();
        for t in 0..8 {
            direct.extend_from_slice(base.row(t));
            direct.extend_from_slice(q.row(t));
            direct.push(1.0);
        }
        let direct = m.forward(&Tensor::matrix(8, 8, direct).unwrap()).unwrap();
        assert_eq!(flag_forward(&m, &input).unwrap(), direct);
    }

    #[test]
    fn masked_values_do_not_reach_the_model() {
        let m = model();
        let base = ramp(8, 6, 0.0);
        let a = FlagAugmentedInput::masked(base.clone(), &ramp(8, 1, 2.0)).unwrap();
        let b = FlagAugmentedInput::masked(base, &ramp(8, 1, -5.0)).unwrap();
        assert_eq!(flag_forward(&m, &a).unwrap(), flag_forward(&m, &b).unwrap());
    }

    #[test]
    fn inconsistent_flag_is_rejected() {
        let m = model();
        let input = FlagAugmentedInput::new(ramp(4, 6, 0.0), Tensor::full(&[4, 1], 0.5), Tensor::zeros(&[4, 1])).unwrap();
        assert!(matches!(flag_forward(&m, &input), Err(Error::Data(_))));
    }
}
