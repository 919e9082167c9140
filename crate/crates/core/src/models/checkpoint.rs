use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::recurrent::Parameters;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Ordered parameter dump of one recurrent module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub parameters: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn capture(module: &impl Parameters) -> Self {
        let parameters = module
            .named_parameters()
            .into_iter()
            .map(|(name, t)| NamedTensor { name, shape: t.shape().to_vec(), values: t.values().to_vec() })
            .collect();
        Checkpoint { parameters }
    }

    /// Overwrites the module's parameters; names and shapes must match.
    pub fn restore(&self, module: &mut impl Parameters) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> =
            module.named_parameters().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        if expected.len() != self.parameters.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, module has {}",
                self.parameters.len(),
                expected.len()
            )));
        }
        for ((name, shape), saved) in expected.iter().zip(&self.parameters) {
            if *name != saved.name || *shape != saved.shape {
                return Err(Error::Config(format!(
                    "checkpoint tensor {} {:?} does not match module tensor {} {:?}",
                    saved.name, saved.shape, name, shape
                )));
            }
        }
        for (t, saved) in module.parameters_mut().into_iter().zip(&self.parameters) {
            t.values_mut().copy_from_slice(&saved.values);
        }
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor> {
        self.parameters.iter().find(|p| p.name == name).map(|p| Tensor::new(p.shape.clone(), p.values.clone()).expect("stored shape"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        for p in &ck.parameters {
            if p.shape.iter().product::<usize>() != p.values.len() {
                return Err(Error::Dimension(format!("checkpoint tensor {} has a mismatched shape", p.name)));
            }
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::variables::DRIVERS;
    use crate::models::{Architecture, BaselineModel, FeatureLayout, HydraModel, ModelSpec};

    #[test]
    fn round_trip_is_exact() {
        let layout = FeatureLayout::new(DRIVERS.iter().map(|s| s.to_string()).collect(), vec![], false);
        let mut spec = ModelSpec::new(Architecture::MultiCatchmentNoQ, 9);
        spec.hyperparameters.hidden_size = 6;
        let model = BaselineModel::new(spec, layout.clone()).unwrap();
        let json = Checkpoint::capture(&model).to_json().unwrap();
        spec.seed = 10;
        let mut other = BaselineModel::new(spec, layout).unwrap();
        assert_ne!(other.net, model.net);
        Checkpoint::from_json(&json).unwrap().restore(&mut other).unwrap();
        assert!(other.net.stack.layers == model.net.stack.layers);
        assert_eq!(other.net.proj.w.values(), model.net.proj.w.values());
    }

    #[test]
    fn names_are_stable() {
        let mut spec = ModelSpec::new(Architecture::Hydra, 1);
        spec.hyperparameters.hidden_size = 4;
        let m = HydraModel::new(spec, vec!["a".into(), "b".into()]).unwrap();
        let names: Vec<String> = Checkpoint::capture(&m.body).parameters.into_iter().map(|p| p.name).collect();
        assert_eq!(names[..3], ["body.layer0.W", "body.layer0.U", "body.layer0.b"]);
        let head: Vec<String> = Checkpoint::capture(&m.multi_head).parameters.into_iter().map(|p| p.name).collect();
        assert_eq!(head, ["head.layer0.W", "head.layer0.U", "head.layer0.b", "head.proj.W", "head.proj.b"]);
        assert!(Checkpoint::capture(&m.body).restore(&mut m.multi_head.clone()).is_err());
    }
}
