use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five architectures under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    SingleCatchment,
    MultiCatchmentNoQ,
    MultiCatchmentWithQ,
    Flag,
    Hydra,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::SingleCatchment,
        Architecture::MultiCatchmentNoQ,
        Architecture::MultiCatchmentWithQ,
        Architecture::Flag,
        Architecture::Hydra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::SingleCatchment => "single_catchment",
            Architecture::MultiCatchmentNoQ => "multi_catchment_no_q",
            Architecture::MultiCatchmentWithQ => "multi_catchment_with_q",
            Architecture::Flag => "flag",
            Architecture::Hydra => "hydra",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadHyperparameters {
    pub hidden_size: usize,
    pub num_layers: usize,
}

/// Sizes, learning rate and dropout of one model. For Hydra the top-level
/// sizes describe the body and `head` describes every head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadHyperparameters>,
}

impl Hyperparameters {
    /// Default configuration per architecture.
    pub fn defaults(arch: Architecture) -> Self {
        match arch {
            Architecture::SingleCatchment => {
                Hyperparameters { hidden_size: 128, num_layers: 1, learning_rate: 1e-3, dropout: 0.0, head: None }
            }
            Architecture::MultiCatchmentNoQ | Architecture::MultiCatchmentWithQ | Architecture::Flag => {
                Hyperparameters { hidden_size: 128, num_layers: 2, learning_rate: 1e-3, dropout: 0.2, head: None }
            }
            Architecture::Hydra => Hyperparameters {
                hidden_size: 128,
                num_layers: 2,
                learning_rate: 1e-3,
                dropout: 0.0,
                head: Some(HeadHyperparameters { hidden_size: 32, num_layers: 1 }),
            },
        }
    }

    pub fn validate(&self, arch: Architecture) -> Result<()> {
        if self.hidden_size == 0 || self.num_layers == 0 {
            return Err(Error::Config("hidden size and layer count must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        match (arch, self.head) {
            (Architecture::Hydra, None) => Err(Error::Config("hydra needs head hyperparameters".into())),
            (Architecture::Hydra, Some(h)) if h.hidden_size == 0 || h.num_layers == 0 => {
                Err(Error::Config("head hidden size and layer count must be positive".into()))
            }
            (Architecture::Hydra, Some(_)) => Ok(()),
            (_, Some(_)) => Err(Error::Config(format!("{arch} takes no head hyperparameters"))),
            (_, None) => Ok(()),
        }
    }
}

/// Architecture, hyperparameters and seed of one trainable model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(architecture: Architecture, seed: u64) -> Self {
        ModelSpec { architecture, hyperparameters: Hyperparameters::defaults(architecture), seed }
    }
}

/// Candidate values per hyperparameter; the sweep trains the full product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterGrid {
    pub hidden_sizes: Vec<usize>,
    pub num_layers: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub dropouts: Vec<f64>,
    #[serde(default)]
    pub head_hidden_sizes: Vec<usize>,
    #[serde(default)]
    pub head_num_layers: Vec<usize>,
}

impl HyperparameterGrid {
    /// Default sweep grid per architecture.
    pub fn table(arch: Architecture) -> Self {
        match arch {
            Architecture::SingleCatchment => HyperparameterGrid {
                hidden_sizes: vec![16, 64, 128],
                num_layers: vec![1, 2, 3],
                learning_rates: vec![1e-3, 1e-5],
                dropouts: vec![0.0, 0.1, 0.4],
                head_hidden_sizes: vec![],
                head_num_layers: vec![],
            },
            Architecture::MultiCatchmentNoQ | Architecture::MultiCatchmentWithQ | Architecture::Flag => {
                HyperparameterGrid {
                    hidden_sizes: vec![64, 128, 256],
                    num_layers: vec![1, 2, 3],
                    learning_rates: vec![1e-3, 1e-5],
                    dropouts: vec![0.0, 0.2, 0.4],
                    head_hidden_sizes: vec![],
                    head_num_layers: vec![],
                }
            }
            Architecture::Hydra => HyperparameterGrid {
                hidden_sizes: vec![64, 128, 256],
                num_layers: vec![1, 2, 3],
                learning_rates: vec![1e-3, 1e-5],
                dropouts: vec![0.0, 0.2, 0.4],
                head_hidden_sizes: vec![16, 32, 64],
                head_num_layers: vec![1, 2],
            },
        }
    }

    /// A grid holding exactly one configuration.
    pub fn single(hp: Hyperparameters) -> Self {
        HyperparameterGrid {
            hidden_sizes: vec![hp.hidden_size],
            num_layers: vec![hp.num_layers],
            learning_rates: vec![hp.learning_rate],
            dropouts: vec![hp.dropout],
            head_hidden_sizes: hp.head.map(|h| vec![h.hidden_size]).unwrap_or_default(),
            head_num_layers: hp.head.map(|h| vec![h.num_layers]).unwrap_or_default(),
        }
    }

    pub fn len(&self) -> usize {
        let base = self.hidden_sizes.len() * self.num_layers.len() * self.learning_rates.len() * self.dropouts.len();
        if self.head_hidden_sizes.is_empty() && self.head_num_layers.is_empty() {
            base
        } else {
            base * self.head_hidden_sizes.len() * self.head_num_layers.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All combinations in a fixed nested order (hidden, layers, head hidden,
    /// head layers, learning rate, dropout).
    pub fn enumerate(&self) -> Vec<Hyperparameters> {
        let heads: Vec<Option<HeadHyperparameters>> =
            if self.head_hidden_sizes.is_empty() && self.head_num_layers.is_empty() {
                vec![None]
            } else {
                self.head_hidden_sizes
                    .iter()
                    .flat_map(|&h| self.head_num_layers.iter().map(move |&l| Some(HeadHyperparameters { hidden_size: h, num_layers: l })))
                    .collect()
            };
        let mut out = Vec::with_capacity(self.len());
        for &hidden_size in &self.hidden_sizes {
            for &num_layers in &self.num_layers {
                for &head in &heads {
                    for &learning_rate in &self.learning_rates {
                        for &dropout in &self.dropouts {
                            out.push(Hyperparameters { hidden_size, num_layers, learning_rate, dropout, head });
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_names_round_trip() {
        for a in Architecture::ALL {
            assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.name()));
        }
        assert!("bidirectional".parse::<Architecture>().is_err());
    }

    #[test]
    fn table_grid_sizes() {
        assert_eq!(HyperparameterGrid::table(Architecture::SingleCatchment).len(), 54);
        assert_eq!(HyperparameterGrid::table(Architecture::Flag).len(), 54);
        let hydra = HyperparameterGrid::table(Architecture::Hydra);
        assert_eq!(hydra.len(), 3 * 3 * 3 * 2 * 2 * 3);
        assert_eq!(hydra.enumerate().len(), hydra.len());
    }

    #[test]
    fn defaults_belong_to_their_grid() {
        for a in Architecture::ALL {
            let d = Hyperparameters::defaults(a);
            d.validate(a).unwrap();
            assert!(HyperparameterGrid::table(a).enumerate().contains(&d), "{a}");
        }
    }

    #[test]
    fn single_grid_enumerates_itself() {
        let hp = Hyperparameters::defaults(Architecture::Hydra);
        assert_eq!(HyperparameterGrid::single(hp).enumerate(), vec![hp]);
    }

    #[test]
    fn head_hyperparameters_only_for_hydra() {
        let mut hp = Hyperparameters::defaults(Architecture::Flag);
        hp.head = Some(HeadHyperparameters { hidden_size: 8, num_layers: 1 });
        assert!(hp.validate(Architecture::Flag).is_err());
        hp.head = None;
        assert!(hp.validate(Architecture::Hydra).is_err());
    }
}
