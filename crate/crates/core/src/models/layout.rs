use serde::{Deserialize, Serialize};

use super::spec::Architecture;
use crate::data::variables::{flag_name, DISCHARGE, UPSTREAM_DISCHARGE};
use crate::error::{Error, Result};

/// Ordered input variables of a model.
///
/// The feature matrix is laid out as `shared ++ extras ++ flags(extras)`,
/// where `shared` holds the dynamic drivers followed by the static attributes
/// broadcast over time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub shared: Vec<String>,
    pub extras: Vec<String>,
    pub flagged: bool,
}

/// Variables that exist only at some catchments and therefore can never be
/// shared inputs.
pub fn is_catchment_specific(name: &str) -> bool {
    name == DISCHARGE || name == UPSTREAM_DISCHARGE
}

impl FeatureLayout {
    pub fn new(shared: Vec<String>, extras: Vec<String>, flagged: bool) -> Self {
        FeatureLayout { shared, extras, flagged }
    }

    pub fn width(&self) -> usize {
        self.shared.len() + self.extras.len() * if self.flagged { 2 } else { 1 }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.shared.clone();
        names.extend(self.extras.iter().cloned());
        if self.flagged {
            names.extend(self.extras.iter().map(|e| flag_name(e)));
        }
        names
    }

    /// Enforces which variables each architecture may consume.
    pub fn check(&self, arch: Architecture) -> Result<()> {
        if self.shared.is_empty() {
            return Err(Error::Config("a model needs at least one shared variable".into()));
        }
        if let Some(v) = self.shared.iter().find(|v| is_catchment_specific(v)) {
            return Err(Error::Config(format!("{v} is catchment-specific and cannot be a shared input")));
        }
        let discharge_only = self.extras.len() == 1 && self.extras[0] == DISCHARGE;
        let ok = match arch {
            Architecture::MultiCatchmentNoQ => self.extras.is_empty() && !self.flagged,
            Architecture::MultiCatchmentWithQ => discharge_only && !self.flagged,
            Architecture::SingleCatchment => !self.flagged,
            Architecture::Flag => self.flagged && !self.extras.is_empty(),
            Architecture::Hydra => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{arch} cannot consume the variable set {:?}", self.feature_names())))
        }
    }
}
