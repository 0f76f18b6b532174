//! Text serialization of calibrated nonlinearity parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::Nonlinearity;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ParamDocument<T> {
    /// Sequence length the parameters were calibrated for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub nonlinearity: Nonlinearity<T>,
}

impl<T: Scalar> ParamDocument<T> {
    pub fn new(nonlinearity: Nonlinearity<T>) -> Self {
        Self {
            n: None,
            nonlinearity,
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Document(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let doc: Self = toml::from_str(s).map_err(|e| Error::Document(e.to_string()))?;
        doc.nonlinearity.validate()?;
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}
