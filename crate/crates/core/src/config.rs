//! Model configuration files in JSON or TOML.
//!
//! ```json
//! {
//!   "lambda0": 1.0,
//!   "lambda_atoms": [[0.5, 1.0]],
//!   "mu_atoms": [[0.4, 0.2], [-0.3, 0.1]],
//!   "nu_atoms": [],
//!   "theta_a": 0.3,
//!   "theta_A": 0.2,
//!   "selection": { "kappa": 2, "beta": [1.0], "p": [[0.0, 1.0, 1.0]] }
//! }
//! ```
//!
//! Every key is optional and defaults to zero (no selection when `selection`
//! is absent). Unknown keys are rejected with their path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::measures::ModelParams;
use crate::selection::SelectionKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Toml,
}

impl Format {
    /// `.toml` files are TOML, everything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("toml") => Format::Toml,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Invalid(#[from] Error),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub kappa: usize,
    pub beta: Vec<f64>,
    pub p: Vec<Vec<f64>>,
}

/// On-disk form of [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub lambda0: f64,
    #[serde(default)]
    pub lambda_atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub mu_atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub nu_atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub theta_a: f64,
    #[serde(default, rename = "theta_A")]
    pub theta_upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionConfig>,
}

impl ModelConfig {
    pub fn parse(text: &str, format: Format) -> Result<Self, ConfigError> {
        match format {
            Format::Json => {
                let de = &mut serde_json::Deserializer::from_str(text);
                serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
                    path: e.path().to_string(),
                    message: e.into_inner().to_string(),
                })
            }
            Format::Toml => {
                let de = toml::de::Deserializer::parse(text).map_err(|e| ConfigError::Parse {
                    path: ".".into(),
                    message: e.to_string(),
                })?;
                serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
                    path: e.path().to_string(),
                    message: e.into_inner().to_string().trim_end().to_string(),
                })
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, Format::from_path(path))
    }

    pub fn to_model(&self) -> Result<ModelParams<f64>, ConfigError> {
        let mut b = ModelParams::builder()
            .lambda0(self.lambda0)
            .theta(self.theta_a, self.theta_upper);
        for &[r, w] in &self.lambda_atoms {
            b = b.lambda_atom(r, w);
        }
        for &[r, w] in &self.mu_atoms {
            b = b.mu_atom(r, w);
        }
        for &[r, w] in &self.nu_atoms {
            b = b.nu_atom(r, w);
        }
        if let Some(s) = &self.selection {
            b = b.selection(SelectionKernel::new(s.kappa, s.beta.clone(), s.p.clone())?);
        }
        Ok(b.build()?)
    }

    /// Config describing `model` after validation (atoms merged and sorted).
    pub fn from_model(model: &ModelParams<f64>) -> Self {
        let atoms = |m: &crate::measures::AtomicMeasure<f64>| {
            m.atoms().iter().map(|a| [a.location, a.weight]).collect()
        };
        let sel = model.selection();
        Self {
            lambda0: model.lambda0(),
            lambda_atoms: atoms(model.lambda_tail()),
            mu_atoms: atoms(model.mu()),
            nu_atoms: atoms(model.nu()),
            theta_a: model.theta_lower(),
            theta_upper: model.theta_upper(),
            selection: (!sel.is_neutral()).then(|| SelectionConfig {
                kappa: sel.kappa(),
                beta: sel.betas().to_vec(),
                p: sel.p_rows().to_vec(),
            }),
        }
    }
}

/// Reads and validates a model file.
pub fn load_model(path: &Path) -> Result<ModelParams<f64>, ConfigError> {
    ModelConfig::load(path)?.to_model()
}
