//! Pipeline configuration: JSON file, `key=value` overrides and validation.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::anatomy::{AnatomyParams, AxesEstimate};
use crate::facet::{FacetParams, TargetWidth, DEFAULT_FALLOFF_RADIUS, DEFAULT_MAX_PASSES};
use crate::mesh::{Encoding, MeshFormat};
use crate::registration::{IcpParams, RegistrationMode, RegistrationParams};

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("override {0:?} must have the form key=value")]
    OverrideSyntax(String),

    #[error("unknown config key {0:?}")]
    UnknownKey(String),

    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Patient coordinate directions of the input meshes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxisConvention {
    pub lateral: [f64; 3],
    pub anterior: [f64; 3],
    pub longitudinal: [f64; 3],
}

impl Default for AxisConvention {
    fn default() -> Self {
        Self {
            lateral: [1.0, 0.0, 0.0],
            anterior: [0.0, 1.0, 0.0],
            longitudinal: [0.0, 0.0, 1.0],
        }
    }
}

impl AxisConvention {
    pub fn to_axes(&self) -> Result<AxesEstimate, ConfigError> {
        let v = |a: [f64; 3]| Vector3::new(a[0], a[1], a[2]);
        AxesEstimate::new(v(self.lateral), v(self.anterior), v(self.longitudinal))
            .map_err(|e| ConfigError::Invalid(format!("axes: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub mode: RegistrationMode,
    pub icp: IcpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FacetConfig {
    pub enabled: bool,
    pub target_width_mm: TargetWidth,
    pub falloff_radius_mm: f64,
    pub max_passes: usize,
}

impl Default for FacetConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            target_width_mm: TargetWidth::default(),
            falloff_radius_mm: DEFAULT_FALLOFF_RADIUS,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

impl FacetConfig {
    pub fn params(&self) -> FacetParams {
        FacetParams {
            target_width_mm: self.target_width_mm.clone(),
            falloff_radius_mm: self.falloff_radius_mm,
            max_passes: self.max_passes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: MeshFormat,
    pub encoding: Encoding,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub axes: AxisConvention,
    pub anatomy: AnatomyParams,
    pub registration: RegistrationConfig,
    pub facet: FacetConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `dotted.key=value`. The value is read as JSON when it parses,
    /// otherwise as a string. The key must already exist.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::OverrideSyntax(assignment.to_string()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::OverrideSyntax(assignment.to_string()));
        }
        let value: Value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        }
        *node = value;
        *self = serde_json::from_value(tree).map_err(|e| ConfigError::Parse {
            origin: format!("override {key}"),
            message: e.to_string(),
        })?;
        Ok(())
    }

    /// Checks every section against the preconditions of the module that
    /// consumes it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.axes.to_axes()?;
        self.anatomy
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("anatomy: {e}")))?;
        self.registration
            .icp
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("registration: {e}")))?;
        self.facet
            .params()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("facet: {e}")))?;
        Ok(())
    }

    pub fn registration_params(&self) -> Result<RegistrationParams, ConfigError> {
        Ok(RegistrationParams {
            mode: self.registration.mode,
            anatomy: self.anatomy,
            hint: self.axes.to_axes()?,
            icp: IcpParams {
                seed: self.seed,
                ..self.registration.icp
            },
        })
    }
}
