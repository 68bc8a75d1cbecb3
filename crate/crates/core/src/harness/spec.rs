//! Experiment specifications and their TOML form.
//!
//! A spec file is a flat TOML table. Unknown keys are rejected. Keys:
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `title` | string | derived from objective and dimension |
//! | `objective` | `sphere`, `rastrigin`, `ackley`, `quad-cubic` or `external` | required |
//! | `external_command` | string, required when `objective = "external"` | |
//! | `minimizer` | array of floats, required for `external` | known minimizer |
//! | `dimension` | integer >= 1 | required |
//! | `methods` | array of method names | required |
//! | `trials` | integer >= 1 | 100 |
//! | `seed` | integer | required |
//! | `budget` | integer >= 1 | required |
//! | `alpha0` | float > 0, temperature `alpha0 n^(2/(d+2))` | one of `alpha0`/`alpha` |
//! | `alpha` | float > 0, fixed temperature | |
//! | `q0_offset` | float, `q0` mean is `x* + q0_offset * 1_d` | required |
//! | `q0_variance` | float > 0 | required |
//! | `mixture_weight` | float in [0, 1] | 0 |
//! | `sigma2` | float > 0 | `1 / dimension` |
//! | `batch_size` | integer >= 1 (>= 2 for `isotropic_es`) | 300 |
//! | `projection_box` | `[lower, upper]` applied to every coordinate | none |
//! | `normalize_es_weights` | bool | true |
//! | `checkpoint_start` | integer >= 1 | 100 |
//! | `checkpoint_count` | integer >= 1 | 30 |
//! | `csv` | output path | required |
//! | `svg` | output path | required |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::distributions::IsotropicGaussian;
use crate::objectives::{external_objective, ExternalCommand, Objective};
use crate::optimizers::{geometric_checkpoints, AdaptiveConfig, BoxDomain, Method, StaticConfig, Temperature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub objective: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimizer: Option<Vec<f64>>,
    pub dimension: usize,
    pub methods: Vec<Method>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub q0_offset: f64,
    pub q0_variance: f64,
    #[serde(default)]
    pub mixture_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_box: Option<[f64; 2]>,
    #[serde(default = "default_true")]
    pub normalize_es_weights: bool,
    #[serde(default = "default_checkpoint_start")]
    pub checkpoint_start: usize,
    #[serde(default = "default_checkpoint_count")]
    pub checkpoint_count: usize,
    pub csv: PathBuf,
    pub svg: PathBuf,
}

fn default_trials() -> usize {
    100
}
fn default_batch() -> usize {
    300
}
fn default_true() -> bool {
    true
}
fn default_checkpoint_start() -> usize {
    100
}
fn default_checkpoint_count() -> usize {
    30
}

fn config_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| config_error(e.to_string().trim().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(msg) => config_error(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.dimension == 0 {
            return Err(config_error("dimension must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(config_error("method list is empty"));
        }
        if self.trials == 0 {
            return Err(config_error("trials must be at least 1"));
        }
        if self.budget == 0 {
            return Err(config_error("budget must be at least 1"));
        }
        match (self.alpha0, self.alpha) {
            (Some(a), None) | (None, Some(a)) if a > 0.0 && a.is_finite() => {}
            (Some(_), Some(_)) => return Err(config_error("give either alpha0 or alpha, not both")),
            (None, None) => return Err(config_error("one of alpha0 or alpha is required")),
            _ => return Err(config_error("temperature must be positive")),
        }
        if !(self.q0_variance > 0.0 && self.q0_variance.is_finite()) || !self.q0_offset.is_finite() {
            return Err(config_error("q0_variance must be positive and q0_offset finite"));
        }
        if !(0.0..=1.0).contains(&self.mixture_weight) {
            return Err(config_error("mixture_weight must lie in [0, 1]"));
        }
        if let Some(s) = self.sigma2 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(config_error("sigma2 must be positive"));
            }
        }
        if self.batch_size == 0 {
            return Err(config_error("batch_size must be at least 1"));
        }
        if self.batch_size < 2 && self.methods.contains(&Method::IsotropicEs) {
            return Err(config_error("isotropic_es needs batch_size >= 2"));
        }
        if let Some([lo, hi]) = self.projection_box {
            if !(lo <= hi) {
                return Err(config_error("projection_box lower bound exceeds upper bound"));
            }
        }
        if self.checkpoint_start == 0 || self.checkpoint_count == 0 {
            return Err(config_error("checkpoint_start and checkpoint_count must be positive"));
        }
        if let Some(m) = &self.minimizer {
            if m.len() != self.dimension {
                return Err(config_error(format!(
                    "minimizer has {} coordinates, dimension is {}",
                    m.len(),
                    self.dimension
                )));
            }
        }
        if self.objective == "external" {
            if self.external_command.is_none() {
                return Err(config_error("objective \"external\" needs external_command"));
            }
            if self.minimizer.is_none() {
                return Err(config_error("objective \"external\" needs minimizer to report errors"));
            }
        } else {
            if self.external_command.is_some() {
                return Err(config_error(
                    "external_command is only valid with objective \"external\"",
                ));
            }
            Objective::builtin(&self.objective, self.dimension).map_err(|e| config_error(e.to_string()))?;
        }
        Ok(())
    }

    pub fn title(&self) -> String {
        self.title
            .clone()
            .unwrap_or_else(|| format!("{} (d = {})", self.objective, self.dimension))
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        geometric_checkpoints(self.checkpoint_start, self.budget, self.checkpoint_count)
    }

    pub fn temperature(&self) -> Temperature {
        match (self.alpha0, self.alpha) {
            (Some(a0), _) => Temperature::Schedule(a0),
            (None, Some(a)) => Temperature::Fixed(a),
            (None, None) => unreachable!("validated"),
        }
    }

    /// A fresh objective with its own counter (and child process, for
    /// external objectives).
    pub fn build_objective(&self) -> Result<Objective, HarnessError> {
        let objective = if self.objective == "external" {
            let line = self.external_command.as_deref().unwrap_or_default();
            let command = ExternalCommand::parse(line).map_err(|e| config_error(e.to_string()))?;
            external_objective(command, self.dimension)?
        } else {
            Objective::builtin(&self.objective, self.dimension).map_err(|e| config_error(e.to_string()))?
        };
        Ok(match &self.minimizer {
            Some(m) => objective.with_minimizer(m.clone()),
            None => objective,
        })
    }

    fn minimizer_or_origin(&self) -> Vec<f64> {
        match &self.minimizer {
            Some(m) => m.clone(),
            None => Objective::builtin(&self.objective, self.dimension)
                .ok()
                .and_then(|o| o.known_minimizer().map(<[f64]>::to_vec))
                .unwrap_or_else(|| vec![0.0; self.dimension]),
        }
    }

    /// `N(x* + q0_offset * 1_d, q0_variance I_d)`.
    pub fn q0(&self) -> IsotropicGaussian {
        let mean = self.minimizer_or_origin().iter().map(|x| x + self.q0_offset).collect();
        IsotropicGaussian::new(mean, self.q0_variance)
    }

    pub fn static_config(&self, stream: u64) -> StaticConfig {
        StaticConfig {
            budget: self.budget,
            temperature: self.temperature(),
            q0: self.q0().into(),
            seed: self.seed,
            stream,
            checkpoints: Some(self.checkpoints()),
        }
    }

    pub fn adaptive_config(&self, stream: u64) -> Result<AdaptiveConfig, HarnessError> {
        let projection_box = match self.projection_box {
            Some([lo, hi]) => Some(BoxDomain::cube(lo, hi, self.dimension).map_err(|e| config_error(e.to_string()))?),
            None => None,
        };
        Ok(AdaptiveConfig {
            budget: self.budget,
            temperature: self.temperature(),
            q0: self.q0(),
            mixture_weight: self.mixture_weight,
            sigma2: self.sigma2.unwrap_or(1.0 / self.dimension as f64),
            batch_size: self.batch_size,
            projection_box,
            normalize_es_weights: self.normalize_es_weights,
            seed: self.seed,
            stream,
            checkpoints: Some(self.checkpoints()),
        })
    }
}
