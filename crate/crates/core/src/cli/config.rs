//! Experiment records: a TOML file with `[model]`, `[window]`,
//! `[estimation]` and `[output]` sections. Every field has a default, so a
//! parsed record is complete; command-line flags override it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Metric;
use crate::gnmodel::{AlphaSpec, Tail, Variant};
use crate::mc::ExperimentSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    /// Subcommand the record was written for; informational.
    pub command: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub model: ModelConfig,
    pub window: WindowConfig,
    pub estimation: EstimationConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    /// Index of the single nonzero weight when `weights` is absent.
    pub k: usize,
    /// Multiplier applied to the weight vector.
    pub alpha: f64,
    /// Explicit head `α_1, ..., α_K`.
    pub weights: Option<Vec<f64>>,
    /// Geometric tail `coef · γ^i` beyond the head.
    pub tail_gamma: Option<f64>,
    pub tail_coef: f64,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 2,
            k: 1,
            alpha: 1.0,
            weights: None,
            tail_gamma: None,
            tail_coef: 1.0,
            variant: Variant::ReachUnion,
        }
    }
}

impl ModelConfig {
    /// The weight vector with the multiplier folded in.
    pub fn alpha_spec(&self) -> Result<AlphaSpec> {
        self.template()?.scaled(self.alpha)
    }

    /// The weight vector before the multiplier.
    pub fn template(&self) -> Result<AlphaSpec> {
        match &self.weights {
            Some(head) => {
                let tail = match self.tail_gamma {
                    Some(gamma) => Tail::Geometric {
                        coef: self.tail_coef,
                        gamma,
                    },
                    None => Tail::None,
                };
                AlphaSpec::new(head.clone(), tail)
            }
            None => AlphaSpec::gn_k(self.k, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Inner box side `L`.
    pub side: f64,
    pub density: f64,
    /// Buffer around the inner box; derived from the weight vector if absent.
    pub margin: Option<f64>,
    pub metric: Metric,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            side: 20.0,
            density: 1.0,
            margin: None,
            metric: Metric::EuclideanFree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub trials: u64,
    pub level: f64,
    pub axis: usize,
    pub target: f64,
    pub tol: f64,
    pub bracket: [f64; 2],
    /// Multipliers for `curve`.
    pub grid: Vec<f64>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            trials: 200,
            level: 0.95,
            axis: 0,
            target: 0.5,
            tol: 0.5,
            bracket: [1.0, 45.0],
            grid: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> std::result::Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Crossing experiment described by the record, with `alpha` as given
    /// (the multiplier already applied or not, at the caller's choice).
    pub fn experiment(&self, alpha: AlphaSpec) -> ExperimentSpec {
        ExperimentSpec {
            alpha,
            dim: self.model.dim,
            variant: self.model.variant,
            side: self.window.side,
            density: self.window.density,
            margin: self.window.margin,
            trials: self.estimation.trials,
            base_seed: self.seed,
            axis: self.estimation.axis,
            level: self.estimation.level,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_explicit_and_round_trip() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        let mut c = RunConfig::from_toml(
            "seed = 9\n[model]\nweights = [1.0, 0.5]\ntail_gamma = 0.3\n[window]\nside = 8.0\n",
        )
        .unwrap();
        c.output.path = Some("out.csv".into());
        c.window.margin = Some(2.5);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.window.density, 1.0);
        assert!(matches!(
            back.model.template().unwrap().tail(),
            Tail::Geometric { .. }
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[model]\ndimension = 2\n").is_err());
    }
}
