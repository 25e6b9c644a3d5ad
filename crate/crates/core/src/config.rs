//! Pipeline-level configuration.
//!
//! One JSON config drives every stage; each stage derives its own seed from
//! the root seed by stage-name hashing (see [`crate::rng::stage_seed`]), so
//! any stage can be re-run in isolation and reproduce its artifacts. The
//! whole config is echoed into JSON reports for provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::LayoutKind;
use crate::eval::EvalConfig;
use crate::mining::MiningConfig;
use crate::training::LossConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Input/output locations; all optional, CLI flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelinePaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries_manifest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gallery_manifest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layouts_manifest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

/// Root configuration consolidating the pipeline constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub layout_kind: LayoutKind,
    /// Strict lower bound on layout window proportion (e.g. 0.2 for ">20%").
    pub window_threshold: f64,
    pub mining: MiningConfig,
    pub loss: LossConfig,
    pub eval: EvalConfig,
    #[serde(default)]
    pub paths: PipelinePaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            layout_kind: LayoutKind::Real,
            window_threshold: 0.2,
            mining: MiningConfig::default(),
            loss: LossConfig::default(),
            eval: EvalConfig::default(),
            paths: PipelinePaths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..1.0).contains(&self.window_threshold) {
            return Err(ConfigError::Invalid(
                "window_threshold must be in [0, 1)".into(),
            ));
        }
        let radii = [self.mining.positive_radius_m, self.mining.negative_min_distance_m];
        if radii.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(ConfigError::Invalid("mining radii must be > 0".into()));
        }
        if self.mining.num_negatives == 0 || self.mining.pool_size < self.mining.num_negatives {
            return Err(ConfigError::Invalid(
                "pool_size must be >= num_negatives >= 1".into(),
            ));
        }
        self.eval
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let mut config = PipelineConfig::default();
        config.seed = 1234;
        config.window_threshold = 0.3;
        config.loss.epochs = 7;
        config.paths.out_dir = Some("out".into());
        config.save(&path).unwrap();
        assert_eq!(PipelineConfig::load(&path).unwrap(), config);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut config = PipelineConfig::default();
        config.window_threshold = 1.0;
        assert!(config.validate().is_err());

        let mut config = PipelineConfig::default();
        config.mining.pool_size = 5;
        config.mining.num_negatives = 10;
        assert!(config.validate().is_err());

        assert!(PipelineConfig::default().validate().is_ok());
    }
}
