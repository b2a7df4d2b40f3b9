//! Experiment configuration: one JSON document covering every pipeline
//! stage. Every field has a default, so `{}` is a valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::TrainOptions;
use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::retrieval::RetrievalConfig;
use crate::selftrain::default_tau_grid;

/// Self-training stage knobs; the tau grid is swept and the best tau (by dev
/// F1) is used for the final test evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfTrainStage {
    pub tau_grid: Vec<f64>,
    pub max_iterations: Option<usize>,
}

impl Default for SelfTrainStage {
    fn default() -> Self {
        SelfTrainStage {
            tau_grid: default_tau_grid(),
            max_iterations: None,
        }
    }
}

/// Active-learning stage knobs; both strategies run with these settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActiveStage {
    pub n_runs: usize,
    pub step: usize,
    pub budget: Option<usize>,
    pub retrain_every: usize,
}

impl Default for ActiveStage {
    fn default() -> Self {
        ActiveStage {
            n_runs: 10,
            step: 1,
            budget: None,
            retrain_every: 1,
        }
    }
}

/// SMOTE stage knobs; the synthetic counts are matched to the self-training
/// sweep's added counts per tau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteStage {
    pub k: usize,
}

impl Default for SmoteStage {
    fn default() -> Self {
        SmoteStage { k: 5 }
    }
}

/// Full pipeline configuration.
///
/// Stage seeds are not configured here: every stage derives its seed from
/// `seed` via [`crate::harness::derive_seed`], so one number reproduces the
/// whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Train/dev/test fractions over hypotheses.
    pub split_fractions: (f64, f64, f64),
    /// Labeled corpus generator settings (its seed field is overridden).
    pub synth: SynthConfig,
    /// Unlabeled-pool corpus generator settings (seed likewise overridden).
    pub pool_synth: SynthConfig,
    pub features: FeatureConfig,
    pub train: TrainOptions,
    pub selftrain: SelfTrainStage,
    pub active: ActiveStage,
    pub smote: SmoteStage,
    pub retrieval: RetrievalConfig,
    pub significance_shuffles: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            out_dir: PathBuf::from("out"),
            split_fractions: (0.5, 0.25, 0.25),
            synth: SynthConfig::default(),
            pool_synth: SynthConfig {
                n_hypotheses: 40,
                ..SynthConfig::default()
            },
            features: FeatureConfig::default(),
            train: TrainOptions::default(),
            selftrain: SelfTrainStage::default(),
            active: ActiveStage::default(),
            smote: SmoteStage::default(),
            retrieval: RetrievalConfig::default(),
            significance_shuffles: 10_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let content =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&content)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_is_a_valid_config() {
        let config: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config, ExperimentConfig::default());
        assert_eq!(config.seed, 42);
        assert_eq!(config.selftrain.tau_grid.len(), 9);
    }

    #[test]
    fn partial_overrides_apply() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"seed": 7, "active": {"n_runs": 3}, "synth": {"n_hypotheses": 10}}"#,
        )
        .unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.active.n_runs, 3);
        assert_eq!(config.active.step, 1);
        assert_eq!(config.synth.n_hypotheses, 10);
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = ExperimentConfig::default();
        let json = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }
}
