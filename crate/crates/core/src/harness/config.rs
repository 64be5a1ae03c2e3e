use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::planner::AgentConfig;

fn default_true() -> bool {
    true
}

/// One seeded experiment: a scenario, a round budget and agent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: PathBuf,
    /// Agent rounds after the bootstrap phase.
    pub rounds: u64,
    /// Master seed; the scenario's seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Also run the do-nothing comparator.
    #[serde(default = "default_true")]
    pub baseline: bool,
    #[serde(default)]
    pub agent: AgentConfig,
}

impl ExperimentConfig {
    pub fn new(scenario: impl Into<PathBuf>, rounds: u64, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            scenario: scenario.into(),
            rounds,
            seed: None,
            out: out.into(),
            baseline: true,
            agent: AgentConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative scenario paths are taken from the config file's directory.
        if cfg.scenario.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.scenario = dir.join(&cfg.scenario);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.rounds == 0 {
            return Err(HarnessError::Config("rounds must be at least 1".into()));
        }
        self.agent.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::new("s.toml", 20, "out");
        cfg.seed = Some(7);
        cfg.agent.window = 0;
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn zero_rounds_and_bad_hyperparameters_are_rejected() {
        assert!(ExperimentConfig::new("s", 0, "o").validate().is_err());
        let mut cfg = ExperimentConfig::new("s", 1, "o");
        cfg.agent.climb.ess = -1.0;
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    }
}
