//! Experiment configuration files.

use std::path::PathBuf;

use coopoffload_core::simulator::TaskGrid;
use coopoffload_core::{Error, Result, Strategy, SyntheticConfig};
use serde::{Deserialize, Serialize};

/// Where the contact graph of an experiment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkSource {
    Synthetic(SyntheticConfig),
    File(PathBuf),
    Trace {
        path: PathBuf,
        rate: f64,
        #[serde(default = "half")]
        warmup_fraction: f64,
    },
}

fn half() -> f64 {
    0.5
}

fn one() -> u64 {
    1
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub results: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    /// Distributed-protocol events of every task, in task order.
    pub event_log: Option<PathBuf>,
}

/// One simulation experiment. `runs` repeats the task grid with fresh
/// sources and contact realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    pub tasks: TaskGrid,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "one")]
    pub runs: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub heuristic_shortcuts: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.count == 0 || self.tasks.sizes.is_empty() || self.tasks.deadlines.is_empty() {
            return Err(Error::Config("the task grid is empty".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies selected".into()));
        }
        if let NetworkSource::Synthetic(s) = &self.network {
            s.validate()?;
        }
        Ok(())
    }
}
