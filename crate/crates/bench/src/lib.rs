//! Scenario runner, metrics and report tooling for the `avic-core` stack.
//!
//! A [`Scenario`] file describes an environment, a plan, controller settings
//! and a trial count. [`run_scenario`] executes the trials in order, carrying
//! learned models and contact estimates between them, and returns per-tick
//! logs together with [`TrialReport`]s computed from those logs.

pub mod compare;
pub mod export;
pub mod log;
pub mod metrics;
pub mod runner;
pub mod scenario;

use std::path::PathBuf;

pub use metrics::TrialReport;
pub use runner::{run_scenario, RunOptions, RunResult, TrialOutcome};
pub use scenario::{ControllerKind, ModelPolicy, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("pretraining failed: {0}")]
    Pretrain(String),
    #[error("tick log: {0}")]
    Log(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Serde(String),
}
