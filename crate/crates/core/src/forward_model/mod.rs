//! Incremental Gaussian-mixture forward model over `[S_{t-1}, D_t]` points.
//!
//! `S` holds the previous tick's speed and wrench magnitudes, `D` the current
//! wrench magnitudes. Working with magnitudes keeps the model independent of
//! the direction of motion; [`direction_recovery`] maps a prediction back onto
//! the motion axis.

mod batch;
mod features;
mod mixture;

pub use batch::{fit_batch, BatchFitConfig, BatchFitReport};
pub use features::{
    direction_recovery, prediction_error, ErrorFilter, FeatureState, InteractionEffect, JointPoint,
};
pub use mixture::{
    Component, Conditional, IgmmConfig, Mat6, MixtureModel, Prediction, Vec6, JOINT_DIM,
    MODEL_FORMAT_VERSION, STATE_DIM,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model is frozen (batch-fitted baseline) and rejects updates")]
    Frozen,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("batch fit needs at least one point")]
    NoData,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("serialization: {0}")]
    Serde(String),
}
