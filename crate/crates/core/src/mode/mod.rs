//! Contact-mode detection, batch classification and per-mode model routing.

mod cluster;
mod detect;
mod feature;
mod manager;
mod registry;

pub use cluster::ClusterSummary;
pub use detect::{force_jump, ChangeDetector, DetectorConfig, Trigger};
pub use feature::{feature_of, normal_load, split_force_axes, tangential_wrench, ModeFeature};
pub use manager::{
    high_stiffness_dwell, ModeConfig, ModeEvent, ModeEventKind, ModeManager, ModeStep, PhaseKind,
};
pub use registry::{classify_batch, Classification, Mode, ModeRegistry};
