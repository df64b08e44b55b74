//! Contact-position beliefs, regions of anticipated mode transition and
//! approach-speed learning for impacts.

mod impact;
mod kalman;
mod region;

pub use impact::{impact_force, ImpactConfig, ImpactModel};
pub use kalman::{nearest_estimate, ContactEstimate};
pub use region::{region_of, region_on_segment, TransitionRegion};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnticipationError {
    #[error("{what} is not symmetric positive definite")]
    NotSpd { what: &'static str },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}
