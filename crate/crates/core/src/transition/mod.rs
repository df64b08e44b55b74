//! Transition-phase control: gain selection, controller blending and smooth
//! velocity retiming around anticipated contact changes.

mod blend;
mod gains;
mod profile;
mod retime;

pub use blend::{blend, BlendDirection, BlendSchedule};
pub use gains::{transition_gains, TransitionConfig, TransitionGains, VelocityPolicy};
pub use profile::{bump_weight, velocity_profile, VelocityProfileParams};
pub use retime::{retime_plan, RetimeOutcome, RetimeParams};
