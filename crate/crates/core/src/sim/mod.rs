//! Fixed-timestep task-space simulator of a point end-effector.

mod environment;
mod events;
mod simulator;

pub use environment::{
    friction_force, Environment, EnvironmentSpec, FrictionContact, FrictionRegion, Porridge,
    Reaction, Spring, Wall,
};
pub use events::{contact_event, ContactObservation};
pub use simulator::{NoiseConfig, SimConfig, Simulator};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("non-finite applied wrench at tick {tick}")]
    NonFiniteInput { tick: u64 },
    #[error("divergence at tick {tick}: speed {speed:.3} m/s exceeds bound {bound:.3} m/s")]
    Diverged { tick: u64, speed: f64, bound: f64 },
}
