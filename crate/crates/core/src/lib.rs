//! Adaptive control stack for changing-contact manipulation.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`] is a deterministic point-effector plant with springs, viscous
//!   media, penalty walls and piecewise friction.
//! * [`forward_model`] learns one-step interaction-wrench predictions with an
//!   incremental Gaussian mixture and Gaussian mixture regression.
//! * [`controller`] is the hybrid force/impedance law whose stiffness is
//!   scheduled by the forward model's prediction error.
//! * [`mode`] detects contact changes and clusters the post-change regime
//!   into contact modes, each with its own forward model.
//! * [`anticipation`] keeps Kalman beliefs over contact positions and learns
//!   approach velocities for a desired impact force.
//! * [`transition`] selects transition-phase gains, blends controllers and
//!   retimes plans with a smooth velocity profile.
//! * [`plan`] holds the time-indexed task-space motion plan.

pub mod anticipation;
pub mod controller;
pub mod forward_model;
pub mod mode;
pub mod plan;
pub mod sim;
pub mod transition;
pub mod types;

pub use types::{RobotState, TransitionType, Wrench};
