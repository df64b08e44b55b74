use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::types::{RobotState, Wrench};

/// Direction-free state features.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureState {
    pub lin_speed: f64,
    pub ang_speed: f64,
    pub force_mag: f64,
    pub torque_mag: f64,
}

impl FeatureState {
    /// Features of `state` using `interaction` as the sensed wrench.
    pub fn from_parts(state: &RobotState, interaction: &Wrench) -> Self {
        Self {
            lin_speed: state.linear_velocity.norm(),
            ang_speed: state.angular_velocity.norm(),
            force_mag: interaction.force.norm(),
            torque_mag: interaction.torque.norm(),
        }
    }

    pub fn as_vector(&self) -> SVector<f64, 4> {
        SVector::<f64, 4>::new(
            self.lin_speed,
            self.ang_speed,
            self.force_mag,
            self.torque_mag,
        )
    }
}

/// Interaction wrench magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InteractionEffect {
    pub force_mag: f64,
    pub torque_mag: f64,
}

impl InteractionEffect {
    pub fn from_wrench(w: &Wrench) -> Self {
        Self {
            force_mag: w.force.norm(),
            torque_mag: w.torque.norm(),
        }
    }
}

/// One training point `[S_{t-1}, D_t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub state: FeatureState,
    pub effect: InteractionEffect,
}

impl JointPoint {
    pub fn as_vector(&self) -> SVector<f64, 6> {
        let s = &self.state;
        let d = &self.effect;
        SVector::<f64, 6>::from([
            s.lin_speed,
            s.ang_speed,
            s.force_mag,
            s.torque_mag,
            d.force_mag,
            d.torque_mag,
        ])
    }
}

/// Prediction error ε over the magnitude channels; torque is multiplied by
/// `torque_scale` (N per N·m) before taking the Euclidean norm.
pub fn prediction_error(
    predicted: &InteractionEffect,
    measured: &InteractionEffect,
    torque_scale: f64,
) -> f64 {
    let df = predicted.force_mag - measured.force_mag;
    let dt = (predicted.torque_mag - measured.torque_mag) * torque_scale;
    df.hypot(dt)
}

/// Expected environment reaction for a predicted effect: force opposing the
/// motion direction with the predicted magnitude.
///
/// `velocity` is the raw linear velocity; below `dead_band` speed the result is
/// zero. Torque is recovered against `angular_velocity` the same way.
pub fn direction_recovery(
    effect: &InteractionEffect,
    velocity: &Vector3<f64>,
    angular_velocity: &Vector3<f64>,
    dead_band: f64,
) -> Wrench {
    let speed = velocity.norm();
    let force = if speed > dead_band && speed > 0.0 {
        -velocity / speed * effect.force_mag
    } else {
        Vector3::zeros()
    };
    let ang = angular_velocity.norm();
    let torque = if ang > dead_band && ang > 0.0 {
        -angular_velocity / ang * effect.torque_mag
    } else {
        Vector3::zeros()
    };
    Wrench { force, torque }
}

/// Exponential smoothing of ε: `e ← a·e_prev + (1 − a)·ε`. `a = 0` is
/// instantaneous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorFilter {
    pub smoothing: f64,
    value: Option<f64>,
}

impl ErrorFilter {
    pub fn new(smoothing: f64) -> Self {
        Self {
            smoothing: smoothing.clamp(0.0, 1.0),
            value: None,
        }
    }

    pub fn push(&mut self, eps: f64) -> f64 {
        let v = match self.value {
            None => eps,
            Some(prev) => self.smoothing * prev + (1.0 - self.smoothing) * eps,
        };
        self.value = Some(v);
        v
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn reset(&mut self) {
        self.value = None;
    }
}
