//! Shared task-space value types.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Force (N) and torque (N·m) acting at the end-effector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_force(force: Vector3<f64>) -> Self {
        Self {
            force,
            torque: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.force
            .iter()
            .chain(self.torque.iter())
            .all(|v| v.is_finite())
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: self.force + rhs.force,
            torque: self.torque + rhs.torque,
        }
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: self.force - rhs.force,
            torque: self.torque - rhs.torque,
        }
    }
}

impl Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench {
            force: -self.force,
            torque: -self.torque,
        }
    }
}

impl Mul<f64> for Wrench {
    type Output = Wrench;
    fn mul(self, rhs: f64) -> Wrench {
        Wrench {
            force: self.force * rhs,
            torque: self.torque * rhs,
        }
    }
}

/// End-effector pose, twist and sensed wrench at one control tick.
///
/// `measured_wrench` follows the wrist force-torque sensor convention: it is
/// the wrench the effector exerts on its surroundings, i.e. the negated
/// environment reaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub time: f64,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub measured_wrench: Wrench,
}

impl RobotState {
    /// Effector at rest at `position`, identity orientation, time zero.
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            time: 0.0,
            position,
            orientation: UnitQuaternion::identity(),
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            measured_wrench: Wrench::zero(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.position.iter().all(|v| v.is_finite())
            && self.linear_velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
            && self.measured_wrench.is_finite()
    }
}

/// Kind of contact change guarded by an anticipated region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionType {
    /// A collision that removes a motion degree of freedom.
    Impact,
    /// A change of surface dynamics with no loss of freedom (e.g. friction).
    ImpactLess,
}
