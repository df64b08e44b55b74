use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::types::{RobotState, TransitionType};

/// A contact change detected between two consecutive states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactObservation {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub peak_force: f64,
    pub kind: TransitionType,
    /// Wall index for impacts, destination region index for boundary crossings.
    pub source: Option<usize>,
}

const BISECTION_STEPS: usize = 40;

/// Detect the start of a wall penetration or a friction-boundary crossing
/// between `prev` and `next`.
///
/// Impacts report the effector position at detection. Boundary crossings are
/// only reported while the effector is in wall contact and are located on the
/// segment `prev → next` by bisection.
pub fn contact_event(
    env: &Environment,
    prev: &RobotState,
    next: &RobotState,
) -> Option<ContactObservation> {
    let walls = &env.spec().walls;
    for (i, w) in walls.iter().enumerate() {
        if w.penetration(&prev.position) <= 0.0 && w.penetration(&next.position) > 0.0 {
            let depth = w.penetration(&next.position);
            let rate = -next.linear_velocity.dot(&w.normal);
            let peak = (w.stiffness * depth + w.damping * rate).max(0.0);
            return Some(ContactObservation {
                position: next.position,
                normal: w.normal,
                peak_force: peak,
                kind: TransitionType::Impact,
                source: Some(i),
            });
        }
    }

    let in_contact = walls.iter().any(|w| w.penetration(&next.position) > 0.0);
    if !in_contact {
        return None;
    }
    let from = env.region_index(&prev.position);
    let to = env.region_index(&next.position);
    if from == to {
        return None;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let at = |s: f64| prev.position + (next.position - prev.position) * s;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if env.region_index(&at(mid)) == from {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let travel = next.position - prev.position;
    let normal = if travel.norm() > 0.0 {
        travel.normalize()
    } else {
        Vector3::zeros()
    };
    Some(ContactObservation {
        position: at(hi),
        normal,
        peak_force: 0.0,
        kind: TransitionType::ImpactLess,
        source: to,
    })
}
