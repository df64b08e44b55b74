use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::plan::PlanSample;
use crate::types::Wrench;

/// Load-normalized friction feature `‖F‖/R`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ModeFeature {
    pub value: f64,
}

impl ModeFeature {
    /// `normal` is clamped to at least `floor` before dividing.
    pub fn new(friction_mag: f64, normal: f64, floor: f64) -> Self {
        Self {
            value: friction_mag.abs() / normal.abs().max(floor),
        }
    }
}

/// Split a measured wrench into the part on the force-controlled axes and
/// the remainder.
pub fn split_force_axes(w: &Wrench, force_axes: &[bool; 3]) -> (Vector3<f64>, Wrench) {
    let mut normal = Vector3::zeros();
    let mut rest = *w;
    for i in 0..3 {
        if force_axes[i] {
            normal[i] = w.force[i];
            rest.force[i] = 0.0;
        }
    }
    (normal, rest)
}

/// The interaction wrench fed to the forward model: the measured wrench
/// without its force-controlled components.
pub fn tangential_wrench(w: &Wrench, sample: &PlanSample) -> Wrench {
    split_force_axes(w, &sample.force_axes).1
}

/// Normal load `R`: the commanded force target on force-controlled axes, or
/// the measured force there when no target is set. Without force axes the
/// load is `nominal`.
pub fn normal_load(w: &Wrench, sample: &PlanSample, nominal: f64) -> f64 {
    if !sample.force_axes.iter().any(|&a| a) {
        return nominal;
    }
    let mut target = Vector3::zeros();
    for i in 0..3 {
        if sample.force_axes[i] {
            target[i] = sample.force_target[i];
        }
    }
    let t = target.norm();
    if t > 0.0 {
        t
    } else {
        split_force_axes(w, &sample.force_axes).0.norm()
    }
}

/// Feature of one tick.
pub fn feature_of(w: &Wrench, sample: &PlanSample, nominal: f64, floor: f64) -> ModeFeature {
    let tangential = tangential_wrench(w, sample).force.norm();
    ModeFeature::new(tangential, normal_load(w, sample, nominal), floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sliding(target: f64) -> PlanSample {
        let mut s = PlanSample::motion(0.0, Vector3::zeros(), Vector3::x() * 0.05, 0);
        s.force_axes = [false, false, true];
        s.force_target = Vector3::new(0.0, 0.0, target);
        s
    }

    #[test]
    fn feature_is_friction_coefficient() {
        let w = Wrench::from_force(Vector3::new(2.0, 0.0, 10.0));
        let f = feature_of(&w, &sliding(10.0), 1.0, 1e-3);
        assert!((f.value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn invariant_to_load_scaling() {
        let a = feature_of(
            &Wrench::from_force(Vector3::new(1.0, 1.5, 5.0)),
            &sliding(5.0),
            1.0,
            1e-3,
        );
        let b = feature_of(
            &Wrench::from_force(Vector3::new(2.0, 3.0, 10.0)),
            &sliding(10.0),
            1.0,
            1e-3,
        );
        assert!((a.value - b.value).abs() < 1e-15);
    }

    #[test]
    fn direction_free() {
        let a = feature_of(
            &Wrench::from_force(Vector3::new(3.0, 0.0, 10.0)),
            &sliding(10.0),
            1.0,
            1e-3,
        );
        let b = feature_of(
            &Wrench::from_force(Vector3::new(0.0, -3.0, 10.0)),
            &sliding(10.0),
            1.0,
            1e-3,
        );
        assert_eq!(a, b);
    }

    #[test]
    fn measured_load_without_target_and_floor() {
        let w = Wrench::from_force(Vector3::new(1.0, 0.0, 4.0));
        assert_eq!(feature_of(&w, &sliding(0.0), 1.0, 1e-3).value, 0.25);
        let w = Wrench::from_force(Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(feature_of(&w, &sliding(0.0), 1.0, 0.5).value, 2.0);
        let free = PlanSample::motion(0.0, Vector3::zeros(), Vector3::zeros(), 0);
        assert_eq!(feature_of(&w, &free, 2.0, 1e-3).value, 0.5);
    }
}
