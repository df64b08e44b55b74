use log::debug;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ContactEstimate;
use crate::plan::MotionPlan;

/// Stretch of one plan segment lying inside the k-sigma ellipsoid of a
/// contact estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRegion {
    pub segment: usize,
    pub entry_arclength: f64,
    pub exit_arclength: f64,
    pub entry_point: Vector3<f64>,
    pub exit_point: Vector3<f64>,
    pub k_sigma: f64,
}

impl TransitionRegion {
    pub fn length(&self) -> f64 {
        self.exit_arclength - self.entry_arclength
    }

    pub fn contains_arclength(&self, s: f64) -> bool {
        s >= self.entry_arclength && s <= self.exit_arclength
    }
}

const TANGENT_TOL: f64 = 1e-12;

/// Intersection of segment `segment` with the k-sigma ellipsoid.
pub fn region_on_segment(
    estimate: &ContactEstimate,
    plan: &MotionPlan,
    segment: usize,
    k_sigma: f64,
) -> Option<TransitionRegion> {
    let seg = plan.segments.get(segment)?;
    let length = seg.length();
    if length <= 0.0 || !(k_sigma >= 0.0) {
        return None;
    }
    let precision = estimate.covariance.cholesky()?.inverse();
    let d = seg.direction();
    let o = seg.start - estimate.mean;
    // (o + s d)^T P^-1 (o + s d) = k^2
    let a = (d.transpose() * precision * d)[0];
    let b = 2.0 * (d.transpose() * precision * o)[0];
    let c = (o.transpose() * precision * o)[0] - k_sigma * k_sigma;
    if a <= 0.0 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    let scale = (b * b).max((4.0 * a * c).abs()).max(1.0);
    let (s0, s1) = if disc < -TANGENT_TOL * scale {
        return None;
    } else if disc <= TANGENT_TOL * scale {
        let s = -b / (2.0 * a);
        (s, s)
    } else {
        let r = disc.sqrt();
        // Stable quadratic roots.
        let q = -0.5 * (b + b.signum() * r);
        let (r1, r2) = if q != 0.0 {
            (q / a, c / q)
        } else {
            (-r / (2.0 * a), r / (2.0 * a))
        };
        (r1.min(r2), r1.max(r2))
    };
    if s1 < 0.0 || s0 > length {
        return None;
    }
    let entry = s0.max(0.0);
    let exit = s1.min(length);
    Some(TransitionRegion {
        segment,
        entry_arclength: entry,
        exit_arclength: exit,
        entry_point: seg.start + d * entry,
        exit_point: seg.start + d * exit,
        k_sigma,
    })
}

/// Region on the estimate's anchor segment, or failing that the first
/// segment whose path enters the ellipsoid.
pub fn region_of(
    estimate: &ContactEstimate,
    plan: &MotionPlan,
    k_sigma: f64,
) -> Option<TransitionRegion> {
    let found = region_on_segment(estimate, plan, estimate.plan_anchor, k_sigma).or_else(|| {
        (0..plan.segments.len()).find_map(|i| region_on_segment(estimate, plan, i, k_sigma))
    });
    if found.is_none() {
        debug!(
            "no transition region: plan misses the {k_sigma}-sigma ellipsoid around {:?}",
            estimate.mean.as_slice()
        );
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{PlanSpec, SegmentSpec};
    use crate::types::TransitionType;
    use nalgebra::Matrix3;

    fn line_plan() -> MotionPlan {
        let spec = PlanSpec {
            start: Vector3::zeros(),
            segments: vec![SegmentSpec {
                to: Vector3::new(1.0, 0.0, 0.0),
                speed: 0.1,
                force_axes: [false; 3],
                force_target: Vector3::zeros(),
                guarded: false,
                accel_time: 0.2,
                dwell: 0.0,
                schedule: None,
            }],
        };
        MotionPlan::build(&spec, 1e-3).unwrap()
    }

    fn est(sigma: f64) -> ContactEstimate {
        ContactEstimate::isotropic(
            Vector3::new(0.5, 0.0, 0.0),
            sigma,
            TransitionType::Impact,
            0,
        )
        .unwrap()
    }

    #[test]
    fn chord_through_centre() {
        let r = region_of(&est(0.1), &line_plan(), 2.0).unwrap();
        assert!((r.length() - 0.4).abs() < 1e-12);
        assert!((r.entry_arclength - 0.3).abs() < 1e-12);
        assert!(r.entry_arclength <= 0.5);
    }

    #[test]
    fn shrinks_with_covariance() {
        let e = est(0.1);
        let post = e
            .kf_update(&Vector3::new(0.5, 0.0, 0.0), &(Matrix3::identity() * 1e-3))
            .unwrap();
        let plan = line_plan();
        assert!(
            region_of(&post, &plan, 2.0).unwrap().length()
                < region_of(&e, &plan, 2.0).unwrap().length()
        );
    }

    #[test]
    fn zero_k_is_a_point() {
        let r = region_of(&est(0.1), &line_plan(), 0.0).unwrap();
        assert_eq!(r.length(), 0.0);
        assert!((r.entry_arclength - 0.5).abs() < 1e-12);
    }

    #[test]
    fn miss_returns_none() {
        let e =
            ContactEstimate::isotropic(Vector3::new(0.5, 1.0, 0.0), 0.1, TransitionType::Impact, 0)
                .unwrap();
        assert!(region_of(&e, &line_plan(), 2.0).is_none());
    }

    #[test]
    fn clipped_to_segment() {
        let e = ContactEstimate::isotropic(
            Vector3::new(0.95, 0.0, 0.0),
            0.1,
            TransitionType::Impact,
            0,
        )
        .unwrap();
        let r = region_of(&e, &line_plan(), 2.0).unwrap();
        assert!((r.exit_arclength - 1.0).abs() < 1e-12);
        assert!((r.entry_arclength - 0.75).abs() < 1e-12);
    }
}
