use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::AnticipationError;
use crate::types::TransitionType;

/// Gaussian belief over a stationary contact position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEstimate {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub transition_type: TransitionType,
    /// Plan segment this contact guards.
    pub plan_anchor: usize,
    /// Number of measurement updates absorbed.
    #[serde(default)]
    pub updates: usize,
}

fn is_spd(m: &Matrix3<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
        && (m - m.transpose()).abs().max() <= 1e-9 * m.abs().max().max(1e-300)
        && m.cholesky().is_some()
}

impl ContactEstimate {
    pub fn new(
        mean: Vector3<f64>,
        covariance: Matrix3<f64>,
        transition_type: TransitionType,
        plan_anchor: usize,
    ) -> Result<Self, AnticipationError> {
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(AnticipationError::NonFinite("mean"));
        }
        if !is_spd(&covariance) {
            return Err(AnticipationError::NotSpd { what: "covariance" });
        }
        Ok(Self {
            mean,
            covariance,
            transition_type,
            plan_anchor,
            updates: 0,
        })
    }

    /// Isotropic prior with standard deviation `sigma` per axis.
    pub fn isotropic(
        mean: Vector3<f64>,
        sigma: f64,
        transition_type: TransitionType,
        plan_anchor: usize,
    ) -> Result<Self, AnticipationError> {
        Self::new(
            mean,
            Matrix3::identity() * sigma * sigma,
            transition_type,
            plan_anchor,
        )
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }

    /// Time update for a stationary contact: the mean is kept and the
    /// covariance grows by `q`.
    pub fn kf_predict(&self, q: &Matrix3<f64>) -> Self {
        let mut out = self.clone();
        out.covariance += q;
        out.covariance = (out.covariance + out.covariance.transpose()) * 0.5;
        out
    }

    /// Measurement update with the observed contact position.
    pub fn kf_update(
        &self,
        observed: &Vector3<f64>,
        r: &Matrix3<f64>,
    ) -> Result<Self, AnticipationError> {
        if !observed.iter().all(|v| v.is_finite()) {
            return Err(AnticipationError::NonFinite("observation"));
        }
        if !is_spd(&self.covariance) {
            return Err(AnticipationError::NotSpd {
                what: "prior covariance",
            });
        }
        if !is_spd(r) {
            return Err(AnticipationError::NotSpd {
                what: "measurement noise",
            });
        }
        let p = self.covariance;
        let s = p + r;
        let s_inv = s
            .cholesky()
            .ok_or(AnticipationError::NotSpd {
                what: "innovation covariance",
            })?
            .inverse();
        let k = p * s_inv;
        let mean = self.mean + k * (observed - self.mean);
        let i_k = Matrix3::identity() - k;
        let cov = i_k * p * i_k.transpose() + k * r * k.transpose();
        let cov = (cov + cov.transpose()) * 0.5;
        if !is_spd(&cov) {
            return Err(AnticipationError::NotSpd {
                what: "posterior covariance",
            });
        }
        Ok(Self {
            mean,
            covariance: cov,
            transition_type: self.transition_type,
            plan_anchor: self.plan_anchor,
            updates: self.updates + 1,
        })
    }
}

/// Index of the estimate that should absorb an observation made on
/// `segment`: the same anchor if present, otherwise the nearest anchor with
/// ties broken by Euclidean distance to the mean.
pub fn nearest_estimate(
    estimates: &[ContactEstimate],
    segment: usize,
    position: &Vector3<f64>,
) -> Option<usize> {
    estimates
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let ka = (a.plan_anchor.abs_diff(segment), (a.mean - position).norm());
            let kb = (b.plan_anchor.abs_diff(segment), (b.mean - position).norm());
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior() -> ContactEstimate {
        ContactEstimate::isotropic(Vector3::repeat(0.12), 0.3, TransitionType::Impact, 0).unwrap()
    }

    #[test]
    fn predict_with_zero_noise_is_identity() {
        let e = prior();
        assert_eq!(e.kf_predict(&Matrix3::zeros()), e);
    }

    #[test]
    fn predict_adds_trace() {
        let e = prior();
        let q = Matrix3::identity() * 0.01;
        let p = e.kf_predict(&q);
        assert!((p.trace() - e.trace() - 0.03).abs() < 1e-15);
        assert!(p.kf_predict(&q).trace() > p.trace());
    }

    #[test]
    fn update_matches_scalar_closed_form() {
        let e = prior();
        let r = Matrix3::identity() * 1e-4;
        let post = e.kf_update(&Vector3::zeros(), &r).unwrap();
        let k = 0.09 / (0.09 + 1e-4);
        for i in 0..3 {
            assert!((post.mean[i] - 0.12 * (1.0 - k)).abs() < 1e-12);
            assert!((post.covariance[(i, i)] - (1.0 - k) * 0.09).abs() < 1e-12);
        }
        assert!(post.mean.norm() < 0.01 * 3f64.sqrt());
        assert!(post.covariance[(0, 0)].sqrt() < 0.05);
        assert!(post.trace() < e.trace());
        assert_eq!(post.updates, 1);
    }

    #[test]
    fn uninformative_measurement_keeps_prior() {
        let e = prior();
        let post = e
            .kf_update(&Vector3::zeros(), &(Matrix3::identity() * 1e12))
            .unwrap();
        assert!((post.mean - e.mean).norm() < 1e-12);
        assert!((post.covariance - e.covariance).norm() < 1e-12);
    }

    #[test]
    fn dogmatic_prior_ignores_measurement() {
        let e = ContactEstimate::isotropic(Vector3::repeat(0.12), 1e-9, TransitionType::Impact, 0)
            .unwrap();
        let post = e
            .kf_update(&Vector3::zeros(), &(Matrix3::identity() * 1e-4))
            .unwrap();
        assert!((post.mean - e.mean).norm() < 1e-10);
    }

    #[test]
    fn rejects_non_spd() {
        let mut bad = Matrix3::identity();
        bad[(0, 0)] = -1.0;
        assert!(ContactEstimate::new(Vector3::zeros(), bad, TransitionType::Impact, 0).is_err());
        let e = prior();
        assert_eq!(
            e.kf_update(&Vector3::zeros(), &bad),
            Err(AnticipationError::NotSpd {
                what: "measurement noise"
            })
        );
    }

    #[test]
    fn association_prefers_anchor() {
        let a =
            ContactEstimate::isotropic(Vector3::zeros(), 0.1, TransitionType::Impact, 1).unwrap();
        let b = ContactEstimate::isotropic(Vector3::x(), 0.1, TransitionType::Impact, 3).unwrap();
        let list = [a, b];
        assert_eq!(nearest_estimate(&list, 3, &Vector3::zeros()), Some(1));
        assert_eq!(nearest_estimate(&list, 1, &Vector3::x()), Some(0));
        assert_eq!(nearest_estimate(&[], 0, &Vector3::x()), None);
    }
}
