use serde::{Deserialize, Serialize};

/// Smooth step weight on `τ ∈ [0, 1]`: `e^{-1/τ} / (e^{-1/τ} + e^{-1/(1-τ)})`.
///
/// Evaluated as `1 / (1 + e^{1/τ − 1/(1−τ)})`, which saturates cleanly to 0
/// and 1 near the ends instead of forming `0/0`.
pub fn bump_weight(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / tau - 1.0 / (1.0 - tau)).exp())
    }
}

/// Speed at normalised time `tau` of a C∞ transition from `v1` to `v2`.
pub fn velocity_profile(v1: f64, v2: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        v1
    } else if tau >= 1.0 {
        v2
    } else {
        v1 + (v2 - v1) * bump_weight(tau)
    }
}

/// Transition from `v1` at `t1` to `v2` at `t2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfileParams {
    pub v1: f64,
    pub v2: f64,
    pub t1: f64,
    pub t2: f64,
}

impl VelocityProfileParams {
    pub fn new(v1: f64, v2: f64, t1: f64, t2: f64) -> Option<Self> {
        (t2 > t1 && v1 >= 0.0 && v2 >= 0.0).then_some(Self { v1, v2, t1, t2 })
    }

    pub fn tau(&self, t: f64) -> f64 {
        (t - self.t1) / (self.t2 - self.t1)
    }

    pub fn velocity_at(&self, t: f64) -> f64 {
        velocity_profile(self.v1, self.v2, self.tau(t))
    }

    /// Distance covered over `[t1, t2]`.
    pub fn transition_distance(&self) -> f64 {
        0.5 * (self.v1 + self.v2) * (self.t2 - self.t1)
    }
}
