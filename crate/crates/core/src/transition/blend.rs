use serde::{Deserialize, Serialize};

use crate::types::Wrench;

/// `(1 − α) u1 + α u2` with `α = clamp(t / T, 0, 1)`.
///
/// The endpoints are returned exactly rather than through the convex sum.
pub fn blend(u1: &Wrench, u2: &Wrench, t: f64, window: f64) -> Wrench {
    let alpha = if window > 0.0 {
        (t / window).clamp(0.0, 1.0)
    } else {
        1.0
    };
    if alpha <= 0.0 {
        *u1
    } else if alpha >= 1.0 {
        *u2
    } else {
        *u1 * (1.0 - alpha) + *u2 * alpha
    }
}

/// Which controller pair a blend moves between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendDirection {
    IntoTransition,
    BackToBase,
}

/// An active blend started at `start_time` lasting `window` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendSchedule {
    pub start_time: f64,
    pub window: f64,
    pub direction: BlendDirection,
}

impl BlendSchedule {
    pub fn new(start_time: f64, window: f64, direction: BlendDirection) -> Option<Self> {
        (window > 0.0).then_some(Self {
            start_time,
            window,
            direction,
        })
    }

    pub fn alpha(&self, now: f64) -> f64 {
        ((now - self.start_time) / self.window).clamp(0.0, 1.0)
    }

    pub fn finished(&self, now: f64) -> bool {
        now - self.start_time >= self.window
    }

    /// Blend `from → to` at `now`.
    pub fn apply(&self, from: &Wrench, to: &Wrench, now: f64) -> Wrench {
        blend(from, to, now - self.start_time, self.window)
    }
}
