use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Which check flagged a contact change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Start of a run with no active mode.
    Initial,
    /// Sudden change in the sensed force magnitude.
    ForceJump,
    /// Sustained disagreement with the non-updating model of the active mode.
    ModelError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Ticks between the compared force magnitudes.
    pub jump_window: usize,
    /// Force-magnitude change (N) that counts as a jump.
    pub jump_threshold: f64,
    /// Prediction error (N) against the reference model.
    pub error_threshold: f64,
    /// Consecutive ticks above `error_threshold` needed.
    pub error_dwell: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            jump_window: 5,
            jump_threshold: 1.0,
            error_threshold: 1.0,
            error_dwell: 20,
        }
    }
}

/// Stateless jump check over a window of force magnitudes (oldest first).
/// Returns false for windows shorter than 2.
pub fn force_jump(window: &[f64], threshold: f64) -> bool {
    match (window.first(), window.last()) {
        (Some(a), Some(b)) if window.len() >= 2 => (b - a).abs() > threshold,
        _ => false,
    }
}

/// Streaming change detector. Ticks flagged as not `valid` (e.g. too slow
/// for a friction reading) clear the history.
#[derive(Debug, Clone)]
pub struct ChangeDetector {
    pub config: DetectorConfig,
    history: VecDeque<f64>,
    over: usize,
}

impl ChangeDetector {
    pub fn new(config: DetectorConfig) -> Self {
        Self {
            config,
            history: VecDeque::with_capacity(config.jump_window + 1),
            over: 0,
        }
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.over = 0;
    }

    /// Feed one tick. `reference_error` is the error against the frozen
    /// active-mode model, when one exists.
    pub fn push(
        &mut self,
        force_mag: f64,
        reference_error: Option<f64>,
        valid: bool,
    ) -> Option<Trigger> {
        if !valid {
            self.reset();
            return None;
        }
        self.history.push_back(force_mag);
        while self.history.len() > self.config.jump_window + 1 {
            self.history.pop_front();
        }
        let jumped = self.history.len() == self.config.jump_window + 1
            && force_jump(self.history.make_contiguous(), self.config.jump_threshold);
        match reference_error {
            Some(e) if e > self.config.error_threshold => self.over += 1,
            _ => self.over = 0,
        }
        if jumped {
            Some(Trigger::ForceJump)
        } else if self.config.error_dwell > 0 && self.over >= self.config.error_dwell {
            Some(Trigger::ModelError)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_force_never_triggers() {
        let mut d = ChangeDetector::new(DetectorConfig::default());
        for _ in 0..100 {
            assert_eq!(d.push(2.0, Some(0.01), true), None);
        }
        assert!(!force_jump(&[2.0, 2.0], 1.0));
        assert!(!force_jump(&[5.0], 1.0));
    }

    #[test]
    fn step_triggers_jump() {
        let mut d = ChangeDetector::new(DetectorConfig::default());
        for _ in 0..10 {
            d.push(2.0, None, true);
        }
        assert_eq!(d.push(5.0, None, true), Some(Trigger::ForceJump));
    }

    #[test]
    fn slow_decay_caught_by_model_error() {
        let cfg = DetectorConfig::default();
        let mut d = ChangeDetector::new(cfg);
        let mut fired = None;
        for k in 0..400 {
            let f = 5.0 - 3.0 * (k as f64 / 400.0);
            let err = 5.0 - f;
            if let Some(t) = d.push(f, Some(err), true) {
                fired = Some((k, t));
                break;
            }
        }
        let (k, t) = fired.unwrap();
        assert_eq!(t, Trigger::ModelError);
        assert!(k > 133);
    }

    #[test]
    fn invalid_ticks_clear_history() {
        let mut d = ChangeDetector::new(DetectorConfig::default());
        for _ in 0..10 {
            d.push(2.0, None, true);
        }
        assert_eq!(d.push(0.0, None, false), None);
        for _ in 0..5 {
            assert_eq!(d.push(5.0, None, true), None);
        }
    }
}
