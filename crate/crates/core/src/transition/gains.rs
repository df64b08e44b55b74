use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::controller::GainConfig;
use crate::types::TransitionType;

fn default_blend_min() -> f64 {
    0.002
}

fn default_blend_back() -> f64 {
    0.1
}

fn default_k_sigma() -> f64 {
    2.0
}

fn default_retime_duration() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionConfig {
    /// Stiffness used while approaching an anticipated impact. Defaults to
    /// half of `kp_free`; may lie below the normal adaptive bounds.
    #[serde(default)]
    pub kp_low: Option<Vector3<f64>>,
    /// Lower bound on the blend-in window (s).
    #[serde(default = "default_blend_min")]
    pub min_blend_window: f64,
    /// Blend window back to the base controller after the contact (s).
    #[serde(default = "default_blend_back")]
    pub blend_back_window: f64,
    /// Ellipsoid cut used to build anticipated regions.
    #[serde(default = "default_k_sigma")]
    pub k_sigma: f64,
    /// Duration of the speed transition into an impact region (s).
    #[serde(default = "default_retime_duration")]
    pub retime_duration: f64,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        Self {
            kp_low: None,
            min_blend_window: default_blend_min(),
            blend_back_window: default_blend_back(),
            k_sigma: default_k_sigma(),
            retime_duration: default_retime_duration(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum VelocityPolicy {
    /// Follow the original plan speed.
    KeepPlan,
    /// Slow down to the learned approach speed before the region.
    Approach { speed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionGains {
    pub kp: Vector3<f64>,
    pub kd: Vector3<f64>,
    pub velocity: VelocityPolicy,
}

/// Gains and speed policy of the transition-phase controller.
///
/// Impacts get a compliant controller and the contact's current approach
/// speed; impact-less changes keep the plan speed at maximum stiffness so the
/// new mode can be identified from steady measurements.
pub fn transition_gains(
    kind: TransitionType,
    gains: &GainConfig,
    cfg: &TransitionConfig,
    approach_speed: f64,
) -> TransitionGains {
    let kp = match kind {
        TransitionType::Impact => cfg.kp_low.unwrap_or(gains.kp_free / 2.0),
        TransitionType::ImpactLess => gains.kp_max,
    };
    let velocity = match kind {
        TransitionType::Impact => VelocityPolicy::Approach {
            speed: approach_speed,
        },
        TransitionType::ImpactLess => VelocityPolicy::KeepPlan,
    };
    TransitionGains {
        kp,
        kd: gains.damping_rule.damping(&kp),
        velocity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{DampingRule, ForceGains};

    fn gains() -> GainConfig {
        GainConfig {
            kp_free: Vector3::repeat(200.0),
            kp_max: Vector3::new(2000.0, 2500.0, 3000.0),
            logistic_rate: 10.0,
            logistic_midpoint: 0.5,
            force_gain: ForceGains::default(),
            damping_rule: DampingRule::QuarterRoot,
            slew_limit: None,
        }
    }

    #[test]
    fn impact_less_uses_kp_max() {
        let g = gains();
        let t = transition_gains(
            TransitionType::ImpactLess,
            &g,
            &TransitionConfig::default(),
            0.05,
        );
        assert_eq!(t.kp, g.kp_max);
        assert_eq!(t.velocity, VelocityPolicy::KeepPlan);
    }

    #[test]
    fn impact_uses_low_stiffness_and_approach_speed() {
        let g = gains();
        let t = transition_gains(
            TransitionType::Impact,
            &g,
            &TransitionConfig::default(),
            0.07,
        );
        assert_eq!(t.kp, Vector3::repeat(100.0));
        assert_eq!(t.velocity, VelocityPolicy::Approach { speed: 0.07 });
        let cfg = TransitionConfig {
            kp_low: Some(g.kp_free),
            ..TransitionConfig::default()
        };
        let t = transition_gains(TransitionType::Impact, &g, &cfg, 0.07);
        assert_eq!(t.kp, g.kp_free);
    }
}
