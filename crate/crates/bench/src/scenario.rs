//! Declarative scenario files.

use std::path::Path;

use avic_core::anticipation::ImpactConfig;
use avic_core::controller::GainConfig;
use avic_core::mode::ModeConfig;
use avic_core::plan::PlanSpec;
use avic_core::sim::{EnvironmentSpec, NoiseConfig};
use avic_core::transition::TransitionConfig;
use avic_core::TransitionType;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ControllerKind {
    Avic,
    FixedGain,
    AvicNoAnticipation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelPolicy {
    Incremental,
    FrozenPretrained,
}

/// Prior belief about one planned contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPrior {
    pub kind: TransitionType,
    /// Plan segment the contact guards.
    pub anchor: usize,
    pub mean: Vector3<f64>,
    /// Standard deviation per axis (m).
    pub sigma: f64,
    /// Ground-truth position, used only for the oracle-assisted error fields.
    #[serde(default)]
    pub truth: Option<Vector3<f64>>,
}

fn default_impact_window() -> usize {
    40
}

fn default_baseline() -> usize {
    20
}

fn default_discovery_sigma() -> f64 {
    0.05
}

fn default_impact_hold() -> f64 {
    0.03
}

fn default_hold() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticipationSpec {
    #[serde(default)]
    pub contacts: Vec<ContactPrior>,
    /// Process noise added to every covariance entry on the diagonal per trial (m²).
    #[serde(default)]
    pub process_noise: f64,
    /// Measurement noise variance per axis (m²).
    pub measurement_noise: f64,
    #[serde(default)]
    pub impact: ImpactConfig,
    /// Approach speed for the first trial (m/s).
    pub initial_approach_speed: f64,
    /// Ticks after contact searched for the peak impact force.
    #[serde(default = "default_impact_window")]
    pub impact_window: usize,
    /// Ticks before contact averaged for the force baseline.
    #[serde(default = "default_baseline")]
    pub baseline_window: usize,
    /// Spawn estimates for surface changes found by mode detection.
    #[serde(default)]
    pub discover_impactless: bool,
    #[serde(default = "default_discovery_sigma")]
    pub discovery_sigma: f64,
    /// Known positions of surface changes, for the oracle-assisted errors.
    #[serde(default)]
    pub impactless_truth: Vec<Vector3<f64>>,
    /// Longest high-stiffness hold after leaving an impact-less region (s).
    #[serde(default = "default_hold")]
    pub max_hold: f64,
    /// Time the transition gains are kept after leaving an impact region,
    /// covering the impact transient (s).
    #[serde(default = "default_impact_hold")]
    pub impact_hold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persistence {
    pub estimates: bool,
    pub models: bool,
}

impl Default for Persistence {
    fn default() -> Self {
        Self {
            estimates: true,
            models: true,
        }
    }
}

/// Training run used before the measured trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSpec {
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub batch: avic_core::forward_model::BatchFitConfig,
}

fn default_timestep() -> f64 {
    1e-3
}

fn default_trials() -> usize {
    1
}

fn default_settle() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_timestep")]
    pub timestep: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub controller: ControllerKind,
    #[serde(default = "default_policy")]
    pub model_policy: ModelPolicy,
    /// Hold time after the plan ends (s).
    #[serde(default = "default_settle")]
    pub settle_time: f64,
    pub environment: EnvironmentSpec,
    pub plan: PlanSpec,
    pub gains: GainConfig,
    /// Stiffness of the fixed-gain baseline; defaults to `kp_free`.
    #[serde(default)]
    pub fixed_kp: Option<Vector3<f64>>,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub anticipation: Option<AnticipationSpec>,
    #[serde(default)]
    pub transition: TransitionConfig,
    #[serde(default)]
    pub persistence: Persistence,
    #[serde(default)]
    pub pretrain: Option<PretrainSpec>,
    /// Assertions evaluated by `run --check`.
    #[serde(default)]
    pub checks: Vec<Check>,
}

/// Bound on one report metric; `trial` defaults to the last trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub metric: crate::compare::Metric,
    #[serde(default)]
    pub trial: Option<usize>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

fn default_policy() -> ModelPolicy {
    ModelPolicy::Incremental
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let s: Scenario = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(format!("{}: {m}", self.name)));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.timestep > 0.0) {
            return bad("timestep must be positive".into());
        }
        if self.plan.segments.is_empty() {
            return bad("plan has no segments".into());
        }
        if let Err(e) = self.gains.validate() {
            return bad(e.to_string());
        }
        if let Some(a) = &self.anticipation {
            for (i, c) in a.contacts.iter().enumerate() {
                if c.anchor >= self.plan.segments.len() {
                    return bad(format!(
                        "contact {i} anchors to missing segment {}",
                        c.anchor
                    ));
                }
                if !(c.sigma > 0.0) {
                    return bad(format!("contact {i} needs a positive sigma"));
                }
            }
            if !(a.measurement_noise > 0.0) || a.process_noise < 0.0 {
                return bad(
                    "measurement noise must be positive and process noise non-negative".into(),
                );
            }
            if !(a.initial_approach_speed > 0.0) {
                return bad("initial approach speed must be positive".into());
            }
        }
        if self.model_policy == ModelPolicy::FrozenPretrained && self.pretrain.is_none() {
            return bad("frozen_pretrained needs a [pretrain] section".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
controller = "avic"

[environment]
effector_mass = 0.0625

[plan]
start = [0.0, 0.0, 0.0]

[[plan.segments]]
to = [0.1, 0.0, 0.0]
speed = 0.05

[gains]
kp_free = [200.0, 200.0, 200.0]
kp_max = [2000.0, 2000.0, 2000.0]
logistic_rate = 10.0
logistic_midpoint = 0.5
"#;

    #[test]
    fn parses_minimal_file() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.trials, 1);
        assert_eq!(s.timestep, 1e-3);
        assert_eq!(s.plan.segments[0].to, Vector3::new(0.1, 0.0, 0.0));
        assert!(s.anticipation.is_none());
        assert_eq!(s.model_policy, ModelPolicy::Incremental);
    }

    #[test]
    fn rejects_zero_trials() {
        let text = MINIMAL.replace("controller = \"avic\"", "controller = \"avic\"\ntrials = 0");
        assert!(matches!(
            Scenario::from_toml(&text),
            Err(BenchError::Config(_))
        ));
    }

    #[test]
    fn frozen_policy_needs_pretrain() {
        let text = MINIMAL.replace(
            "controller = \"avic\"",
            "controller = \"avic\"\nmodel_policy = \"frozen_pretrained\"",
        );
        assert!(Scenario::from_toml(&text).is_err());
    }
}
