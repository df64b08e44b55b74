use serde::{Deserialize, Serialize};

use super::detect::{ChangeDetector, DetectorConfig, Trigger};
use super::feature::{feature_of, tangential_wrench};
use super::registry::{classify_batch, ModeRegistry};
use super::{ClusterSummary, ModeFeature};
use crate::controller::{AvicController, ControlError, ControlOutput, GainConfig};
use crate::forward_model::{
    direction_recovery, prediction_error, ErrorFilter, FeatureState, IgmmConfig, InteractionEffect,
    JointPoint, MixtureModel,
};
use crate::plan::PlanSample;
use crate::types::{RobotState, Wrench};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeConfig {
    /// When false a single mode is learned and no changes are detected.
    pub enabled: bool,
    pub batch_size: usize,
    pub confidence_threshold: f64,
    pub cluster_distance: f64,
    pub detector: DetectorConfig,
    /// Ticks after a confirmed mode during which detection is suppressed.
    pub refractory: usize,
    /// Minimum speed (m/s) along the motion-controlled axes for a tick to
    /// count as a friction reading.
    pub min_feature_speed: f64,
    /// Extra high-stiffness ticks while a new mode's model learns.
    pub new_mode_warmup: usize,
    /// Load used for the feature when no axis is force-controlled (N).
    pub nominal_load: f64,
    pub load_floor: f64,
    /// N per N·m when mixing torque into the prediction error.
    pub torque_scale: f64,
    /// Speed below which no feed-forward direction is recovered (m/s).
    pub dead_band: f64,
    pub error_smoothing: f64,
    pub model: IgmmConfig,
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            batch_size: 50,
            confidence_threshold: 0.9,
            cluster_distance: 0.1,
            detector: DetectorConfig::default(),
            refractory: 100,
            min_feature_speed: 0.01,
            new_mode_warmup: 150,
            nominal_load: 1.0,
            load_floor: 0.1,
            torque_scale: 1.0,
            dead_band: 1e-3,
            error_smoothing: 0.0,
            model: IgmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Normal,
    Collecting,
    Warmup,
}

#[derive(Debug, Clone)]
enum Phase {
    Normal,
    Collecting {
        features: Vec<ModeFeature>,
        points: Vec<JointPoint>,
    },
    Warmup {
        remaining: usize,
    },
}

impl Phase {
    fn kind(&self) -> PhaseKind {
        match self {
            Phase::Normal => PhaseKind::Normal,
            Phase::Collecting { .. } => PhaseKind::Collecting,
            Phase::Warmup { .. } => PhaseKind::Warmup,
        }
    }

    fn collecting() -> Self {
        Phase::Collecting {
            features: Vec::new(),
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeEventKind {
    Trigger,
    Restart,
    Classified,
    WarmupDone,
}

/// One line of the mode-event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEvent {
    pub tick: u64,
    pub time: f64,
    pub kind: ModeEventKind,
    pub trigger: Option<Trigger>,
    pub mode: Option<usize>,
    pub confidence: Option<f64>,
    pub runner_up: Option<f64>,
    pub new_mode: bool,
}

/// Result of one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeStep {
    pub output: ControlOutput,
    pub phase: PhaseKind,
    pub active_mode: Option<usize>,
    /// Prediction error of the active model on this tick.
    pub epsilon: Option<f64>,
    pub trigger: Option<Trigger>,
    pub feature: ModeFeature,
    /// Training point `[S_{t-1}, D_t]` formed on this tick.
    pub point: Option<JointPoint>,
    /// Active-model prediction of this tick's interaction effect.
    pub predicted: Option<InteractionEffect>,
    pub measured: InteractionEffect,
}

/// Control loop with per-mode forward models.
///
/// On a detected change the gains jump to maximum stiffness while a batch of
/// features is collected; the batch is then matched against known modes or
/// starts a new one. Between changes the active mode's model is updated
/// online and drives the adaptive gains and feed-forward.
#[derive(Debug, Clone)]
pub struct ModeManager {
    config: ModeConfig,
    registry: ModeRegistry,
    controller: AvicController,
    phase: Phase,
    detector: ChangeDetector,
    filter: ErrorFilter,
    prev: Option<(FeatureState, Wrench)>,
    refractory: usize,
    tick: u64,
    events: Vec<ModeEvent>,
}

impl ModeManager {
    pub fn new(config: ModeConfig, gains: GainConfig) -> Result<Self, ControlError> {
        Self::with_registry(config, gains, ModeRegistry::default())
    }

    /// Continue with modes learned earlier. The active mode is re-identified
    /// from the first batch.
    pub fn with_registry(
        config: ModeConfig,
        gains: GainConfig,
        mut registry: ModeRegistry,
    ) -> Result<Self, ControlError> {
        let controller = AvicController::new(gains)?;
        config
            .model
            .validate()
            .map_err(|e| ControlError::InvalidGains(format!("mode model: {e}")))?;
        let phase = if config.enabled {
            registry.active = None;
            Phase::collecting()
        } else {
            if registry.is_empty() {
                let model = MixtureModel::new(config.model.clone())
                    .map_err(|e| ControlError::InvalidGains(format!("mode model: {e}")))?;
                registry.push(ClusterSummary::default(), model);
            }
            registry.active = registry.modes.first().map(|m| m.id);
            Phase::Normal
        };
        let mut m = Self {
            detector: ChangeDetector::new(config.detector),
            filter: ErrorFilter::new(config.error_smoothing),
            config,
            registry,
            controller,
            phase,
            prev: None,
            refractory: 0,
            tick: 0,
            events: Vec::new(),
        };
        if m.config.enabled {
            m.log(
                0.0,
                ModeEventKind::Trigger,
                Some(Trigger::Initial),
                None,
                None,
                None,
                false,
            );
        }
        Ok(m)
    }

    pub fn config(&self) -> &ModeConfig {
        &self.config
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn into_registry(self) -> ModeRegistry {
        self.registry
    }

    pub fn controller(&self) -> &AvicController {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut AvicController {
        &mut self.controller
    }

    pub fn phase(&self) -> PhaseKind {
        self.phase.kind()
    }

    pub fn events(&self) -> &[ModeEvent] {
        &self.events
    }

    /// Mode-event log as JSON lines.
    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("mode events serialize") + "\n")
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn log(
        &mut self,
        time: f64,
        kind: ModeEventKind,
        trigger: Option<Trigger>,
        mode: Option<usize>,
        confidence: Option<f64>,
        runner_up: Option<f64>,
        new_mode: bool,
    ) {
        self.events.push(ModeEvent {
            tick: self.tick,
            time,
            kind,
            trigger,
            mode,
            confidence,
            runner_up,
            new_mode,
        });
    }

    fn finish_batch(&mut self, time: f64, features: Vec<ModeFeature>, points: Vec<JointPoint>) {
        let c = classify_batch(
            &features,
            &self.registry,
            self.config.cluster_distance,
            self.config.confidence_threshold,
        );
        let values: Vec<f64> = features.iter().map(|f| f.value).collect();
        let batch = ClusterSummary::from_values(&values);
        if let (false, Some(id)) = (c.is_new, c.best) {
            let mode = self.registry.get_mut(id).expect("classified mode exists");
            mode.summary = mode.summary.merge(&batch);
            for p in &points {
                let _ = mode.model.update(p);
            }
            self.registry.active = Some(id);
            self.phase = Phase::Normal;
            self.refractory = self.config.refractory;
            self.log(
                time,
                ModeEventKind::Classified,
                None,
                Some(id),
                Some(c.confidence),
                Some(c.runner_up),
                false,
            );
        } else {
            let mut model =
                MixtureModel::new(self.config.model.clone()).expect("validated model config");
            for p in &points {
                let _ = model.update(p);
            }
            let id = self.registry.push(batch, model);
            self.registry.active = Some(id);
            self.phase = Phase::Warmup {
                remaining: self.config.new_mode_warmup,
            };
            self.log(
                time,
                ModeEventKind::Classified,
                None,
                Some(id),
                Some(c.confidence),
                Some(c.runner_up),
                true,
            );
            if self.config.new_mode_warmup == 0 {
                self.end_warmup(time);
            }
        }
        self.detector.reset();
        self.filter.reset();
    }

    fn end_warmup(&mut self, time: f64) {
        if let Some(m) = self.registry.active_mode_mut() {
            m.reference = Some(m.model.frozen_copy());
        }
        self.phase = Phase::Normal;
        self.refractory = self.config.refractory;
        let id = self.registry.active;
        self.log(time, ModeEventKind::WarmupDone, None, id, None, None, false);
    }

    /// One control tick.
    pub fn step(
        &mut self,
        state: &RobotState,
        sample: &PlanSample,
        gravity_comp: &Wrench,
        dt: f64,
    ) -> Result<ModeStep, ControlError> {
        self.tick += 1;
        let time = state.time;
        let interaction = tangential_wrench(&state.measured_wrench, sample);
        let effect = InteractionEffect::from_wrench(&interaction);
        let mut sliding_velocity = state.linear_velocity;
        for i in 0..3 {
            if sample.force_axes[i] {
                sliding_velocity[i] = 0.0;
            }
        }
        let moving = sliding_velocity.norm() >= self.config.min_feature_speed;
        let feature = feature_of(
            &state.measured_wrench,
            sample,
            self.config.nominal_load,
            self.config.load_floor,
        );
        let point = self.prev.map(|(s, _)| JointPoint { state: s, effect });

        let active = self.registry.active_mode();
        let predicted = point.and_then(|p| {
            active
                .and_then(|m| m.model.predict(&p.state))
                .map(|pred| pred.effect)
        });
        let epsilon =
            predicted.map(|pred| prediction_error(&pred, &effect, self.config.torque_scale));
        let reference_error = point.and_then(|p| {
            active
                .and_then(|m| m.reference.as_ref())
                .and_then(|r| r.predict(&p.state))
                .map(|pred| prediction_error(&pred.effect, &effect, self.config.torque_scale))
        });

        let mut trigger = None;
        let phase = std::mem::replace(&mut self.phase, Phase::Normal);
        self.phase = match phase {
            Phase::Normal if self.config.enabled => {
                let fired = self
                    .detector
                    .push(effect.force_mag, reference_error, moving);
                if self.refractory > 0 {
                    self.refractory -= 1;
                    Phase::Normal
                } else if let Some(t) = fired {
                    trigger = Some(t);
                    Phase::collecting()
                } else {
                    Phase::Normal
                }
            }
            Phase::Collecting {
                mut features,
                mut points,
            } => {
                let fired = self.detector.push(effect.force_mag, None, moving);
                if fired == Some(Trigger::ForceJump) && !features.is_empty() {
                    self.log(time, ModeEventKind::Restart, fired, None, None, None, false);
                    features.clear();
                    points.clear();
                }
                if moving {
                    features.push(feature);
                    if let Some(p) = point {
                        points.push(p);
                    }
                }
                if features.len() >= self.config.batch_size.max(1) {
                    self.phase = Phase::Normal;
                    self.finish_batch(time, features, points);
                    std::mem::replace(&mut self.phase, Phase::Normal)
                } else {
                    Phase::Collecting { features, points }
                }
            }
            other => other,
        };

        match &mut self.phase {
            Phase::Normal => {
                if trigger.is_none() {
                    if let (Some(p), Some(m)) = (point, self.registry.active_mode_mut()) {
                        let _ = m.model.update(&p);
                    }
                }
            }
            Phase::Warmup { remaining } => {
                *remaining = remaining.saturating_sub(1);
                let done = *remaining == 0;
                if let (Some(p), Some(m)) = (point, self.registry.active_mode_mut()) {
                    let _ = m.model.update(&p);
                }
                if done {
                    self.end_warmup(time);
                }
            }
            Phase::Collecting { .. } => {}
        }
        if let Some(t) = trigger {
            self.detector.reset();
            self.log(
                time,
                ModeEventKind::Trigger,
                Some(t),
                self.registry.active,
                None,
                None,
                false,
            );
        }

        let normal = matches!(self.phase, Phase::Normal) && trigger.is_none();
        let current = FeatureState::from_parts(state, &interaction);
        let feedforward = if normal {
            self.controller
                .observe_error(epsilon.map(|e| self.filter.push(e)));
            self.registry
                .active_mode()
                .and_then(|m| m.model.predict(&current))
                .map(|pred| {
                    -direction_recovery(
                        &pred.effect,
                        &state.linear_velocity,
                        &state.angular_velocity,
                        self.config.dead_band,
                    )
                })
                .unwrap_or_else(Wrench::zero)
        } else {
            Wrench::zero()
        };
        let output = self.controller.command_parts(
            state,
            sample,
            &feedforward,
            gravity_comp,
            dt,
            !normal,
        )?;
        self.prev = Some((current, interaction));
        Ok(ModeStep {
            output,
            phase: self.phase.kind(),
            active_mode: self.registry.active,
            epsilon,
            trigger,
            feature,
            point,
            predicted,
            measured: effect,
        })
    }
}

/// Ticks from `start` until `kp` first drops below `threshold`, or to the end
/// of the trace.
pub fn high_stiffness_dwell(kp: &[f64], start: usize, threshold: f64) -> usize {
    kp.iter()
        .skip(start)
        .position(|&k| k < threshold)
        .unwrap_or(kp.len().saturating_sub(start))
}
