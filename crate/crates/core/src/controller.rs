//! Hybrid force/impedance control with prediction-error-scheduled stiffness.
//!
//! The commanded task-space wrench is
//!
//! ```text
//! u_t = H + Kp_t Δx + Kd_t Δẋ + λ_{t-1} W_ff + u_fc
//! Kp_t = Kp_free + (1 − λ_{t-1}) (Kp_max − Kp_free)
//! λ_t  = 1 − 1 / (1 + exp(−r (ε_t − ε0)))
//! ```
//!
//! where `W_ff` is the compensating feed-forward wrench (the negated predicted
//! environment reaction) and `u_fc` regulates force on the axes that carry a
//! force target. Motion feedback and feed-forward are zeroed on those axes.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::PlanSample;
use crate::types::{RobotState, Wrench};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("controller fault: non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid gains: {0}")]
    InvalidGains(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingRule {
    /// `Kd = sqrt(Kp / 4)`
    #[default]
    QuarterRoot,
    /// `Kd = 2 sqrt(Kp)`, critical damping for unit mass.
    Critical,
}

impl DampingRule {
    pub fn damping(self, kp: &Vector3<f64>) -> Vector3<f64> {
        match self {
            DampingRule::QuarterRoot => kp.map(|k| (k / 4.0).sqrt()),
            DampingRule::Critical => kp.map(|k| 2.0 * k.sqrt()),
        }
    }
}

/// Gains of the integral force regulator on force-controlled axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceGains {
    /// Integral gain (1/s).
    pub integral: f64,
    /// Anti-windup bound on the integral correction (N).
    pub integral_limit: f64,
    /// Velocity damping on force axes (N·s/m).
    pub damping: f64,
}

impl Default for ForceGains {
    fn default() -> Self {
        Self {
            integral: 5.0,
            integral_limit: 5.0,
            damping: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    pub kp_free: Vector3<f64>,
    pub kp_max: Vector3<f64>,
    pub logistic_rate: f64,
    pub logistic_midpoint: f64,
    #[serde(default)]
    pub force_gain: ForceGains,
    #[serde(default)]
    pub damping_rule: DampingRule,
    /// Largest per-tick change of any stiffness entry (N/m); `None` disables.
    #[serde(default)]
    pub slew_limit: Option<f64>,
}

impl GainConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        for i in 0..3 {
            if !(self.kp_free[i] > 0.0 && self.kp_free[i] <= self.kp_max[i]) {
                return Err(ControlError::InvalidGains(format!(
                    "need 0 < kp_free <= kp_max on axis {i}"
                )));
            }
        }
        if !(self.logistic_rate > 0.0 && self.logistic_midpoint > 0.0) {
            return Err(ControlError::InvalidGains(
                "logistic rate and midpoint must be positive".into(),
            ));
        }
        if let Some(s) = self.slew_limit {
            if !(s > 0.0) {
                return Err(ControlError::InvalidGains(
                    "slew_limit must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Logistic map from prediction error to feed-forward confidence λ.
pub fn lambda_of_error(eps: f64, cfg: &GainConfig) -> f64 {
    1.0 - 1.0 / (1.0 + (-cfg.logistic_rate * (eps - cfg.logistic_midpoint)).exp())
}

/// Stiffness and damping for confidence `lambda`.
pub fn stiffness_update(lambda: f64, cfg: &GainConfig) -> (Vector3<f64>, Vector3<f64>) {
    let l = lambda.clamp(0.0, 1.0);
    let kp = cfg.kp_free + (cfg.kp_max - cfg.kp_free) * (1.0 - l);
    let kd = cfg.damping_rule.damping(&kp);
    (kp, kd)
}

/// Integral force regulator with anti-windup.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceRegulator {
    integral: Vector3<f64>,
}

impl ForceRegulator {
    pub fn reset(&mut self) {
        self.integral = Vector3::zeros();
    }

    pub fn integral(&self) -> Vector3<f64> {
        self.integral
    }

    /// Force command on the axes flagged in `target.force_axes`.
    ///
    /// Targets are expressed in the sensor convention: the force the effector
    /// should exert on the environment.
    pub fn command(
        &mut self,
        state: &RobotState,
        target: &PlanSample,
        gains: &ForceGains,
        dt: f64,
    ) -> Vector3<f64> {
        let mut u = Vector3::zeros();
        for i in 0..3 {
            if !target.force_axes[i] {
                self.integral[i] = 0.0;
                continue;
            }
            let err = target.force_target[i] - state.measured_wrench.force[i];
            let limit = if gains.integral > 0.0 {
                gains.integral_limit / gains.integral
            } else {
                0.0
            };
            self.integral[i] = (self.integral[i] + err * dt).clamp(-limit, limit);
            u[i] = target.force_target[i] + gains.integral * self.integral[i]
                - gains.damping * state.linear_velocity[i];
        }
        u
    }
}

fn check_finite(v: &Vector3<f64>, what: &'static str) -> Result<(), ControlError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ControlError::NonFinite(what))
    }
}

/// Evaluate the impedance law for explicit gains.
///
/// Shared by the adaptive controller, the fixed-gain baseline and the
/// transition-phase controllers, which differ only in their gains.
#[allow(clippy::too_many_arguments)]
pub fn impedance_law(
    state: &RobotState,
    target: &PlanSample,
    kp: &Vector3<f64>,
    kd: &Vector3<f64>,
    lambda: f64,
    feedforward: &Wrench,
    gravity_comp: &Wrench,
    force_cmd: &Vector3<f64>,
) -> Result<Wrench, ControlError> {
    if !state.is_finite() {
        return Err(ControlError::NonFinite("state"));
    }
    check_finite(&target.position, "target position")?;
    check_finite(&target.velocity, "target velocity")?;
    if !feedforward.is_finite() || !lambda.is_finite() {
        return Err(ControlError::NonFinite("feed-forward"));
    }
    let dx = target.position - state.position;
    let dv = target.velocity - state.linear_velocity;
    let mut force = gravity_comp.force;
    for i in 0..3 {
        if target.force_axes[i] {
            force[i] += force_cmd[i];
        } else {
            force[i] += kp[i] * dx[i] + kd[i] * dv[i] + lambda * feedforward.force[i];
        }
    }
    check_finite(&force, "command")?;
    Ok(Wrench {
        force,
        torque: gravity_comp.torque + feedforward.torque * lambda,
    })
}

/// One tick of controller output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub wrench: Wrench,
    pub kp: Vector3<f64>,
    pub kd: Vector3<f64>,
    pub lambda: f64,
    /// Feed-forward wrench before scaling by λ.
    pub feedforward: Wrench,
    pub force_command: Vector3<f64>,
}

/// Per-trial state of the adaptive controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub lambda: f64,
    pub kp: Vector3<f64>,
    pub kd: Vector3<f64>,
    pub last_epsilon: Option<f64>,
}

/// Adaptive variable impedance controller.
#[derive(Debug, Clone)]
pub struct AvicController {
    cfg: GainConfig,
    state: ControllerState,
    force: ForceRegulator,
}

impl AvicController {
    /// Starts with λ = 0 (no trusted model, maximum stiffness).
    pub fn new(cfg: GainConfig) -> Result<Self, ControlError> {
        cfg.validate()?;
        let (kp, kd) = stiffness_update(0.0, &cfg);
        Ok(Self {
            cfg,
            state: ControllerState {
                lambda: 0.0,
                kp,
                kd,
                last_epsilon: None,
            },
            force: ForceRegulator::default(),
        })
    }

    pub fn config(&self) -> &GainConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn force_regulator_mut(&mut self) -> &mut ForceRegulator {
        &mut self.force
    }

    /// Record this tick's prediction error; the resulting λ is used on the next tick.
    pub fn observe_error(&mut self, eps: Option<f64>) {
        self.state.last_epsilon = eps;
        self.state.lambda = match eps {
            Some(e) => lambda_of_error(e.max(0.0), &self.cfg),
            None => 0.0,
        };
    }

    /// Force λ to a value (e.g. 0 while a new mode is being identified).
    pub fn set_lambda(&mut self, lambda: f64) {
        self.state.lambda = lambda.clamp(0.0, 1.0);
    }

    /// Move the gains toward the schedule for the current λ, honouring the
    /// slew limit unless `bypass_slew` is set.
    fn schedule_gains(&mut self, bypass_slew: bool) {
        let (target_kp, _) = stiffness_update(self.state.lambda, &self.cfg);
        let kp = match (self.cfg.slew_limit, bypass_slew) {
            (Some(limit), false) => {
                let mut kp = self.state.kp;
                for i in 0..3 {
                    let step = (target_kp[i] - kp[i]).clamp(-limit, limit);
                    kp[i] += step;
                }
                kp
            }
            _ => target_kp,
        };
        let kp = kp.zip_zip_map(&self.cfg.kp_free, &self.cfg.kp_max, |k, lo, hi| {
            k.clamp(lo, hi)
        });
        self.state.kp = kp;
        self.state.kd = self.cfg.damping_rule.damping(&kp);
    }

    /// Adaptive output for this tick along with the gains and force command
    /// that produced it. With `hold_max` the gains jump to `kp_max` and the
    /// feed-forward is dropped (mode identification).
    pub fn command_parts(
        &mut self,
        state: &RobotState,
        target: &PlanSample,
        feedforward: &Wrench,
        gravity_comp: &Wrench,
        dt: f64,
        hold_max: bool,
    ) -> Result<ControlOutput, ControlError> {
        if hold_max {
            self.state.lambda = 0.0;
        }
        self.schedule_gains(hold_max);
        let force_command = self.force.command(state, target, &self.cfg.force_gain, dt);
        let feedforward = if hold_max {
            Wrench::zero()
        } else {
            *feedforward
        };
        let wrench = impedance_law(
            state,
            target,
            &self.state.kp,
            &self.state.kd,
            self.state.lambda,
            &feedforward,
            gravity_comp,
            &force_command,
        )?;
        Ok(ControlOutput {
            wrench,
            kp: self.state.kp,
            kd: self.state.kd,
            lambda: self.state.lambda,
            feedforward,
            force_command,
        })
    }

    /// Adaptive control output for this tick.
    pub fn command(
        &mut self,
        state: &RobotState,
        target: &PlanSample,
        feedforward: &Wrench,
        gravity_comp: &Wrench,
        dt: f64,
    ) -> Result<Wrench, ControlError> {
        self.command_parts(state, target, feedforward, gravity_comp, dt, false)
            .map(|o| o.wrench)
    }

    /// Maximum-stiffness output with no feed-forward (mode identification).
    /// Gains jump straight to `kp_max`.
    pub fn high_stiffness_command(
        &mut self,
        state: &RobotState,
        target: &PlanSample,
        gravity_comp: &Wrench,
        dt: f64,
    ) -> Result<Wrench, ControlError> {
        self.command_parts(state, target, &Wrench::zero(), gravity_comp, dt, true)
            .map(|o| o.wrench)
    }

    /// Output with externally chosen stiffness (transition-phase controllers).
    /// The adaptive gain state is left untouched.
    #[allow(clippy::too_many_arguments)]
    pub fn command_with_stiffness(
        &mut self,
        state: &RobotState,
        target: &PlanSample,
        kp: &Vector3<f64>,
        feedforward: &Wrench,
        lambda: f64,
        gravity_comp: &Wrench,
        dt: f64,
    ) -> Result<Wrench, ControlError> {
        let kd = self.cfg.damping_rule.damping(kp);
        let fc = self.force.command(state, target, &self.cfg.force_gain, dt);
        impedance_law(
            state,
            target,
            kp,
            &kd,
            lambda,
            feedforward,
            gravity_comp,
            &fc,
        )
    }
}

/// Constant-stiffness baseline: the same law with λ = 0 and fixed gains.
pub fn fixed_gain_control(
    state: &RobotState,
    target: &PlanSample,
    kp_const: &Vector3<f64>,
    rule: DampingRule,
    gravity_comp: &Wrench,
    force_cmd: &Vector3<f64>,
) -> Result<Wrench, ControlError> {
    let kd = rule.damping(kp_const);
    impedance_law(
        state,
        target,
        kp_const,
        &kd,
        0.0,
        &Wrench::zero(),
        gravity_comp,
        force_cmd,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GainConfig {
        GainConfig {
            kp_free: Vector3::repeat(100.0),
            kp_max: Vector3::repeat(1000.0),
            logistic_rate: 20.0,
            logistic_midpoint: 0.5,
            force_gain: ForceGains::default(),
            damping_rule: DampingRule::QuarterRoot,
            slew_limit: None,
        }
    }

    fn sample_at(p: Vector3<f64>) -> PlanSample {
        PlanSample::motion(0.0, p, Vector3::zeros(), 0)
    }

    #[test]
    fn lambda_midpoint_and_saturation() {
        let c = cfg();
        assert!((lambda_of_error(0.5, &c) - 0.5).abs() < 1e-12);
        assert!(lambda_of_error(0.0, &c) > 0.9999);
        assert!(lambda_of_error(1e6, &c) < 1e-12);
    }

    #[test]
    fn stiffness_endpoints_and_damping() {
        let c = cfg();
        assert_eq!(stiffness_update(1.0, &c).0, c.kp_free);
        assert_eq!(stiffness_update(0.0, &c).0, c.kp_max);
        let kd = DampingRule::QuarterRoot.damping(&Vector3::repeat(100.0));
        assert_eq!(kd, Vector3::repeat(5.0));
        let kd = DampingRule::Critical.damping(&Vector3::repeat(100.0));
        assert_eq!(kd, Vector3::repeat(20.0));
    }

    #[test]
    fn equilibrium_gives_zero_command() {
        let mut c = AvicController::new(cfg()).unwrap();
        let s = RobotState::at_rest(Vector3::new(0.1, 0.2, 0.3));
        let u = c
            .command(
                &s,
                &sample_at(s.position),
                &Wrench::zero(),
                &Wrench::zero(),
                1e-3,
            )
            .unwrap();
        assert_eq!(u, Wrench::zero());
    }

    #[test]
    fn lambda_zero_drops_feedforward() {
        let s = RobotState::at_rest(Vector3::zeros());
        let ff = Wrench::from_force(Vector3::new(3.0, 0.0, 0.0));
        let kp = Vector3::repeat(100.0);
        let kd = Vector3::repeat(5.0);
        let u = impedance_law(
            &s,
            &sample_at(Vector3::new(0.01, 0.0, 0.0)),
            &kp,
            &kd,
            0.0,
            &ff,
            &Wrench::zero(),
            &Vector3::zeros(),
        )
        .unwrap();
        assert!((u.force.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_gain_matches_lambda_zero_at_kp_max() {
        let c = cfg();
        let mut s = RobotState::at_rest(Vector3::new(0.0, 0.01, 0.0));
        s.linear_velocity = Vector3::new(0.02, 0.0, -0.01);
        let t = PlanSample::motion(
            0.0,
            Vector3::new(0.01, 0.0, 0.0),
            Vector3::new(0.05, 0.0, 0.0),
            0,
        );
        let mut ctrl = AvicController::new(c.clone()).unwrap();
        ctrl.set_lambda(0.0);
        let a = ctrl
            .command(&s, &t, &Wrench::zero(), &Wrench::zero(), 1e-3)
            .unwrap();
        let b = fixed_gain_control(
            &s,
            &t,
            &c.kp_max,
            c.damping_rule,
            &Wrench::zero(),
            &Vector3::zeros(),
        )
        .unwrap();
        assert_eq!(a, b);
        let zero = fixed_gain_control(
            &RobotState::at_rest(Vector3::zeros()),
            &sample_at(Vector3::zeros()),
            &c.kp_max,
            c.damping_rule,
            &Wrench::zero(),
            &Vector3::zeros(),
        )
        .unwrap();
        assert_eq!(zero, Wrench::zero());
    }

    #[test]
    fn force_axes_get_no_motion_feedback() {
        let mut ctrl = AvicController::new(cfg()).unwrap();
        let s = RobotState::at_rest(Vector3::zeros());
        let mut t = PlanSample::motion(0.0, Vector3::new(0.1, 0.1, 0.1), Vector3::zeros(), 0);
        t.force_axes = [false, false, true];
        t.force_target = Vector3::new(0.0, 0.0, -4.0);
        let ff = Wrench::from_force(Vector3::new(0.0, 0.0, 7.0));
        ctrl.set_lambda(1.0);
        let u = ctrl.command(&s, &t, &ff, &Wrench::zero(), 1e-3).unwrap();
        // z: target -4 plus integral of (−4 − 0)·dt·ki
        assert!((u.force.z - (-4.0 - 5.0 * 4.0 * 1e-3)).abs() < 1e-12);
        assert!(u.force.x > 0.0);
    }

    #[test]
    fn non_finite_input_is_a_fault() {
        let mut ctrl = AvicController::new(cfg()).unwrap();
        let mut s = RobotState::at_rest(Vector3::zeros());
        s.linear_velocity.x = f64::INFINITY;
        let r = ctrl.command(
            &s,
            &sample_at(Vector3::zeros()),
            &Wrench::zero(),
            &Wrench::zero(),
            1e-3,
        );
        assert!(matches!(r, Err(ControlError::NonFinite(_))));
    }

    #[test]
    fn slew_limit_bounds_gain_steps() {
        let mut c = cfg();
        c.slew_limit = Some(10.0);
        let mut ctrl = AvicController::new(c).unwrap();
        ctrl.observe_error(Some(0.0));
        let s = RobotState::at_rest(Vector3::zeros());
        ctrl.command(
            &s,
            &sample_at(Vector3::zeros()),
            &Wrench::zero(),
            &Wrench::zero(),
            1e-3,
        )
        .unwrap();
        assert_eq!(ctrl.state().kp, Vector3::repeat(990.0));
        ctrl.high_stiffness_command(&s, &sample_at(Vector3::zeros()), &Wrench::zero(), 1e-3)
            .unwrap();
        assert_eq!(ctrl.state().kp, Vector3::repeat(1000.0));
    }

    #[test]
    fn invalid_gains_rejected() {
        let mut c = cfg();
        c.kp_free = Vector3::repeat(2000.0);
        assert!(AvicController::new(c).is_err());
    }
}
