use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Environment, SimError};
use crate::types::{RobotState, Wrench};

/// Gaussian measurement noise on the returned observations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Force noise std (N); torque uses the same value in N·m.
    #[serde(default)]
    pub wrench_std: f64,
    /// Position noise std (m).
    #[serde(default)]
    pub position_std: f64,
}

fn default_max_speed() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub timestep: f64,
    pub trial_length: u64,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub rng_seed: u64,
    /// Divergence guard (m/s).
    #[serde(default = "default_max_speed")]
    pub max_speed: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.timestep > 0.0) || !self.timestep.is_finite() {
            return Err(SimError::InvalidConfig(format!(
                "timestep must be positive, got {}",
                self.timestep
            )));
        }
        if !(self.max_speed > 0.0) {
            return Err(SimError::InvalidConfig("max_speed must be positive".into()));
        }
        if let Some(n) = &self.noise {
            if n.wrench_std < 0.0 || n.position_std < 0.0 {
                return Err(SimError::InvalidConfig(
                    "noise std must be non-negative".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Semi-implicit Euler integrator for the point effector.
///
/// The simulator keeps the true state; [`Simulator::step`] returns the
/// observation (true state plus configured measurement noise).
#[derive(Debug, Clone)]
pub struct Simulator {
    env: Environment,
    config: SimConfig,
    state: RobotState,
    tick: u64,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new(env: Environment, config: SimConfig, initial: RobotState) -> Result<Self, SimError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mut sim = Self {
            env,
            config,
            state: initial,
            tick: 0,
            rng,
        };
        let reaction = sim.env.reaction(&sim.state, sim.config.timestep);
        sim.state.measured_wrench = -reaction.wrench;
        Ok(sim)
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn true_state(&self) -> &RobotState {
        &self.state
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Noise-free observation of the current state.
    pub fn observe(&self) -> RobotState {
        self.state
    }

    /// Gravity compensation term for the controller.
    pub fn gravity_compensation(&self) -> Wrench {
        Wrench::from_force(-self.env.spec().gravity * self.env.mass())
    }

    /// Advance one timestep under `applied` and return the new observation.
    pub fn step(&mut self, applied: &Wrench) -> Result<RobotState, SimError> {
        if !applied.is_finite() {
            return Err(SimError::NonFiniteInput { tick: self.tick });
        }
        let dt = self.config.timestep;
        let m = self.env.mass();
        let reaction = self.env.reaction(&self.state, dt);
        // Drag is integrated implicitly. Friction is applied as an impulse
        // capped so that it can stop the tangential motion but not reverse it.
        let v = self.state.linear_velocity;
        let friction: Vector3<f64> = reaction.friction.iter().map(|f| f.force).sum();
        let explicit = applied.force + reaction.wrench.force - friction
            + reaction.damping * v
            + self.env.spec().gravity * m;
        let lhs = Matrix3::identity() * m + reaction.damping * dt;
        let rhs = v * m + explicit * dt;
        let mut v_next = lhs.lu().solve(&rhs).unwrap_or(v + explicit * (dt / m));
        let smoothing = self.env.spec().friction_smoothing_speed;
        for f in &reaction.friction {
            let vt = v_next - f.normal * v_next.dot(&f.normal);
            let speed = vt.norm();
            if speed > 0.0 {
                let scale = if smoothing > 0.0 {
                    (speed / smoothing).min(1.0)
                } else {
                    1.0
                };
                let dv = (f.limit * scale * dt / m).min(speed);
                v_next -= vt * (dv / speed);
            }
        }

        let mut next = self.state;
        next.linear_velocity = v_next;
        next.position += next.linear_velocity * dt;
        next.time = (self.tick + 1) as f64 * dt;

        let speed = next.linear_velocity.norm();
        if !speed.is_finite() || speed > self.config.max_speed {
            return Err(SimError::Diverged {
                tick: self.tick,
                speed,
                bound: self.config.max_speed,
            });
        }

        let after = self.env.reaction(&next, dt);
        next.measured_wrench = -after.wrench;
        self.state = next;
        self.tick += 1;

        let mut obs = next;
        if let Some(noise) = self.config.noise {
            if noise.wrench_std > 0.0 {
                let n = Normal::new(0.0, noise.wrench_std).expect("validated std");
                obs.measured_wrench.force += self.sample3(&n);
                obs.measured_wrench.torque += self.sample3(&n);
            }
            if noise.position_std > 0.0 {
                let n = Normal::new(0.0, noise.position_std).expect("validated std");
                obs.position += self.sample3(&n);
            }
        }
        Ok(obs)
    }

    fn sample3(&mut self, n: &Normal<f64>) -> Vector3<f64> {
        Vector3::new(
            n.sample(&mut self.rng),
            n.sample(&mut self.rng),
            n.sample(&mut self.rng),
        )
    }
}
