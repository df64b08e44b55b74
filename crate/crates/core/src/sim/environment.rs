use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::types::{RobotState, Wrench};

/// Linear spring between the effector and a fixed anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spring {
    pub anchor: Vector3<f64>,
    pub rest_length: f64,
    /// N/m
    pub stiffness: f64,
}

/// Viscous medium whose drag coefficient grows linearly with time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Porridge {
    /// Drag coefficient at t = 0 (N·s/m).
    pub viscosity_start: f64,
    /// Growth of the drag coefficient per simulation step.
    pub viscosity_rate: f64,
    #[serde(default)]
    pub viscosity_max: Option<f64>,
}

/// Axis-aligned box carrying a friction coefficient for wall contacts inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionRegion {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    pub mu: f64,
}

impl FrictionRegion {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] < self.max[i])
    }
}

/// Half-space obstacle with a penalty (spring-damper) contact law.
///
/// Points with `(p - point)·normal < 0` are penetrating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
    /// Friction coefficient outside any [`FrictionRegion`].
    #[serde(default)]
    pub friction: f64,
}

impl Wall {
    /// Penetration depth (positive inside the obstacle).
    pub fn penetration(&self, p: &Vector3<f64>) -> f64 {
        (self.point - p).dot(&self.normal)
    }
}

fn default_smoothing_speed() -> f64 {
    1e-3
}

/// Declarative description of the world the effector moves in.
///
/// All element lists compose: a scenario may combine walls, friction regions,
/// springs and a viscous medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(default)]
    pub springs: Vec<Spring>,
    #[serde(default)]
    pub porridge: Option<Porridge>,
    #[serde(default)]
    pub friction_regions: Vec<FrictionRegion>,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default)]
    pub gravity: Vector3<f64>,
    pub effector_mass: f64,
    /// Footprint length over which the leading edge of the sliding block
    /// averages surface friction. 0 gives an instantaneous boundary.
    #[serde(default)]
    pub friction_lead_width: f64,
    /// Footprint length of the trailing part of the block. Leaving a
    /// high-friction surface then releases resistance gradually.
    #[serde(default)]
    pub friction_trail_width: f64,
    /// Tangential speed below which kinetic friction is scaled down linearly.
    #[serde(default = "default_smoothing_speed")]
    pub friction_smoothing_speed: f64,
}

impl EnvironmentSpec {
    pub fn free_space(effector_mass: f64) -> Self {
        Self {
            springs: Vec::new(),
            porridge: None,
            friction_regions: Vec::new(),
            walls: Vec::new(),
            gravity: Vector3::zeros(),
            effector_mass,
            friction_lead_width: 0.0,
            friction_trail_width: 0.0,
            friction_smoothing_speed: default_smoothing_speed(),
        }
    }
}

/// Environment reaction at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// Wrench the environment applies to the effector.
    pub wrench: Wrench,
    /// Normal force magnitude per wall (0 when not in contact).
    pub wall_normal_forces: Vec<f64>,
    /// Drag equals `-damping * v`; the integrator treats it implicitly.
    pub damping: Matrix3<f64>,
    /// Kinetic friction per wall in contact, included in `wrench`.
    pub friction: Vec<FrictionContact>,
}

/// Friction acting at one wall contact.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionContact {
    pub normal: Vector3<f64>,
    /// `mu * normal_force` at this state.
    pub limit: f64,
    /// Friction force at this state.
    pub force: Vector3<f64>,
}

/// Kinetic friction opposing the tangential velocity.
///
/// Magnitude is `mu * normal_force` above `smoothing_speed` and scales
/// linearly to zero below it, so it never exceeds `mu * normal_force`.
pub fn friction_force(
    mu: f64,
    normal_force: f64,
    tangential_velocity: &Vector3<f64>,
    smoothing_speed: f64,
) -> Vector3<f64> {
    let speed = tangential_velocity.norm();
    if speed == 0.0 || mu == 0.0 || normal_force <= 0.0 {
        return Vector3::zeros();
    }
    let scale = if smoothing_speed > 0.0 {
        (speed / smoothing_speed).min(1.0)
    } else {
        1.0
    };
    -tangential_velocity / speed * (mu * normal_force * scale)
}

const FOOTPRINT_SAMPLES: usize = 16;

/// Validated environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    spec: EnvironmentSpec,
}

impl Environment {
    pub fn new(mut spec: EnvironmentSpec) -> Result<Self, SimError> {
        let bad = |msg: String| Err(SimError::InvalidEnvironment(msg));
        if !(spec.effector_mass > 0.0) {
            return bad(format!(
                "effector mass must be positive, got {}",
                spec.effector_mass
            ));
        }
        if spec.friction_lead_width < 0.0
            || spec.friction_trail_width < 0.0
            || spec.friction_smoothing_speed < 0.0
        {
            return bad("friction widths and smoothing speed must be non-negative".into());
        }
        for (i, s) in spec.springs.iter().enumerate() {
            if s.stiffness < 0.0 || s.rest_length < 0.0 {
                return bad(format!("spring {i} has negative parameters"));
            }
        }
        if let Some(p) = &spec.porridge {
            if p.viscosity_start < 0.0 || p.viscosity_rate < 0.0 {
                return bad("porridge viscosity must be non-negative".into());
            }
        }
        for (i, r) in spec.friction_regions.iter().enumerate() {
            if r.mu < 0.0 {
                return bad(format!("friction region {i} has negative mu"));
            }
            if (0..3).any(|k| r.max[k] <= r.min[k]) {
                return bad(format!("friction region {i} is empty"));
            }
        }
        for (i, a) in spec.friction_regions.iter().enumerate() {
            for (j, b) in spec.friction_regions.iter().enumerate().skip(i + 1) {
                let overlap = (0..3).all(|k| a.min[k] < b.max[k] && b.min[k] < a.max[k]);
                if overlap {
                    return bad(format!("friction regions {i} and {j} overlap"));
                }
            }
        }
        for (i, w) in spec.walls.iter_mut().enumerate() {
            if w.stiffness < 0.0 || w.damping < 0.0 || w.friction < 0.0 {
                return bad(format!("wall {i} has negative parameters"));
            }
            let n = w.normal.norm();
            if (n - 1.0).abs() > 1e-6 {
                return bad(format!("wall {i} normal is not unit length (|n| = {n})"));
            }
            w.normal /= n;
        }
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn mass(&self) -> f64 {
        self.spec.effector_mass
    }

    /// Index of the friction region containing `p`.
    pub fn region_index(&self, p: &Vector3<f64>) -> Option<usize> {
        self.spec
            .friction_regions
            .iter()
            .position(|r| r.contains(p))
    }

    fn point_mu(&self, wall: &Wall, p: &Vector3<f64>) -> f64 {
        match self.region_index(p) {
            Some(i) => self.spec.friction_regions[i].mu,
            None => wall.friction,
        }
    }

    fn footprint_mu(&self, wall: &Wall, p: &Vector3<f64>, dir: &Vector3<f64>, width: f64) -> f64 {
        let sum: f64 = (0..FOOTPRINT_SAMPLES)
            .map(|k| {
                let s = width * (k as f64 + 0.5) / FOOTPRINT_SAMPLES as f64;
                self.point_mu(wall, &(p - dir * s))
            })
            .sum();
        sum / FOOTPRINT_SAMPLES as f64
    }

    /// Effective friction coefficient under the sliding block whose leading
    /// edge is at `p`, moving along `velocity`.
    pub fn effective_mu(&self, wall: &Wall, p: &Vector3<f64>, velocity: &Vector3<f64>) -> f64 {
        let speed = velocity.norm();
        let lead = self.spec.friction_lead_width;
        let trail = self.spec.friction_trail_width;
        if speed == 0.0 || (lead == 0.0 && trail == 0.0) {
            return self.point_mu(wall, p);
        }
        let dir = velocity / speed;
        let lead_mu = if lead > 0.0 {
            self.footprint_mu(wall, p, &dir, lead)
        } else {
            self.point_mu(wall, p)
        };
        if trail > 0.0 {
            lead_mu.max(self.footprint_mu(wall, p, &dir, trail))
        } else {
            lead_mu
        }
    }

    /// Drag coefficient of the viscous medium at `time`.
    pub fn viscosity(&self, time: f64, dt: f64) -> f64 {
        match &self.spec.porridge {
            None => 0.0,
            Some(p) => {
                let steps = if dt > 0.0 { (time / dt).round() } else { 0.0 };
                let c = p.viscosity_start + p.viscosity_rate * steps;
                p.viscosity_max.map_or(c, |m| c.min(m))
            }
        }
    }

    /// Reaction wrench the environment exerts on the effector.
    ///
    /// Springs pull toward their rest length, the medium applies `-c v`, each
    /// penetrated wall pushes with `k·depth + d·depth_rate` (never pulling) and
    /// adds kinetic friction proportional to that normal force.
    pub fn reaction(&self, state: &RobotState, dt: f64) -> Reaction {
        let p = state.position;
        let v = state.linear_velocity;
        let mut force = Vector3::zeros();
        let mut damping = Matrix3::zeros();

        for s in &self.spec.springs {
            let d = p - s.anchor;
            let len = d.norm();
            if len > 1e-12 {
                force -= d / len * (s.stiffness * (len - s.rest_length));
            }
        }

        let c = self.viscosity(state.time, dt);
        if c > 0.0 {
            force -= v * c;
            damping += Matrix3::identity() * c;
        }

        let mut normals = Vec::with_capacity(self.spec.walls.len());
        let mut frictions = Vec::new();
        for w in &self.spec.walls {
            let depth = w.penetration(&p);
            if depth <= 0.0 {
                normals.push(0.0);
                continue;
            }
            let depth_rate = -v.dot(&w.normal);
            let fn_mag = (w.stiffness * depth + w.damping * depth_rate).max(0.0);
            force += w.normal * fn_mag;
            let vt = v - w.normal * v.dot(&w.normal);
            let mu = self.effective_mu(w, &p, &vt);
            let friction = friction_force(mu, fn_mag, &vt, self.spec.friction_smoothing_speed);
            if mu > 0.0 && fn_mag > 0.0 {
                frictions.push(FrictionContact {
                    normal: w.normal,
                    limit: mu * fn_mag,
                    force: friction,
                });
            }
            force += friction;
            normals.push(fn_mag);
        }

        Reaction {
            wrench: Wrench::from_force(force),
            wall_normal_forces: normals,
            damping,
            friction: frictions,
        }
    }
}
