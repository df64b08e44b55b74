use nalgebra::{Cholesky, SMatrix, SVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FeatureState, InteractionEffect, JointPoint, ModelError};

/// Dimension of the conditioning block `S`.
pub const STATE_DIM: usize = 4;
/// Dimension of a joint point `[S, D]`.
pub const JOINT_DIM: usize = 6;
/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub type Vec6 = SVector<f64, JOINT_DIM>;
pub type Mat6 = SMatrix<f64, JOINT_DIM, JOINT_DIM>;
type Vec4 = SVector<f64, STATE_DIM>;
type Mat4 = SMatrix<f64, STATE_DIM, STATE_DIM>;
type Vec2 = SVector<f64, 2>;
type Mat2 = SMatrix<f64, 2, 2>;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Hyperparameters of the incremental mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IgmmConfig {
    /// A point whose normalised likelihood `exp(-d²/2)` under every
    /// component is below this value spawns a new component.
    pub novelty_threshold: f64,
    /// Multiplier on `dimension_scale` giving the std of a freshly spawned
    /// component.
    pub initial_covariance_scale: f64,
    /// Characteristic magnitude per joint dimension
    /// `[lin_speed, ang_speed, force, torque, force_next, torque_next]`.
    pub dimension_scale: [f64; JOINT_DIM],
    pub max_components: usize,
    /// Eigenvalue floor of every covariance, in scaled units.
    pub min_variance: f64,
}

impl Default for IgmmConfig {
    fn default() -> Self {
        Self {
            novelty_threshold: 1e-4,
            initial_covariance_scale: 1.0,
            dimension_scale: [0.02, 0.05, 0.5, 0.05, 0.5, 0.05],
            max_components: 16,
            min_variance: 1e-4,
        }
    }
}

impl IgmmConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(self.novelty_threshold > 0.0 && self.novelty_threshold < 1.0) {
            return bad("novelty_threshold must lie in (0, 1)");
        }
        if !(self.initial_covariance_scale > 0.0) {
            return bad("initial_covariance_scale must be positive");
        }
        if self.dimension_scale.iter().any(|s| !(*s > 0.0)) {
            return bad("dimension_scale entries must be positive");
        }
        if self.max_components == 0 {
            return bad("max_components must be at least 1");
        }
        if !(self.min_variance > 0.0) {
            return bad("min_variance must be positive");
        }
        Ok(())
    }

    fn scale_vector(&self) -> Vec6 {
        Vec6::from(self.dimension_scale)
    }
}

/// One Gaussian of the mixture with its streaming accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec6,
    pub covariance: Mat6,
    /// Accumulated posterior mass.
    pub posterior_sum: f64,
    /// Number of updates seen since the component was created.
    pub age: u64,
}

/// Gaussian conditional of `D` given `S` before clamping to magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditional {
    pub mean: Vec2,
    pub covariance: Mat2,
}

/// GMR prediction of the next interaction effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub effect: InteractionEffect,
    pub variance: Mat2,
}

/// Gaussian mixture over joint `[S_{t-1}, D_t]` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub format_version: u32,
    pub config: IgmmConfig,
    components: Vec<Component>,
    observations: u64,
    frozen: bool,
}

struct Evaluated {
    log_density: f64,
    mahalanobis_sq: f64,
}

fn log_gaussian<const N: usize>(
    x: &SVector<f64, N>,
    mean: &SVector<f64, N>,
    cov: &SMatrix<f64, N, N>,
) -> Option<(f64, f64)> {
    let chol = Cholesky::new(*cov)?;
    let diff = x - mean;
    let solved = chol.l().solve_lower_triangular(&diff)?;
    let d2 = solved.norm_squared();
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    Some((-0.5 * (d2 + N as f64 * LN_2PI + log_det), d2))
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl MixtureModel {
    pub fn new(config: IgmmConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            config,
            components: Vec::new(),
            observations: 0,
            frozen: false,
        })
    }

    /// Build a frozen model from explicit components (weights are renormalised).
    pub fn from_components(
        config: IgmmConfig,
        components: Vec<Component>,
        observations: u64,
        frozen: bool,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.is_empty() || !(total > 0.0) {
            return Err(ModelError::InvalidConfig(
                "components must carry positive weight".into(),
            ));
        }
        let mut m = Self {
            format_version: MODEL_FORMAT_VERSION,
            config,
            components,
            observations,
            frozen,
        };
        for c in &mut m.components {
            c.weight /= total;
        }
        let floor = m.floor();
        let scale = m.config.scale_vector();
        for c in &mut m.components {
            c.covariance = regularize(&c.covariance, &scale, floor);
        }
        Ok(m)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// A copy that rejects further updates.
    pub fn frozen_copy(&self) -> Self {
        let mut m = self.clone();
        m.frozen = true;
        m
    }

    fn floor(&self) -> f64 {
        self.config.min_variance
    }

    fn evaluate(&self, x: &Vec6) -> Vec<Evaluated> {
        self.components
            .iter()
            .map(|c| match log_gaussian(x, &c.mean, &c.covariance) {
                Some((ld, d2)) => Evaluated {
                    log_density: ld,
                    mahalanobis_sq: d2,
                },
                None => Evaluated {
                    log_density: f64::NEG_INFINITY,
                    mahalanobis_sq: f64::INFINITY,
                },
            })
            .collect()
    }

    /// Log-likelihood of a joint point under the mixture.
    pub fn log_likelihood(&self, point: &JointPoint) -> f64 {
        let x = point.as_vector();
        let terms: Vec<f64> = self
            .evaluate(&x)
            .iter()
            .zip(&self.components)
            .map(|(e, c)| c.weight.ln() + e.log_density)
            .collect();
        log_sum_exp(&terms)
    }

    fn validate_point(point: &JointPoint) -> Result<Vec6, ModelError> {
        let x = point.as_vector();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidPoint("non-finite component".into()));
        }
        if x.iter().any(|v| *v < 0.0) {
            return Err(ModelError::InvalidPoint("negative magnitude".into()));
        }
        Ok(x)
    }

    fn initial_covariance(&self) -> Mat6 {
        let s = self.config.scale_vector() * self.config.initial_covariance_scale;
        Mat6::from_diagonal(&s.component_mul(&s))
    }

    fn spawn(&mut self, x: Vec6) {
        self.components.push(Component {
            weight: 0.0,
            mean: x,
            covariance: self.initial_covariance(),
            posterior_sum: 1.0,
            age: 1,
        });
        while self.components.len() > self.config.max_components {
            self.merge_closest_pair();
        }
        self.renormalize();
    }

    fn renormalize(&mut self) {
        let total: f64 = self.components.iter().map(|c| c.posterior_sum).sum();
        for c in &mut self.components {
            c.weight = c.posterior_sum / total;
        }
    }

    /// Moment-matching merge of the two components with the closest means
    /// (Euclidean distance in scaled units).
    fn merge_closest_pair(&mut self) {
        let n = self.components.len();
        if n < 2 {
            return;
        }
        let scale = self.config.scale_vector();
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..n {
            for j in i + 1..n {
                let d = (self.components[i].mean - self.components[j].mean)
                    .component_div(&scale)
                    .norm_squared();
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (i, j, _) = best;
        let b = self.components.remove(j);
        let a = &mut self.components[i];
        let wa = a.posterior_sum;
        let wb = b.posterior_sum;
        let w = wa + wb;
        let mean = (a.mean * wa + b.mean * wb) / w;
        let da = a.mean - mean;
        let db = b.mean - mean;
        let cov = ((a.covariance + da * da.transpose()) * wa
            + (b.covariance + db * db.transpose()) * wb)
            / w;
        a.mean = mean;
        a.covariance = regularize(&cov, &scale, self.config.min_variance);
        a.posterior_sum = w;
        a.age = a.age.max(b.age);
        self.renormalize();
    }

    /// Incorporate one point: spawn a component if it is novel under every
    /// existing component, otherwise apply a single-pass EM update weighted by
    /// the posterior responsibilities.
    pub fn update(&mut self, point: &JointPoint) -> Result<(), ModelError> {
        if self.frozen {
            return Err(ModelError::Frozen);
        }
        let x = Self::validate_point(point)?;
        if self.components.is_empty() {
            self.spawn(x);
            self.observations += 1;
            return Ok(());
        }
        let evals = self.evaluate(&x);
        let novelty_d2 = -2.0 * self.config.novelty_threshold.ln();
        let novel = evals.iter().all(|e| e.mahalanobis_sq > novelty_d2);
        if novel {
            self.spawn(x);
            self.observations += 1;
            return Ok(());
        }

        let logs: Vec<f64> = evals
            .iter()
            .zip(&self.components)
            .map(|(e, c)| c.weight.ln() + e.log_density)
            .collect();
        let norm = log_sum_exp(&logs);
        let scale = self.config.scale_vector();
        let floor = self.config.min_variance;
        for (c, l) in self.components.iter_mut().zip(&logs) {
            let post = (l - norm).exp();
            c.age += 1;
            if post <= 0.0 {
                continue;
            }
            c.posterior_sum += post;
            let w = post / c.posterior_sum;
            let e = x - c.mean;
            c.mean += e * w;
            let cov = c.covariance * (1.0 - w) + e * e.transpose() * (w * (1.0 - w));
            c.covariance = regularize(&cov, &scale, floor);
        }
        self.renormalize();
        self.observations += 1;
        Ok(())
    }

    /// Per-component conditional of `D` given `s`.
    fn component_conditional(c: &Component, s: &Vec4) -> Option<(f64, Conditional)> {
        let mu_s: Vec4 = c.mean.fixed_rows::<STATE_DIM>(0).into_owned();
        let mu_d: Vec2 = c.mean.fixed_rows::<2>(STATE_DIM).into_owned();
        let s_ss: Mat4 = c
            .covariance
            .fixed_view::<STATE_DIM, STATE_DIM>(0, 0)
            .into_owned();
        let s_ds: SMatrix<f64, 2, STATE_DIM> = c
            .covariance
            .fixed_view::<2, STATE_DIM>(STATE_DIM, 0)
            .into_owned();
        let s_dd: Mat2 = c
            .covariance
            .fixed_view::<2, 2>(STATE_DIM, STATE_DIM)
            .into_owned();
        let chol = Cholesky::new(s_ss)?;
        let (log_marginal, _) = log_gaussian(s, &mu_s, &s_ss)?;
        // gain = Σ_DS Σ_SS⁻¹, computed as (Σ_SS⁻¹ Σ_SD)ᵀ
        let gain = chol.solve(&s_ds.transpose()).transpose();
        let mean = mu_d + gain * (s - mu_s);
        let covariance = s_dd - gain * s_ds.transpose();
        Some((log_marginal, Conditional { mean, covariance }))
    }

    /// Gaussian mixture regression of `D` given `s` without clamping.
    pub fn conditional(&self, s: &FeatureState) -> Option<Conditional> {
        if self.components.is_empty() {
            return None;
        }
        let sv = s.as_vector();
        let parts: Vec<(f64, Conditional)> = self
            .components
            .iter()
            .filter_map(|c| {
                Self::component_conditional(c, &sv).map(|(lm, cond)| (c.weight.ln() + lm, cond))
            })
            .collect();
        if parts.is_empty() {
            return None;
        }
        let logs: Vec<f64> = parts.iter().map(|(l, _)| *l).collect();
        let norm = log_sum_exp(&logs);
        let resp: Vec<f64> = if norm.is_finite() {
            logs.iter().map(|l| (l - norm).exp()).collect()
        } else {
            // Far outside every component: fall back to the prior weights.
            let total: f64 = self.components.iter().map(|c| c.weight).sum();
            self.components.iter().map(|c| c.weight / total).collect()
        };
        let mut mean = Vec2::zeros();
        let mut second = Mat2::zeros();
        for (h, (_, cond)) in resp.iter().zip(&parts) {
            mean += cond.mean * *h;
            second += (cond.covariance + cond.mean * cond.mean.transpose()) * *h;
        }
        let covariance = second - mean * mean.transpose();
        Some(Conditional { mean, covariance })
    }

    /// One-step prediction `S_t ↦ D_{t+1}`; `None` for an empty model.
    pub fn predict(&self, s: &FeatureState) -> Option<Prediction> {
        self.conditional(s).map(|c| Prediction {
            effect: InteractionEffect {
                force_mag: c.mean[0].max(0.0),
                torque_mag: c.mean[1].max(0.0),
            },
            variance: c.covariance,
        })
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        serde_json::to_string(self).map_err(|e| ModelError::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: Self = serde_json::from_str(text).map_err(|e| ModelError::Serde(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Version {
                found: m.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        m.config.validate()?;
        Ok(m)
    }
}

/// Symmetrise and clamp eigenvalues (in scaled coordinates) to `floor`.
pub(crate) fn regularize(cov: &Mat6, scale: &Vec6, floor: f64) -> Mat6 {
    let inv = Mat6::from_diagonal(&scale.map(|s| 1.0 / s));
    let sc = Mat6::from_diagonal(scale);
    let scaled = inv * cov * inv;
    let sym = (scaled + scaled.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().all(|l| *l >= floor) {
        return sc * sym * sc;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let rebuilt = eig.eigenvectors * Mat6::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    let rebuilt = (rebuilt + rebuilt.transpose()) * 0.5;
    sc * rebuilt * sc
}
