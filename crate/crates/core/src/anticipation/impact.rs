use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpactConfig {
    /// Learning rate (m/(s·N)).
    pub beta: f64,
    /// Desired peak impact force (N).
    pub force_target: f64,
    /// Lower clamp on the approach speed (m/s).
    #[serde(default = "default_min_speed")]
    pub min_speed: f64,
    /// Invert the linear fit once it spans this speed range (m/s).
    #[serde(default = "default_fit_span")]
    pub fit_span: f64,
    #[serde(default = "default_true")]
    pub use_fit: bool,
}

fn default_min_speed() -> f64 {
    1e-3
}

fn default_fit_span() -> f64 {
    0.005
}

fn default_true() -> bool {
    true
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self {
            beta: 0.002,
            force_target: 8.0,
            min_speed: default_min_speed(),
            fit_span: default_fit_span(),
            use_fit: true,
        }
    }
}

/// Approach-speed learner for one impact contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactModel {
    pub config: ImpactConfig,
    pub approach_speed: f64,
    pub plan_speed: f64,
    /// Observed `(approach speed, peak force)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl ImpactModel {
    pub fn new(config: ImpactConfig, initial_speed: f64, plan_speed: f64) -> Self {
        let mut m = Self {
            config,
            approach_speed: initial_speed,
            plan_speed,
            points: Vec::new(),
        };
        m.approach_speed = m.clamp(initial_speed);
        m
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.config.min_speed.min(self.plan_speed), self.plan_speed)
    }

    /// Least-squares `(slope, intercept)` of force against speed, when the
    /// recorded speeds span at least `fit_span`.
    pub fn fit(&self) -> Option<(f64, f64)> {
        if self.points.len() < 2 {
            return None;
        }
        let (lo, hi) = self
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(v, _)| {
                (l.min(v), h.max(v))
            });
        if hi - lo < self.config.fit_span {
            return None;
        }
        let n = self.points.len() as f64;
        let mv = self.points.iter().map(|p| p.0).sum::<f64>() / n;
        let mf = self.points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = self.points.iter().map(|p| (p.0 - mv) * (p.1 - mf)).sum();
        let sxx: f64 = self.points.iter().map(|p| (p.0 - mv).powi(2)).sum();
        let slope = sxy / sxx;
        Some((slope, mf - slope * mv))
    }

    /// Speed change prescribed by the learning rule.
    pub fn delta(&self, measured: f64) -> f64 {
        self.config.beta * (self.config.force_target - measured)
    }

    /// Record the impact obtained at the current approach speed and choose
    /// the next one.
    pub fn update(&mut self, measured: f64) -> f64 {
        self.points.push((self.approach_speed, measured));
        let stepped = self.approach_speed + self.delta(measured);
        let next = match self.fit() {
            Some((slope, intercept)) if self.config.use_fit && slope > 0.0 => {
                (self.config.force_target - intercept) / slope
            }
            _ => stepped,
        };
        self.approach_speed = self.clamp(next);
        self.approach_speed
    }
}

/// Peak normal force in `window` samples from `contact` on, minus the mean
/// of the `baseline` samples before it.
pub fn impact_force(normal_force: &[f64], contact: usize, window: usize, baseline: usize) -> f64 {
    if contact >= normal_force.len() {
        return 0.0;
    }
    let b0 = contact.saturating_sub(baseline);
    let base = if contact > b0 {
        normal_force[b0..contact].iter().sum::<f64>() / (contact - b0) as f64
    } else {
        0.0
    };
    let end = (contact + window).min(normal_force.len());
    let peak = normal_force[contact..end]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    peak - base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_and_step() {
        let m = ImpactModel::new(ImpactConfig::default(), 0.05, 0.2);
        assert_eq!(m.delta(8.0), 0.0);
        assert!((m.delta(10.0) + 0.004).abs() < 1e-15);
    }

    #[test]
    fn speed_clamped() {
        let mut m = ImpactModel::new(
            ImpactConfig {
                use_fit: false,
                beta: 1.0,
                ..ImpactConfig::default()
            },
            0.05,
            0.1,
        );
        assert_eq!(m.update(0.0), 0.1);
        assert_eq!(m.update(100.0), 1e-3);
    }

    #[test]
    fn fit_inverts_linear_law() {
        let law = |v: f64| 2.0 + 100.0 * v;
        let cfg = ImpactConfig {
            fit_span: 0.001,
            ..ImpactConfig::default()
        };
        let mut m = ImpactModel::new(cfg, 0.05, 0.2);
        let f = law(m.approach_speed);
        m.update(f);
        let f = law(m.approach_speed);
        let v = m.update(f);
        assert!((v - 0.06).abs() < 1e-12);
        assert!((law(v) - 8.0).abs() < 1e-9);
    }

    #[test]
    fn impact_force_subtracts_baseline() {
        let f = [1.0, 1.0, 1.0, 5.0, 9.0, 4.0, 1.0];
        assert_eq!(impact_force(&f, 3, 3, 3), 8.0);
        assert_eq!(impact_force(&f, 0, 2, 3), 1.0);
        assert_eq!(impact_force(&f, 10, 2, 3), 0.0);
    }
}
