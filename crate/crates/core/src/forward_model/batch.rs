use log::warn;
use serde::{Deserialize, Serialize};

use super::mixture::{regularize, Mat6, Vec6};
use super::{Component, IgmmConfig, JointPoint, MixtureModel, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchFitConfig {
    pub components: usize,
    pub max_iterations: usize,
    /// Stop when the mean log-likelihood improves by less than this.
    pub tolerance: f64,
}

impl Default for BatchFitConfig {
    fn default() -> Self {
        Self {
            components: 4,
            max_iterations: 200,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchFitReport {
    pub iterations: usize,
    pub converged: bool,
    pub mean_log_likelihood: f64,
}

/// Weight, mean and covariance of one component during EM.
type Weighted = (f64, Vec6, Mat6);

fn gauss_logs(x: &Vec6, comps: &[Weighted]) -> Vec<f64> {
    comps
        .iter()
        .map(|(w, m, c)| match nalgebra::Cholesky::new(*c) {
            Some(ch) => {
                let d = x - m;
                let z = ch.l().solve_lower_triangular(&d).unwrap_or(d);
                let log_det: f64 = ch.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
                w.ln()
                    - 0.5 * (z.norm_squared() + 6.0 * (2.0 * std::f64::consts::PI).ln() + log_det)
            }
            None => f64::NEG_INFINITY,
        })
        .collect()
}

fn lse(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Batch EM fit producing a frozen baseline model.
///
/// Means are seeded by farthest-point selection in scaled units, so the fit is
/// deterministic. Covariances are regularised with the model's eigenvalue
/// floor. When EM does not converge within `max_iterations`, the
/// best-likelihood iterate is returned and `converged` is false.
pub fn fit_batch(
    points: &[JointPoint],
    model_config: IgmmConfig,
    fit: &BatchFitConfig,
) -> Result<(MixtureModel, BatchFitReport), ModelError> {
    model_config.validate()?;
    if points.is_empty() {
        return Err(ModelError::NoData);
    }
    if fit.components == 0 {
        return Err(ModelError::InvalidConfig(
            "components must be at least 1".into(),
        ));
    }
    let xs: Vec<Vec6> = points.iter().map(|p| p.as_vector()).collect();
    let n = xs.len();
    let scale = Vec6::from(model_config.dimension_scale);
    let floor = model_config.min_variance;

    let mut seeds: Vec<Vec6> = vec![xs[0]];
    while seeds.len() < fit.components {
        let (idx, dist) = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let d = seeds
                    .iter()
                    .map(|s| (x - s).component_div(&scale).norm_squared())
                    .fold(f64::INFINITY, f64::min);
                (i, d)
            })
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if dist <= 0.0 {
            break;
        }
        seeds.push(xs[idx]);
    }

    let global_mean = xs.iter().fold(Vec6::zeros(), |a, x| a + x) / n as f64;
    let global_cov = xs.iter().fold(Mat6::zeros(), |a, x| {
        a + (x - global_mean) * (x - global_mean).transpose()
    }) / n as f64;
    let init_cov = regularize(&global_cov, &scale, floor);
    let k = seeds.len();
    let mut comps: Vec<Weighted> = seeds
        .into_iter()
        .map(|m| (1.0 / k as f64, m, init_cov))
        .collect();

    let mut best: Option<(f64, Vec<Weighted>)> = None;
    let mut prev_ll = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..fit.max_iterations {
        iterations = it + 1;
        let mut resp = vec![vec![0.0; k]; n];
        let mut ll = 0.0;
        for (i, x) in xs.iter().enumerate() {
            let logs = gauss_logs(x, &comps);
            let norm = lse(&logs);
            ll += norm;
            for j in 0..k {
                resp[i][j] = if norm.is_finite() {
                    (logs[j] - norm).exp()
                } else {
                    1.0 / k as f64
                };
            }
        }
        let mean_ll = ll / n as f64;
        if best.as_ref().is_none_or(|(b, _)| mean_ll > *b) {
            best = Some((mean_ll, comps.clone()));
        }
        if (mean_ll - prev_ll).abs() < fit.tolerance {
            converged = true;
            break;
        }
        prev_ll = mean_ll;

        for (j, comp) in comps.iter_mut().enumerate() {
            let nk: f64 = resp.iter().map(|r| r[j]).sum();
            if nk < 1e-12 {
                // Empty component: leave it in place with a tiny weight.
                comp.0 = 1e-12;
                continue;
            }
            let mean = xs
                .iter()
                .zip(&resp)
                .fold(Vec6::zeros(), |a, (x, r)| a + x * r[j])
                / nk;
            let cov = xs.iter().zip(&resp).fold(Mat6::zeros(), |a, (x, r)| {
                a + (x - mean) * (x - mean).transpose() * r[j]
            }) / nk;
            *comp = (nk / n as f64, mean, regularize(&cov, &scale, floor));
        }
    }

    let (mean_ll, comps) = best.expect("at least one EM iteration");
    if !converged {
        warn!(
            "batch EM did not converge in {} iterations",
            fit.max_iterations
        );
    }
    let components: Vec<Component> = comps
        .into_iter()
        .filter(|(w, _, _)| *w > 1e-9)
        .map(|(w, mean, covariance)| Component {
            weight: w,
            mean,
            covariance,
            posterior_sum: w * n as f64,
            age: n as u64,
        })
        .collect();
    let model = MixtureModel::from_components(model_config, components, n as u64, true)?;
    Ok((
        model,
        BatchFitReport {
            iterations,
            converged,
            mean_log_likelihood: mean_ll,
        },
    ))
}
