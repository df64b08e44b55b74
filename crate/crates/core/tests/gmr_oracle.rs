//! GMR predictions checked against the Gaussian conditioning identities
//! written in precision (inverse covariance) form.

use std::time::Instant;

use avic_core::forward_model::{Component, FeatureState, IgmmConfig, Mat6, MixtureModel, Vec6};
use nalgebra::{DMatrix, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_config() -> IgmmConfig {
    IgmmConfig {
        dimension_scale: [1.0; 6],
        min_variance: 1e-6,
        ..IgmmConfig::default()
    }
}

fn random_spd(rng: &mut ChaCha8Rng) -> Mat6 {
    let a = Mat6::from_fn(|_, _| rng.random_range(-1.0..1.0));
    a * a.transpose() + Mat6::identity() * 0.5
}

fn random_mean(rng: &mut ChaCha8Rng) -> Vec6 {
    Vec6::from_fn(|_, _| rng.random_range(-2.0..2.0))
}

fn random_state(rng: &mut ChaCha8Rng) -> FeatureState {
    FeatureState {
        lin_speed: rng.random_range(-2.0..2.0),
        ang_speed: rng.random_range(-2.0..2.0),
        force_mag: rng.random_range(-2.0..2.0),
        torque_mag: rng.random_range(-2.0..2.0),
    }
}

/// Conditional of the last two coordinates given the first four, from the
/// precision matrix: cov = Λ_dd⁻¹, mean = μ_d − Λ_dd⁻¹ Λ_ds (s − μ_s).
fn precision_conditional(
    mean: &Vec6,
    cov: &Mat6,
    s: &SVector<f64, 4>,
) -> (SVector<f64, 2>, SMatrix<f64, 2, 2>) {
    let lambda = DMatrix::from_column_slice(6, 6, cov.as_slice())
        .try_inverse()
        .expect("SPD");
    let l_dd = SMatrix::<f64, 2, 2>::from_fn(|i, j| lambda[(4 + i, 4 + j)]);
    let l_ds = SMatrix::<f64, 2, 4>::from_fn(|i, j| lambda[(4 + i, j)]);
    let c = l_dd.try_inverse().expect("SPD block");
    let mu_s = SVector::<f64, 4>::from_fn(|i, _| mean[i]);
    let mu_d = SVector::<f64, 2>::from_fn(|i, _| mean[4 + i]);
    (mu_d - c * l_ds * (s - mu_s), c)
}

fn component(weight: f64, mean: Vec6, covariance: Mat6) -> Component {
    Component {
        weight,
        mean,
        covariance,
        posterior_sum: 1.0,
        age: 1,
    }
}

#[test]
fn single_gaussian_matches_closed_form_conditional() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mean = random_mean(&mut rng);
        let cov = random_spd(&mut rng);
        let model =
            MixtureModel::from_components(unit_config(), vec![component(1.0, mean, cov)], 1, true)
                .unwrap();
        let s = random_state(&mut rng);
        let got = model.conditional(&s).unwrap();
        let (m, c) = precision_conditional(&mean, &cov, &s.as_vector());
        worst = worst
            .max((got.mean - m).amax())
            .max((got.covariance - c).amax());
    }
    assert!(worst < 1e-9, "max deviation {worst:e}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

/// Marginal density of the conditioning block, evaluated with an explicit
/// inverse and determinant.
fn marginal_density(mean: &Vec6, cov: &Mat6, s: &SVector<f64, 4>) -> f64 {
    let c = SMatrix::<f64, 4, 4>::from_fn(|i, j| cov[(i, j)]);
    let mu = SVector::<f64, 4>::from_fn(|i, _| mean[i]);
    let d = s - mu;
    let q = (d.transpose() * c.try_inverse().unwrap() * d)[0];
    (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powi(4) * c.determinant()).sqrt()
}

#[test]
fn two_component_mean_is_responsibility_weighted() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let (m1, c1) = (random_mean(&mut rng) * 0.3, random_spd(&mut rng));
        let (m2, c2) = (random_mean(&mut rng) * 0.3, random_spd(&mut rng));
        let (w1, w2) = (0.3, 0.7);
        let model = MixtureModel::from_components(
            unit_config(),
            vec![component(w1, m1, c1), component(w2, m2, c2)],
            2,
            true,
        )
        .unwrap();
        let s = random_state(&mut rng);
        let sv = s.as_vector();
        let (a1, _) = precision_conditional(&m1, &c1, &sv);
        let (a2, _) = precision_conditional(&m2, &c2, &sv);
        let p1 = w1 * marginal_density(&m1, &c1, &sv);
        let p2 = w2 * marginal_density(&m2, &c2, &sv);
        let expected = (a1 * p1 + a2 * p2) / (p1 + p2);
        let got = model.conditional(&s).unwrap().mean;
        assert!((got - expected).amax() < 1e-9, "{got} vs {expected}");
    }
}

#[test]
fn prediction_clamps_magnitudes_at_zero() {
    let mut mean = Vec6::zeros();
    mean[4] = -3.0;
    mean[5] = -1.0;
    let model = MixtureModel::from_components(
        unit_config(),
        vec![component(1.0, mean, Mat6::identity())],
        1,
        true,
    )
    .unwrap();
    let p = model.predict(&FeatureState::default()).unwrap();
    assert_eq!(p.effect.force_mag, 0.0);
    assert_eq!(p.effect.torque_mag, 0.0);
}
