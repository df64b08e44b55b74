//! Adaptive impedance law: gain schedule and commanded wrench.

use avic_core::controller::{
    lambda_of_error, stiffness_update, AvicController, DampingRule, ForceGains, GainConfig,
};
use avic_core::plan::PlanSample;
use avic_core::sim::{Environment, EnvironmentSpec, SimConfig, Simulator};
use avic_core::types::{RobotState, Wrench};
use nalgebra::Vector3;
use proptest::prelude::*;

fn gains() -> GainConfig {
    GainConfig {
        kp_free: Vector3::new(200.0, 250.0, 300.0),
        kp_max: Vector3::new(2000.0, 2500.0, 3000.0),
        logistic_rate: 10.0,
        logistic_midpoint: 0.5,
        force_gain: ForceGains::default(),
        damping_rule: DampingRule::QuarterRoot,
        slew_limit: None,
    }
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

proptest! {
    #[test]
    fn gains_stay_in_bounds_for_any_error_stream(errors in prop::collection::vec(prop::option::of(0.0..100.0f64), 1..200)) {
        let cfg = gains();
        let mut c = AvicController::new(cfg.clone()).unwrap();
        let state = RobotState::at_rest(Vector3::zeros());
        let target = PlanSample::motion(0.0, Vector3::new(0.01, 0.0, 0.0), Vector3::zeros(), 0);
        for e in errors {
            c.observe_error(e);
            let out = c
                .command_parts(&state, &target, &Wrench::zero(), &Wrench::zero(), 1e-3, false)
                .unwrap();
            for i in 0..3 {
                prop_assert!(out.kp[i] >= cfg.kp_free[i] && out.kp[i] <= cfg.kp_max[i]);
                prop_assert!((out.kd[i] - (out.kp[i] / 4.0).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn command_matches_the_impedance_formula(
        x in prop::array::uniform3(-0.1..0.1f64),
        v in prop::array::uniform3(-0.5..0.5f64),
        xt in prop::array::uniform3(-0.1..0.1f64),
        vt in prop::array::uniform3(-0.5..0.5f64),
        ff in prop::array::uniform3(-5.0..5.0f64),
        h in prop::array::uniform3(-1.0..1.0f64),
        eps in 0.0..2.0f64,
    ) {
        let cfg = gains();
        let mut c = AvicController::new(cfg.clone()).unwrap();
        c.observe_error(Some(eps));
        let mut state = RobotState::at_rest(v3(x));
        state.linear_velocity = v3(v);
        let target = PlanSample::motion(0.0, v3(xt), v3(vt), 0);
        let u = c
            .command(&state, &target, &Wrench::from_force(v3(ff)), &Wrench::from_force(v3(h)), 1e-3)
            .unwrap();
        let lambda = 1.0 - 1.0 / (1.0 + (-10.0 * (eps - 0.5)).exp());
        for i in 0..3 {
            let kp = cfg.kp_free[i] + (1.0 - lambda) * (cfg.kp_max[i] - cfg.kp_free[i]);
            let kd = (kp / 4.0).sqrt();
            let expected = h[i] + kp * (xt[i] - x[i]) + kd * (vt[i] - v[i]) + lambda * ff[i];
            prop_assert!((u.force[i] - expected).abs() < 1e-9 * (1.0 + expected.abs()));
        }
    }
}

#[test]
fn lambda_schedule_points() {
    let cfg = gains();
    assert_eq!(lambda_of_error(0.5, &cfg), 0.5);
    assert!(1.0 - lambda_of_error(0.0, &cfg) < 1e-2);
    assert!(lambda_of_error(50.0, &cfg) < 1e-12);
    let (kp, kd) = stiffness_update(0.5, &cfg);
    assert_eq!(kp, (cfg.kp_free + cfg.kp_max) / 2.0);
    for i in 0..3 {
        assert!((kd[i] - (kp[i] / 4.0).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn missing_prediction_means_full_stiffness() {
    let cfg = gains();
    let mut c = AvicController::new(cfg.clone()).unwrap();
    c.observe_error(None);
    let state = RobotState::at_rest(Vector3::zeros());
    let target = PlanSample::motion(0.0, Vector3::zeros(), Vector3::zeros(), 0);
    let out = c
        .command_parts(
            &state,
            &target,
            &Wrench::zero(),
            &Wrench::zero(),
            1e-3,
            false,
        )
        .unwrap();
    assert_eq!(out.kp, cfg.kp_max);
    assert_eq!(out.lambda, 0.0);
}

#[test]
fn closed_loop_tracks_a_step_in_free_space() {
    let env = Environment::new(EnvironmentSpec::free_space(1.0 / 16.0)).unwrap();
    let cfg = SimConfig {
        timestep: 1e-3,
        trial_length: 2000,
        noise: None,
        rng_seed: 0,
        max_speed: 5.0,
    };
    let mut sim = Simulator::new(env, cfg, RobotState::at_rest(Vector3::zeros())).unwrap();
    let mut c = AvicController::new(gains()).unwrap();
    let target = PlanSample::motion(0.0, Vector3::new(0.02, -0.01, 0.005), Vector3::zeros(), 0);
    let mut obs = sim.observe();
    for _ in 0..1000 {
        c.observe_error(Some(0.0));
        let u = c
            .command(&obs, &target, &Wrench::zero(), &Wrench::zero(), 1e-3)
            .unwrap();
        obs = sim.step(&u).unwrap();
    }
    assert!((obs.position - target.position).norm() < 1e-6);
}
