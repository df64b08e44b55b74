//! Smooth velocity profile, speed schedules and plan retiming.

use std::time::Instant;

use avic_core::anticipation::TransitionRegion;
use avic_core::plan::{MotionPlan, PlanSpec, SegmentSpec, SpeedPiece};
use avic_core::transition::{retime_plan, velocity_profile, RetimeParams, VelocityProfileParams};
use nalgebra::Vector3;
use proptest::prelude::*;

/// v(τ) for 1.2 → 0.5 at τ = 0, 0.1, ..., 1, evaluated in 40-digit decimal
/// arithmetic from e^{-1/τ} / (e^{-1/τ} + e^{-1/(1-τ)}).
const GOLDEN: [(f64, f64); 11] = [
    (0.0, 1.2),
    (0.1, 1.1999034743455885),
    (0.2, 1.183915841062982),
    (0.3, 1.1093006714202058),
    (0.4, 0.9879414987757851),
    (0.5, 0.85),
    (0.6, 0.7120585012242149),
    (0.7, 0.5906993285797941),
    (0.8, 0.516084158937018),
    (0.9, 0.5000965256544114),
    (1.0, 0.5),
];

#[test]
fn golden_series_for_slowdown() {
    let start = Instant::now();
    for (tau, v) in GOLDEN {
        let got = velocity_profile(1.2, 0.5, tau);
        assert!((got - v).abs() < 1e-12, "tau {tau}: {got} vs {v}");
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

/// k-th forward difference at `x` with step `h`, divided by h^k.
fn forward_difference(f: impl Fn(f64) -> f64, x: f64, h: f64, k: u32) -> f64 {
    let mut binom = 1.0;
    let mut sum = 0.0;
    for j in 0..=k {
        let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        sum += sign * binom * f(x + j as f64 * h);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    sum / h.powi(k as i32)
}

#[test]
fn derivatives_vanish_at_both_ends() {
    let f = |t: f64| velocity_profile(1.2, 0.5, t);
    let h = 0.01;
    for k in 1..=3 {
        let at_start = forward_difference(f, 0.0, h, k);
        let at_end = forward_difference(f, 1.0, -h, k);
        assert!(at_start.abs() < 1e-6, "order {k} at 0: {at_start:e}");
        assert!(at_end.abs() < 1e-6, "order {k} at 1: {at_end:e}");
    }
}

#[test]
fn profile_params_use_normalised_time() {
    let p = VelocityProfileParams::new(1.2, 0.5, 2.0, 2.5).unwrap();
    assert_eq!(p.tau(2.25), 0.5);
    assert_eq!(p.velocity_at(2.25), 0.85);
    assert_eq!(p.velocity_at(1.0), 1.2);
    assert_eq!(p.velocity_at(3.0), 0.5);
    assert!(VelocityProfileParams::new(1.0, 0.5, 1.0, 1.0).is_none());
    assert!(VelocityProfileParams::new(-1.0, 0.5, 0.0, 1.0).is_none());
}

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn transition_distance_matches_quadrature() {
    let p = VelocityProfileParams::new(1.2, 0.5, 0.3, 0.6).unwrap();
    let q = simpson(|t| p.velocity_at(t), 0.3, 0.6, 20_000);
    assert!((p.transition_distance() - q).abs() < 1e-10);
    let piece = SpeedPiece {
        duration: 0.4,
        v0: 0.0,
        v1: 0.9,
    };
    let q = simpson(|t| piece.speed_at(t), 0.0, 0.4, 20_000);
    assert!((piece.distance() - q).abs() < 1e-10);
}

proptest! {
    #[test]
    fn midpoint_symmetry(v1 in 0.0..5.0f64, v2 in 0.0..5.0f64, tau in 0.0..=1.0f64) {
        let s = velocity_profile(v1, v2, tau) + velocity_profile(v1, v2, 1.0 - tau);
        prop_assert!((s - (v1 + v2)).abs() < 1e-12);
    }

    #[test]
    fn stays_between_and_monotone(v1 in 0.0..5.0f64, v2 in 0.0..5.0f64, a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x, y) = (velocity_profile(v1, v2, lo), velocity_profile(v1, v2, hi));
        prop_assert!(x >= v1.min(v2) - 1e-12 && x <= v1.max(v2) + 1e-12);
        if v2 <= v1 {
            prop_assert!(y <= x + 1e-12);
        } else {
            prop_assert!(y >= x - 1e-12);
        }
    }
}

fn approach_plan(speed: f64) -> MotionPlan {
    let spec = PlanSpec {
        start: Vector3::zeros(),
        segments: vec![
            SegmentSpec {
                to: Vector3::new(0.6, 0.0, 0.0),
                speed,
                force_axes: [false; 3],
                force_target: Vector3::zeros(),
                guarded: true,
                accel_time: 0.2,
                dwell: 0.1,
                schedule: None,
            },
            SegmentSpec {
                to: Vector3::zeros(),
                speed: 0.5,
                force_axes: [false; 3],
                force_target: Vector3::zeros(),
                guarded: false,
                accel_time: 0.2,
                dwell: 0.0,
                schedule: None,
            },
        ],
    };
    MotionPlan::build(&spec, 1e-3).unwrap()
}

fn region(entry: f64, exit: f64) -> TransitionRegion {
    TransitionRegion {
        segment: 0,
        entry_arclength: entry,
        exit_arclength: exit,
        entry_point: Vector3::new(entry, 0.0, 0.0),
        exit_point: Vector3::new(exit, 0.0, 0.0),
        k_sigma: 2.0,
    }
}

/// Arc length covered by the schedule up to time `t`, by Simpson quadrature
/// of each piece.
fn schedule_distance(pieces: &[SpeedPiece], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut s = 0.0;
    for p in pieces {
        let span = (t - acc).clamp(0.0, p.duration);
        if span > 0.0 {
            s += simpson(|u| p.speed_at(u), 0.0, span, 2000);
        }
        acc += p.duration;
    }
    s
}

#[test]
fn retime_reaches_approach_speed_at_region_entry() {
    let plan = approach_plan(1.2);
    let out = retime_plan(
        &plan,
        &region(0.5, 0.56),
        &RetimeParams {
            approach_speed: 0.5,
            transition_duration: 0.2,
            restore: false,
        },
    );
    assert!(!out.compressed);
    let pieces = &out.plan.segments[0].pieces;
    let k = pieces
        .iter()
        .position(|p| p.v0 == 1.2 && p.v1 == 0.5)
        .expect("slow-down piece");
    let t_entry: f64 = pieces[..=k].iter().map(|p| p.duration).sum();
    let t_start = t_entry - pieces[k].duration;
    assert!((schedule_distance(pieces, t_entry) - 0.5).abs() < 1e-9);
    assert!((schedule_distance(pieces, t_start) - out.slowdown_start).abs() < 1e-9);
    let total = schedule_distance(pieces, f64::INFINITY);
    assert!((total - 0.6).abs() < 1e-9);

    // Sampled plan: target speed at the entry tick equals the approach speed.
    let seg = &out.plan.segments[0];
    let entry_sample = out.plan.samples[seg.first_sample..seg.end_sample]
        .iter()
        .find(|p| p.position.x >= 0.5)
        .unwrap();
    assert!((entry_sample.velocity.norm() - 0.5).abs() < 1e-6);
    assert!((entry_sample.time - t_entry).abs() <= 1e-3 + 1e-12);
}

#[test]
fn retime_compresses_when_entry_is_close() {
    let plan = approach_plan(1.2);
    let out = retime_plan(
        &plan,
        &region(0.2, 0.3),
        &RetimeParams {
            approach_speed: 0.5,
            transition_duration: 0.3,
            restore: false,
        },
    );
    assert!(out.compressed);
    let pieces = &out.plan.segments[0].pieces;
    let total = schedule_distance(pieces, f64::INFINITY);
    assert!((total - 0.6).abs() < 1e-9);
    let end_of_slowdown: f64 = pieces[..2].iter().map(|p| p.duration).sum();
    assert!((schedule_distance(pieces, end_of_slowdown) - 0.2).abs() < 1e-9);
    assert_eq!(pieces[1].v1, 0.5);
}

#[test]
fn retimed_plan_round_trips_through_spec() {
    let plan = approach_plan(1.2);
    let out = retime_plan(
        &plan,
        &region(0.5, 0.56),
        &RetimeParams {
            approach_speed: 0.5,
            transition_duration: 0.2,
            restore: true,
        },
    );
    let spec = out.plan.to_spec();
    assert!(spec.segments[0].schedule.is_some());
    assert!(spec.segments[1].schedule.is_none());
    let rebuilt = MotionPlan::build(&spec, 1e-3).unwrap();
    assert_eq!(rebuilt.samples.len(), out.plan.samples.len());
    for (a, b) in rebuilt.samples.iter().zip(&out.plan.samples) {
        assert!((a.position - b.position).amax() < 1e-12);
        assert!((a.velocity - b.velocity).amax() < 1e-12);
    }
    assert_eq!(MotionPlan::build(&plan.to_spec(), 1e-3).unwrap(), plan);
}

#[test]
fn schedule_that_misses_the_segment_length_is_rejected() {
    let mut spec = approach_plan(1.0).to_spec();
    spec.segments[0].schedule = Some(vec![SpeedPiece {
        duration: 1.0,
        v0: 0.5,
        v1: 0.5,
    }]);
    assert!(MotionPlan::build(&spec, 1e-3).is_err());
}
