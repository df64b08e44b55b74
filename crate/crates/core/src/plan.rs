//! Time-indexed task-space motion plans.
//!
//! Plans are authored as straight segments with optional force targets and
//! expanded to one sample per control tick. Each segment starts and ends at
//! rest with smooth speed ramps. Guarded segments are expected to end early on
//! a contact; the executor then jumps to the next segment.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transition::velocity_profile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid plan: {0}")]
    Invalid(String),
}

/// Plan target at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSample {
    pub time: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Axes regulated in force rather than motion.
    pub force_axes: [bool; 3],
    /// Force the effector should exert on the environment (sensor convention).
    pub force_target: Vector3<f64>,
    pub segment: usize,
}

impl PlanSample {
    pub fn motion(
        time: f64,
        position: Vector3<f64>,
        velocity: Vector3<f64>,
        segment: usize,
    ) -> Self {
        Self {
            time,
            position,
            velocity,
            force_axes: [false; 3],
            force_target: Vector3::zeros(),
            segment,
        }
    }

    pub fn has_force_target(&self) -> bool {
        self.force_axes.iter().any(|a| *a)
    }
}

fn default_accel_time() -> f64 {
    0.2
}

/// Authoring form of one straight plan segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub to: Vector3<f64>,
    /// Cruise speed (m/s).
    pub speed: f64,
    #[serde(default)]
    pub force_axes: [bool; 3],
    #[serde(default)]
    pub force_target: Vector3<f64>,
    /// The segment is expected to end on a contact before reaching `to`.
    #[serde(default)]
    pub guarded: bool,
    /// Duration of the start/stop speed ramps (s).
    #[serde(default = "default_accel_time")]
    pub accel_time: f64,
    /// Hold time at rest after the segment (s).
    #[serde(default)]
    pub dwell: f64,
    /// Explicit speed schedule replacing the default ramps, e.g. from a
    /// retimed plan. Its distance must equal the segment length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<SpeedPiece>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSpec {
    pub start: Vector3<f64>,
    pub segments: Vec<SegmentSpec>,
}

/// One smooth speed piece: `v0 → v1` over `duration` along the bump profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPiece {
    pub duration: f64,
    pub v0: f64,
    pub v1: f64,
}

impl SpeedPiece {
    pub fn speed_at(&self, t: f64) -> f64 {
        if self.v0 == self.v1 {
            return self.v0;
        }
        velocity_profile(self.v0, self.v1, t / self.duration)
    }

    /// Distance covered; the bump weight integrates to one half.
    pub fn distance(&self) -> f64 {
        self.duration * 0.5 * (self.v0 + self.v1)
    }
}

/// Expanded segment bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub spec: SegmentSpec,
    pub start: Vector3<f64>,
    /// Index of the first sample of this segment.
    pub first_sample: usize,
    /// One past the last sample.
    pub end_sample: usize,
    pub pieces: Vec<SpeedPiece>,
}

impl SegmentInfo {
    pub fn length(&self) -> f64 {
        (self.spec.to - self.start).norm()
    }

    pub fn direction(&self) -> Vector3<f64> {
        let d = self.spec.to - self.start;
        let n = d.norm();
        if n > 0.0 {
            d / n
        } else {
            Vector3::zeros()
        }
    }

    /// Arc length of `p` projected on the segment.
    pub fn arclength_of(&self, p: &Vector3<f64>) -> f64 {
        (p - self.start).dot(&self.direction())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPlan {
    pub dt: f64,
    pub samples: Vec<PlanSample>,
    pub segments: Vec<SegmentInfo>,
}

/// Default speed schedule: ramp up, cruise, ramp down.
pub fn default_pieces(length: f64, speed: f64, accel_time: f64) -> Vec<SpeedPiece> {
    if length <= 0.0 || speed <= 0.0 {
        return Vec::new();
    }
    let mut v = speed;
    let ta = accel_time.max(0.0);
    if ta > 0.0 && ta * v > length {
        v = length / ta;
    }
    let cruise = (length - ta * v) / v;
    let mut pieces = Vec::new();
    if ta > 0.0 {
        pieces.push(SpeedPiece {
            duration: ta,
            v0: 0.0,
            v1: v,
        });
    }
    if cruise > 0.0 {
        pieces.push(SpeedPiece {
            duration: cruise,
            v0: v,
            v1: v,
        });
    }
    if ta > 0.0 {
        pieces.push(SpeedPiece {
            duration: ta,
            v0: v,
            v1: 0.0,
        });
    }
    pieces
}

/// Sample a speed schedule at the control rate and integrate positions with
/// the trapezoidal rule. Returns `(arclength, speed)` per tick, starting at 0.
pub fn integrate_pieces(pieces: &[SpeedPiece], length: f64, dt: f64) -> Vec<(f64, f64)> {
    let total: f64 = pieces.iter().map(|p| p.duration).sum();
    let speed_at = |t: f64| -> f64 {
        let mut acc = 0.0;
        for p in pieces {
            if t < acc + p.duration {
                return p.speed_at(t - acc);
            }
            acc += p.duration;
        }
        pieces.last().map_or(0.0, |p| p.v1)
    };
    let n = (total / dt - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut s = 0.0;
    let mut v_prev = speed_at(0.0);
    out.push((0.0, v_prev));
    for k in 1..=n {
        let t = (k as f64 * dt).min(total);
        let v = speed_at(t);
        s += 0.5 * (v + v_prev) * dt;
        v_prev = v;
        out.push((s.min(length), v));
    }
    if let Some(last) = out.last_mut() {
        last.0 = length;
    }
    out
}

impl MotionPlan {
    pub fn build(spec: &PlanSpec, dt: f64) -> Result<Self, PlanError> {
        if !(dt > 0.0) {
            return Err(PlanError::Invalid("dt must be positive".into()));
        }
        if spec.segments.is_empty() {
            return Err(PlanError::Invalid("plan has no segments".into()));
        }
        let mut start = spec.start;
        let mut infos = Vec::with_capacity(spec.segments.len());
        for (i, seg) in spec.segments.iter().enumerate() {
            if !(seg.speed > 0.0) || seg.accel_time < 0.0 || seg.dwell < 0.0 {
                return Err(PlanError::Invalid(format!(
                    "segment {i} has invalid timing"
                )));
            }
            let length = (seg.to - start).norm();
            let pieces = match &seg.schedule {
                None => default_pieces(length, seg.speed, seg.accel_time),
                Some(p) => {
                    let bad = p
                        .iter()
                        .any(|q| !(q.duration >= 0.0) || q.v0 < 0.0 || q.v1 < 0.0);
                    let distance: f64 = p.iter().map(SpeedPiece::distance).sum();
                    if bad || (distance - length).abs() > 1e-9 * length.max(1.0) {
                        return Err(PlanError::Invalid(format!(
                            "segment {i} schedule covers {distance} m of {length} m"
                        )));
                    }
                    p.clone()
                }
            };
            infos.push(SegmentInfo {
                spec: SegmentSpec {
                    schedule: None,
                    ..seg.clone()
                },
                start,
                first_sample: 0,
                end_sample: 0,
                pieces,
            });
            start = seg.to;
        }
        let mut plan = MotionPlan {
            dt,
            samples: Vec::new(),
            segments: infos,
        };
        plan.expand();
        Ok(plan)
    }

    /// Rebuild the samples from the per-segment speed schedules.
    pub fn expand(&mut self) {
        let dt = self.dt;
        let mut samples = Vec::new();
        for (idx, seg) in self.segments.iter_mut().enumerate() {
            seg.first_sample = samples.len();
            let dir = seg.direction();
            let length = seg.length();
            let profile = integrate_pieces(&seg.pieces, length, dt);
            let base_time = samples.last().map_or(0.0, |s: &PlanSample| s.time + dt);
            let mut push = |k: usize, s: f64, v: f64| {
                samples.push(PlanSample {
                    time: base_time + k as f64 * dt,
                    position: seg.start + dir * s,
                    velocity: dir * v,
                    force_axes: seg.spec.force_axes,
                    force_target: seg.spec.force_target,
                    segment: idx,
                });
            };
            // Later segments start where the previous one ended; drop the
            // repeated start point so the target never stalls for a tick.
            let skip = usize::from(idx > 0 && profile.len() > 1);
            let mut k = 0;
            for (s, v) in profile.iter().skip(skip) {
                push(k, *s, *v);
                k += 1;
            }
            if profile.is_empty() {
                push(0, 0.0, 0.0);
                k = 1;
            }
            let dwell = (seg.spec.dwell / dt).round() as usize;
            for _ in 0..dwell {
                push(k, length, 0.0);
                k += 1;
            }
            seg.end_sample = samples.len();
        }
        self.samples = samples;
    }

    /// Authoring form of this plan. Segments whose speed schedule differs
    /// from the default ramps carry it explicitly, so retimed plans rebuild
    /// to the same samples.
    pub fn to_spec(&self) -> PlanSpec {
        let segments = self
            .segments
            .iter()
            .map(|seg| {
                let default = default_pieces(seg.length(), seg.spec.speed, seg.spec.accel_time);
                SegmentSpec {
                    schedule: (seg.pieces != default).then(|| seg.pieces.clone()),
                    ..seg.spec.clone()
                }
            })
            .collect();
        PlanSpec {
            start: self
                .segments
                .first()
                .map_or_else(Vector3::zeros, |s| s.start),
            segments,
        }
    }

    /// Move the start of `segment` to `start`, restore its default speed
    /// schedule and re-expand. Used after a guarded move stops on contact.
    pub fn reanchor(&mut self, segment: usize, start: Vector3<f64>) {
        let Some(seg) = self.segments.get_mut(segment) else {
            return;
        };
        seg.start = start;
        seg.pieces = default_pieces(seg.length(), seg.spec.speed, seg.spec.accel_time);
        self.expand();
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Plan positions, e.g. for region construction.
    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.samples.iter().map(|s| s.position).collect()
    }

    /// Sample positions of one segment.
    pub fn segment_positions(&self, segment: usize) -> Vec<Vector3<f64>> {
        let s = &self.segments[segment];
        self.samples[s.first_sample..s.end_sample]
            .iter()
            .map(|p| p.position)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PlanSpec {
        PlanSpec {
            start: Vector3::zeros(),
            segments: vec![
                SegmentSpec {
                    to: Vector3::new(0.2, 0.0, 0.0),
                    speed: 0.1,
                    force_axes: [false; 3],
                    force_target: Vector3::zeros(),
                    guarded: false,
                    accel_time: 0.2,
                    dwell: 0.1,
                    schedule: None,
                },
                SegmentSpec {
                    to: Vector3::new(0.2, 0.1, 0.0),
                    speed: 0.05,
                    force_axes: [false, false, true],
                    force_target: Vector3::new(0.0, 0.0, -3.0),
                    guarded: true,
                    accel_time: 0.1,
                    dwell: 0.0,
                    schedule: None,
                },
            ],
        }
    }

    #[test]
    fn expansion_reaches_segment_ends() {
        let plan = MotionPlan::build(&spec(), 1e-3).unwrap();
        let s0 = &plan.segments[0];
        let last0 = plan.samples[s0.end_sample - 1];
        assert_eq!(last0.position, Vector3::new(0.2, 0.0, 0.0));
        assert_eq!(last0.velocity, Vector3::zeros());
        let first1 = plan.samples[plan.segments[1].first_sample];
        assert!(first1.force_axes[2]);
        assert_eq!(
            plan.samples.last().unwrap().position,
            Vector3::new(0.2, 0.1, 0.0)
        );
        // ramp 0.2 s, cruise (0.2 - 0.02)/0.1 = 1.8 s, ramp 0.2 s, dwell 0.1 s
        let n0 = s0.end_sample - s0.first_sample;
        assert_eq!(n0, 2201 + 100);
    }

    #[test]
    fn times_are_strictly_increasing() {
        let plan = MotionPlan::build(&spec(), 1e-3).unwrap();
        for w in plan.samples.windows(2) {
            assert!(w[1].time > w[0].time);
        }
    }

    #[test]
    fn short_segment_lowers_cruise_speed() {
        let p = default_pieces(0.01, 0.1, 0.2);
        let peak = p.iter().map(|x| x.v1.max(x.v0)).fold(0.0, f64::max);
        assert!((peak - 0.05).abs() < 1e-12);
        let d: f64 = p.iter().map(|x| x.distance()).sum();
        assert!((d - 0.01).abs() < 1e-12);
    }

    #[test]
    fn empty_plan_rejected() {
        let s = PlanSpec {
            start: Vector3::zeros(),
            segments: vec![],
        };
        assert!(MotionPlan::build(&s, 1e-3).is_err());
    }
}
