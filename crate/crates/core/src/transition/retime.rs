use log::warn;
use serde::{Deserialize, Serialize};

use crate::anticipation::TransitionRegion;
use crate::plan::{MotionPlan, SpeedPiece};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetimeParams {
    /// Speed to reach at the region entry.
    pub approach_speed: f64,
    /// Duration of the speed transition ending at the entry point (s).
    pub transition_duration: f64,
    /// Restore the cruise speed with a mirrored profile after the region exit.
    pub restore: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetimeOutcome {
    pub plan: MotionPlan,
    /// The transition did not fit before the entry and was shortened.
    pub compressed: bool,
    /// Arc length at which the slow-down starts.
    pub slowdown_start: f64,
}

fn cruise(distance: f64, v: f64) -> Option<SpeedPiece> {
    (distance > 1e-12 && v > 0.0).then(|| SpeedPiece {
        duration: distance / v,
        v0: v,
        v1: v,
    })
}

/// Retime the segment guarded by `region` so the speed reaches
/// `approach_speed` exactly at the region entry.
///
/// The path is unchanged; only the speed schedule of that segment is
/// replaced. The slow-down starts at `t1` chosen so that the profile's
/// integrated distance ends on the entry point.
pub fn retime_plan(
    plan: &MotionPlan,
    region: &TransitionRegion,
    params: &RetimeParams,
) -> RetimeOutcome {
    let seg = &plan.segments[region.segment];
    let length = seg.length();
    let v1 = seg
        .pieces
        .iter()
        .map(|p| p.v0.max(p.v1))
        .fold(0.0, f64::max);
    let v2 = params.approach_speed.min(v1);
    if !(v2 > 0.0) || (v1 - v2).abs() < 1e-12 || length <= 0.0 {
        return RetimeOutcome {
            plan: plan.clone(),
            compressed: false,
            slowdown_start: length,
        };
    }
    let ta = seg.spec.accel_time;
    let td = params.transition_duration.max(0.0);
    let s_in = region.entry_arclength.clamp(0.0, length);
    let s_out = region.exit_arclength.clamp(s_in, length);

    let ramp = ta * v1 * 0.5;
    let trans = td * (v1 + v2) * 0.5;
    let mut pieces = Vec::new();
    let mut compressed = false;
    let slowdown_start;
    let mut s;
    if s_in >= ramp + trans && td > 0.0 {
        if ta > 0.0 {
            pieces.push(SpeedPiece {
                duration: ta,
                v0: 0.0,
                v1,
            });
        }
        pieces.extend(cruise(s_in - trans - ramp, v1));
        pieces.push(SpeedPiece {
            duration: td,
            v0: v1,
            v1: v2,
        });
        slowdown_start = s_in - trans;
        s = s_in;
    } else if s_in > ramp + 1e-9 && ta > 0.0 {
        let td_c = 2.0 * (s_in - ramp) / (v1 + v2);
        warn!(
            "retime: transition compressed from {td:.3} s to {td_c:.3} s on segment {}",
            region.segment
        );
        compressed = true;
        pieces.push(SpeedPiece {
            duration: ta,
            v0: 0.0,
            v1,
        });
        pieces.push(SpeedPiece {
            duration: td_c,
            v0: v1,
            v1: v2,
        });
        slowdown_start = ramp;
        s = s_in;
    } else {
        warn!(
            "retime: region entry at {s_in:.3} m leaves no room to slow down on segment {}",
            region.segment
        );
        compressed = true;
        let ta2 = if ta > 0.0 { ta } else { 0.0 };
        if ta2 > 0.0 {
            pieces.push(SpeedPiece {
                duration: ta2,
                v0: 0.0,
                v1: v2,
            });
        }
        slowdown_start = 0.0;
        s = ta2 * v2 * 0.5;
    }

    if s < s_out {
        pieces.extend(cruise(s_out - s, v2));
        s = s_out;
    }
    let remaining = (length - s).max(0.0);
    let restore_dist = trans + ramp;
    if params.restore && td > 0.0 && remaining >= restore_dist {
        pieces.push(SpeedPiece {
            duration: td,
            v0: v2,
            v1,
        });
        pieces.extend(cruise(remaining - restore_dist, v1));
        if ta > 0.0 {
            pieces.push(SpeedPiece {
                duration: ta,
                v0: v1,
                v1: 0.0,
            });
        }
    } else {
        let stop = ta * v2 * 0.5;
        if remaining >= stop {
            pieces.extend(cruise(remaining - stop, v2));
            if ta > 0.0 {
                pieces.push(SpeedPiece {
                    duration: ta,
                    v0: v2,
                    v1: 0.0,
                });
            }
        } else if remaining > 0.0 {
            pieces.push(SpeedPiece {
                duration: 2.0 * remaining / v2,
                v0: v2,
                v1: 0.0,
            });
        }
    }

    let mut out = plan.clone();
    out.segments[region.segment].pieces = pieces;
    out.expand();
    RetimeOutcome {
        plan: out,
        compressed,
        slowdown_start,
    }
}
