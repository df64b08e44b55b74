//! Trial metrics derived from the tick log.

use std::collections::BTreeMap;

use avic_core::anticipation::impact_force;
use serde::{Deserialize, Serialize};

use crate::log::TickRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub dt: f64,
    pub impact_window: usize,
    pub baseline_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactImpact {
    pub contact: Option<usize>,
    pub tick: u64,
    /// Peak normal force after contact minus the pre-contact baseline (N).
    pub peak_force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPeak {
    pub region: usize,
    /// Ticks from region entry to its exit or the end of the impact window.
    pub ticks: usize,
    pub peak_acceleration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeChange {
    pub tick: u64,
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub ticks: usize,
    pub duration: f64,
    pub rms_tracking_error: f64,
    pub max_acceleration: f64,
    pub max_jerk: f64,
    /// Time with the transition-phase controller weighted in (s).
    pub transition_time: f64,
    pub impacts: Vec<ContactImpact>,
    pub region_peaks: Vec<RegionPeak>,
    pub mode_ids: Vec<usize>,
    pub mode_changes: Vec<ModeChange>,
    pub prediction_rmse: Option<f64>,
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Finite-difference acceleration magnitude per tick (0 on the first).
pub fn accelerations(rows: &[TickRow], dt: f64) -> Vec<f64> {
    accel_vectors(rows, dt).iter().map(|a| norm(*a)).collect()
}

fn accel_vectors(rows: &[TickRow], dt: f64) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; rows.len()];
    for k in 1..rows.len() {
        let (a, b) = (rows[k - 1].velocity(), rows[k].velocity());
        out[k] = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt, (b[2] - a[2]) / dt];
    }
    out
}

/// Peak acceleration magnitude over ticks `from..to` (clamped).
pub fn peak_acceleration(rows: &[TickRow], dt: f64, from: usize, to: usize) -> f64 {
    let acc = accelerations(rows, dt);
    let to = to.min(acc.len());
    acc.get(from.min(to)..to)
        .map_or(0.0, |s| s.iter().copied().fold(0.0, f64::max))
}

/// RMS of predicted minus measured force magnitude over ticks with a
/// prediction, restricted by `keep`.
pub fn prediction_rmse(rows: &[TickRow], keep: impl Fn(&TickRow) -> bool) -> Option<f64> {
    let (sum, n) = rows
        .iter()
        .filter(|r| keep(r))
        .filter_map(|r| r.pred_f.map(|p| (p - r.meas_f).powi(2)))
        .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Impact forces at every logged impact contact.
pub fn impacts(rows: &[TickRow], params: &MetricParams) -> Vec<ContactImpact> {
    let mut out = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        if r.contact_kind.as_deref() != Some("impact") {
            continue;
        }
        let Some(n) = r.normal() else { continue };
        let lo = k.saturating_sub(params.baseline_window);
        let hi = (k + params.impact_window).min(rows.len());
        let series: Vec<f64> = rows[lo..hi]
            .iter()
            .map(|q| {
                let f = q.force();
                -(n[0] * f[0] + n[1] * f[1] + n[2] * f[2])
            })
            .collect();
        out.push(ContactImpact {
            contact: r.contact,
            tick: r.tick,
            peak_force: impact_force(
                &series,
                k - lo,
                params.impact_window,
                params.baseline_window,
            ),
        });
    }
    out
}

impl TrialReport {
    /// Compute the report of one trial from its rows.
    pub fn from_rows(trial: usize, rows: &[TickRow], params: &MetricParams) -> Self {
        let dt = params.dt;
        let acc = accel_vectors(rows, dt);
        let acc_mag: Vec<f64> = acc.iter().map(|a| norm(*a)).collect();
        let mut max_jerk: f64 = 0.0;
        for k in 2..acc.len() {
            let j = [
                (acc[k][0] - acc[k - 1][0]) / dt,
                (acc[k][1] - acc[k - 1][1]) / dt,
                (acc[k][2] - acc[k - 1][2]) / dt,
            ];
            max_jerk = max_jerk.max(norm(j));
        }
        let sq: f64 = rows
            .iter()
            .map(|r| (r.tx - r.px).powi(2) + (r.ty - r.py).powi(2) + (r.tz - r.pz).powi(2))
            .sum();
        let rms = if rows.is_empty() {
            0.0
        } else {
            (sq / rows.len() as f64).sqrt()
        };

        // A region spans from its first to its last logged tick, extended
        // over the impact window of a contact attributed to it.
        let mut regions: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (k, r) in rows.iter().enumerate() {
            if let Some(id) = r.region {
                let e = regions.entry(id).or_insert((k, k));
                e.1 = k;
            }
        }
        for (k, r) in rows.iter().enumerate() {
            if r.contact_kind.as_deref() != Some("impact") {
                continue;
            }
            if let Some(e) = r.contact.and_then(|id| regions.get_mut(&id)) {
                e.1 = e.1.max((k + params.impact_window).min(rows.len()) - 1);
            }
        }
        let mut mode_changes = Vec::new();
        let mut last = None;
        for r in rows {
            if r.mode.is_some() && r.mode != last {
                mode_changes.push(ModeChange {
                    tick: r.tick,
                    mode: r.mode.unwrap_or_default(),
                });
                last = r.mode;
            }
        }
        let mut mode_ids: Vec<usize> = rows.iter().filter_map(|r| r.mode).collect();
        mode_ids.sort_unstable();
        mode_ids.dedup();

        Self {
            trial,
            ticks: rows.len(),
            duration: rows.len() as f64 * dt,
            rms_tracking_error: rms,
            max_acceleration: acc_mag.iter().copied().fold(0.0, f64::max),
            max_jerk,
            transition_time: rows.iter().filter(|r| r.alpha > 0.0).count() as f64 * dt,
            impacts: impacts(rows, params),
            region_peaks: regions
                .into_iter()
                .map(|(region, (from, to))| RegionPeak {
                    region,
                    ticks: to + 1 - from,
                    peak_acceleration: acc_mag[from..=to].iter().copied().fold(0.0, f64::max),
                })
                .collect(),
            mode_ids,
            mode_changes,
            prediction_rmse: prediction_rmse(rows, |_| true),
        }
    }
}
