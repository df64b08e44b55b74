//! Paired comparison of two report sets.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::metrics::TrialReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Metric {
    RmsTrackingError,
    MaxAcceleration,
    MaxJerk,
    TransitionTime,
    FirstImpactForce,
    PredictionRmse,
    Duration,
}

impl Metric {
    pub fn of(self, r: &TrialReport) -> Option<f64> {
        match self {
            Metric::RmsTrackingError => Some(r.rms_tracking_error),
            Metric::MaxAcceleration => Some(r.max_acceleration),
            Metric::MaxJerk => Some(r.max_jerk),
            Metric::TransitionTime => Some(r.transition_time),
            Metric::FirstImpactForce => r.impacts.first().map(|i| i.peak_force),
            Metric::PredictionRmse => r.prediction_rmse,
            Metric::Duration => Some(r.duration),
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Metric as clap::ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub trial: usize,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `b − a`.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: Metric,
    pub rows: Vec<ComparisonRow>,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub mean_delta: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Compare `b` against `a` trial by trial over their common prefix.
pub fn compare(a: &[TrialReport], b: &[TrialReport], metric: Metric) -> Comparison {
    if a.len() != b.len() {
        warn!(
            "report sets differ in length ({} vs {}); comparing the first {}",
            a.len(),
            b.len(),
            a.len().min(b.len())
        );
    }
    let rows: Vec<ComparisonRow> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(trial, (ra, rb))| {
            let (va, vb) = (metric.of(ra), metric.of(rb));
            ComparisonRow {
                trial,
                a: va,
                b: vb,
                delta: va.zip(vb).map(|(x, y)| y - x),
            }
        })
        .collect();
    Comparison {
        metric,
        mean_a: mean(rows.iter().filter_map(|r| r.a)),
        mean_b: mean(rows.iter().filter_map(|r| r.b)),
        mean_delta: mean(rows.iter().filter_map(|r| r.delta)),
        rows,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "metric: {:?}", self.metric)?;
        writeln!(
            f,
            "{:>5}  {:>14}  {:>14}  {:>14}",
            "trial", "a", "b", "b - a"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>5}  {:>14}  {:>14}  {:>14}",
                r.trial,
                cell(r.a),
                cell(r.b),
                cell(r.delta)
            )?;
        }
        writeln!(
            f,
            "{:>5}  {:>14}  {:>14}  {:>14}",
            "mean",
            cell(self.mean_a),
            cell(self.mean_b),
            cell(self.mean_delta)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(trial: usize, rms: f64) -> TrialReport {
        TrialReport {
            trial,
            ticks: 10,
            duration: 0.01,
            rms_tracking_error: rms,
            max_acceleration: 1.0,
            max_jerk: 2.0,
            transition_time: 0.0,
            impacts: Vec::new(),
            region_peaks: Vec::new(),
            mode_ids: Vec::new(),
            mode_changes: Vec::new(),
            prediction_rmse: None,
        }
    }

    #[test]
    fn identical_sets_have_zero_delta() {
        let a = vec![report(0, 0.1), report(1, 0.2)];
        let c = compare(&a, &a, Metric::RmsTrackingError);
        assert!(c.rows.iter().all(|r| r.delta == Some(0.0)));
        assert_eq!(c.mean_delta, Some(0.0));
    }

    #[test]
    fn common_prefix_and_missing_values() {
        let a = vec![report(0, 0.1), report(1, 0.2)];
        let b = vec![report(0, 0.3)];
        let c = compare(&a, &b, Metric::RmsTrackingError);
        assert_eq!(c.rows.len(), 1);
        assert!((c.rows[0].delta.unwrap() - 0.2).abs() < 1e-15);
        let c = compare(&a, &b, Metric::FirstImpactForce);
        assert_eq!(c.rows[0].delta, None);
        assert_eq!(c.mean_delta, None);
        assert_eq!("max_jerk".parse::<Metric>(), Ok(Metric::MaxJerk));
    }
}
