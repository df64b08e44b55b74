//! Writing run artifacts: tick logs, JSON summaries, mode-event logs and
//! plottable series.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use avic_core::plan::PlanSpec;
use serde::{Deserialize, Serialize};

use crate::log::{write_csv, TickRow};
use crate::metrics::accelerations;
use crate::runner::RunResult;
use crate::BenchError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<fs::File, BenchError> {
    fs::File::create(path).map_err(io_err(path))
}

pub fn trial_log_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("trial_{trial}.csv"))
}

/// Summary JSON of a run (reports and estimate records, no tick rows).
pub fn summary_json(result: &RunResult) -> Result<String, BenchError> {
    serde_json::to_string_pretty(result).map_err(|e| BenchError::Serde(e.to_string()))
}

pub fn read_summary(path: &Path) -> Result<RunResult, BenchError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Serde(e.to_string()))
}

/// A plan wrapped as the `[plan]` table of a scenario file.
#[derive(Serialize, Deserialize)]
struct PlanFile {
    plan: PlanSpec,
}

/// Plan as the `[plan]` table used by scenario files.
pub fn plan_toml(plan: &PlanSpec) -> Result<String, BenchError> {
    toml::to_string(&PlanFile { plan: plan.clone() }).map_err(|e| BenchError::Serde(e.to_string()))
}

/// Parse a plan exported by [`plan_toml`].
pub fn parse_plan_toml(text: &str) -> Result<PlanSpec, BenchError> {
    toml::from_str::<PlanFile>(text)
        .map(|f| f.plan)
        .map_err(|e| BenchError::Serde(e.to_string()))
}

/// Time series for plotting: speed, acceleration, force magnitude, λ, kp.
pub fn write_series<W: Write>(rows: &[TickRow], dt: f64, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "time,target_speed,speed,acceleration,force,lambda,kp_x,alpha"
    )?;
    let acc = accelerations(rows, dt);
    for (r, a) in rows.iter().zip(acc) {
        let speed = (r.vx * r.vx + r.vy * r.vy + r.vz * r.vz).sqrt();
        let target = (r.tvx * r.tvx + r.tvy * r.tvy + r.tvz * r.tvz).sqrt();
        let force = (r.fx * r.fx + r.fy * r.fy + r.fz * r.fz).sqrt();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.time, target, speed, a, force, r.lambda, r.kpx, r.alpha
        )?;
    }
    Ok(())
}

/// Write every artifact of `result` into `dir`, creating it if needed.
/// Returns the written paths.
pub fn export_run(result: &RunResult, dir: &Path, dt: f64) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (t, trial) in result.trials.iter().enumerate() {
        let path = trial_log_path(dir, t);
        write_csv(&trial.rows, create(&path)?)?;
        written.push(path);

        let path = dir.join(format!("series_{t}.csv"));
        write_series(&trial.rows, dt, create(&path)?).map_err(io_err(&path))?;
        written.push(path);

        let path = dir.join(format!("mode_events_{t}.jsonl"));
        let mut f = create(&path)?;
        for e in &trial.mode_events {
            let line = serde_json::to_string(e).map_err(|e| BenchError::Serde(e.to_string()))?;
            writeln!(f, "{line}").map_err(io_err(&path))?;
        }
        written.push(path);

        if let Some(plan) = &trial.plan {
            let path = dir.join(format!("plan_{t}.toml"));
            fs::write(&path, plan_toml(plan)?).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    let path = dir.join("summary.json");
    fs::write(&path, summary_json(result)?).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}
