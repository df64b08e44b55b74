use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use avic_bench::compare::{compare, Metric};
use avic_bench::export::{export_run, read_summary};
use avic_bench::{run_scenario, ControllerKind, ModelPolicy, RunOptions, RunResult, Scenario};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "avic-bench",
    version,
    about = "Run and compare adaptive impedance control scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its trial reports.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        controller: Option<ControllerKind>,
        #[arg(long, value_enum)]
        model_policy: Option<ModelPolicy>,
        /// Write tick logs, series, mode events and the summary here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit non-zero if a trial fails or a scenario check is violated.
        #[arg(long)]
        check: bool,
    },
    /// Compare two run summaries on one metric.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "rms_tracking_error")]
        metric: Metric,
        #[arg(long)]
        json: bool,
    },
    /// Convert a run summary into a table of trial metrics.
    Export {
        summary: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn print_reports(result: &RunResult) {
    println!(
        "scenario {} ({:?}, {:?}, seed {})",
        result.scenario, result.controller, result.model_policy, result.seed
    );
    println!(
        "{:>5} {:>8} {:>12} {:>12} {:>12} {:>10} {:>12} {:>6}",
        "trial", "time_s", "rms_err_m", "max_acc", "impact1_N", "trans_s", "pred_rmse", "modes"
    );
    for t in &result.trials {
        let r = &t.report;
        println!(
            "{:>5} {:>8.3} {:>12.6} {:>12.3} {:>12} {:>10.3} {:>12} {:>6}{}",
            r.trial,
            r.duration,
            r.rms_tracking_error,
            r.max_acceleration,
            r.impacts
                .first()
                .map_or("-".into(), |i| format!("{:.3}", i.peak_force)),
            r.transition_time,
            r.prediction_rmse.map_or("-".into(), |v| format!("{v:.4}")),
            r.mode_ids.len(),
            t.failure
                .as_ref()
                .map_or(String::new(), |f| format!("  FAILED: {f}")),
        );
    }
}

fn check_run(scenario: &Scenario, result: &RunResult) -> Vec<String> {
    let mut problems: Vec<String> = result
        .trials
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.failure.as_ref().map(|f| format!("trial {i} failed: {f}")))
        .collect();
    for c in &scenario.checks {
        let idx = c.trial.unwrap_or(result.trials.len().saturating_sub(1));
        let Some(t) = result.trials.get(idx) else {
            problems.push(format!("check on missing trial {idx}"));
            continue;
        };
        match c.metric.of(&t.report) {
            None => problems.push(format!("{:?} unavailable on trial {idx}", c.metric)),
            Some(v) => {
                if c.min.is_some_and(|m| v < m) || c.max.is_some_and(|m| v > m) {
                    problems.push(format!(
                        "{:?} = {v} on trial {idx} outside [{:?}, {:?}]",
                        c.metric, c.min, c.max
                    ));
                }
            }
        }
    }
    problems
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            trials,
            controller,
            model_policy,
            out,
            check,
        } => {
            let base = Scenario::load(&scenario)
                .with_context(|| format!("loading {}", scenario.display()))?;
            let s = RunOptions {
                seed,
                trials,
                controller,
                model_policy,
            }
            .apply(&base);
            let result = run_scenario(&s)?;
            print_reports(&result);
            if let Some(dir) = out {
                let files = export_run(&result, &dir, s.timestep)?;
                println!("wrote {} files to {}", files.len(), dir.display());
            }
            if check {
                let problems = check_run(&s, &result);
                for p in &problems {
                    eprintln!("check failed: {p}");
                }
                if !problems.is_empty() {
                    return Ok(ExitCode::FAILURE);
                }
                println!("all checks passed");
            }
        }
        Command::Compare { a, b, metric, json } => {
            let ra = read_summary(&a)?;
            let rb = read_summary(&b)?;
            let c = compare(&ra.reports(), &rb.reports(), metric);
            if json {
                println!("{}", serde_json::to_string_pretty(&c)?);
            } else {
                print!("{c}");
            }
        }
        Command::Export {
            summary,
            format,
            out,
        } => {
            let run = read_summary(&summary)?;
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&run.reports())?,
                Format::Csv => {
                    let mut s = String::from(
                        "trial,ticks,duration,rms_tracking_error,max_acceleration,max_jerk,transition_time,first_impact_force,prediction_rmse,modes\n",
                    );
                    for r in run.reports() {
                        s += &format!(
                            "{},{},{},{},{},{},{},{},{},{}\n",
                            r.trial,
                            r.ticks,
                            r.duration,
                            r.rms_tracking_error,
                            r.max_acceleration,
                            r.max_jerk,
                            r.transition_time,
                            r.impacts
                                .first()
                                .map_or(String::new(), |i| i.peak_force.to_string()),
                            r.prediction_rmse.map_or(String::new(), |v| v.to_string()),
                            r.mode_ids.len()
                        );
                    }
                    s
                }
            };
            match out {
                Some(p) => {
                    std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
