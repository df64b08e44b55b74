//! Multi-trial scenario execution.

use std::time::Instant;

use avic_core::anticipation::{
    nearest_estimate, region_of, ContactEstimate, ImpactModel, TransitionRegion,
};
use avic_core::controller::{fixed_gain_control, impedance_law};
use avic_core::forward_model::{fit_batch, JointPoint};
use avic_core::mode::{ClusterSummary, ModeEvent, ModeManager, ModeRegistry, PhaseKind, Trigger};
use avic_core::plan::{MotionPlan, PlanSample, PlanSpec};
use avic_core::sim::{
    contact_event, ContactObservation, Environment, EnvironmentSpec, SimConfig, Simulator,
};
use avic_core::transition::{blend, retime_plan, transition_gains, RetimeParams};
use avic_core::{RobotState, TransitionType, Wrench};
use log::{info, warn};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::log::TickRow;
use crate::metrics::{MetricParams, TrialReport};
use crate::scenario::{AnticipationSpec, ControllerKind, ModelPolicy, Scenario};
use crate::BenchError;

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub controller: Option<ControllerKind>,
    pub model_policy: Option<ModelPolicy>,
}

impl RunOptions {
    pub fn apply(&self, scenario: &Scenario) -> Scenario {
        let mut s = scenario.clone();
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.trials {
            s.trials = v.max(1);
        }
        if let Some(v) = self.controller {
            s.controller = v;
        }
        if let Some(v) = self.model_policy {
            s.model_policy = v;
        }
        s
    }
}

/// Per-trial record of one contact estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub index: usize,
    pub kind: TransitionType,
    pub anchor: usize,
    pub spawned: bool,
    pub prior_mean: Vector3<f64>,
    pub prior_trace: f64,
    pub region_length: Option<f64>,
    pub approach_speed: Option<f64>,
    pub observed: Option<Vector3<f64>>,
    pub impact_force: Option<f64>,
    pub posterior_mean: Vector3<f64>,
    pub posterior_trace: f64,
    /// Distances to ground truth; oracle-assisted.
    pub oracle_prior_error: Option<f64>,
    pub oracle_posterior_error: Option<f64>,
}

/// Speed change inserted before an anticipated impact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetimeRecord {
    pub contact: usize,
    pub segment: usize,
    pub approach_speed: f64,
    /// Arc length and plan time where the slow-down starts.
    pub slowdown_start: f64,
    pub slowdown_time: f64,
    /// Arc length and plan time of the region entry.
    pub entry_arclength: f64,
    pub entry_time: f64,
    pub compressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub report: TrialReport,
    pub estimates: Vec<EstimateRecord>,
    pub retimes: Vec<RetimeRecord>,
    pub failure: Option<String>,
    pub runtime_s: f64,
    #[serde(skip)]
    pub rows: Vec<TickRow>,
    #[serde(skip)]
    pub mode_events: Vec<ModeEvent>,
    /// Plan as executed, before any guarded re-anchoring.
    #[serde(skip)]
    pub plan: Option<PlanSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub controller: ControllerKind,
    pub model_policy: ModelPolicy,
    pub seed: u64,
    pub trials: Vec<TrialOutcome>,
}

impl RunResult {
    pub fn reports(&self) -> Vec<TrialReport> {
        self.trials.iter().map(|t| t.report.clone()).collect()
    }
}

#[derive(Debug, Clone)]
struct Tracked {
    estimate: ContactEstimate,
    impact: Option<ImpactModel>,
    truth: Option<Vector3<f64>>,
    spawned: bool,
}

#[derive(Debug, Clone, Copy)]
enum Blend {
    Idle,
    Active {
        since: f64,
        window: f64,
        left_at: Option<f64>,
    },
    Back {
        since: f64,
        from: f64,
    },
    Done,
}

struct TrialSetup<'a> {
    scenario: &'a Scenario,
    index: usize,
    environment: EnvironmentSpec,
    registry: ModeRegistry,
    contacts: &'a mut Vec<Tracked>,
    anticipate: bool,
    collect_points: bool,
}

struct TrialRun {
    rows: Vec<TickRow>,
    plan: PlanSpec,
    retimes: Vec<RetimeRecord>,
    events: Vec<ModeEvent>,
    registry: ModeRegistry,
    records: Vec<EstimateRecord>,
    points: Vec<JointPoint>,
    failure: Option<String>,
}

pub fn metric_params(s: &Scenario) -> MetricParams {
    let a = s.anticipation.as_ref();
    MetricParams {
        dt: s.timestep,
        impact_window: a.map_or(40, |a| a.impact_window),
        baseline_window: a.map_or(20, |a| a.baseline_window),
    }
}

fn initial_contacts(s: &Scenario) -> Result<Vec<Tracked>, BenchError> {
    let Some(a) = &s.anticipation else {
        return Ok(Vec::new());
    };
    a.contacts
        .iter()
        .map(|c| {
            let estimate = ContactEstimate::isotropic(c.mean, c.sigma, c.kind, c.anchor)
                .map_err(|e| BenchError::Config(e.to_string()))?;
            let impact = (c.kind == TransitionType::Impact).then(|| {
                ImpactModel::new(
                    a.impact,
                    a.initial_approach_speed,
                    s.plan.segments[c.anchor].speed,
                )
            });
            Ok(Tracked {
                estimate,
                impact,
                truth: c.truth,
                spawned: false,
            })
        })
        .collect()
}

/// Run every trial of a scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult, BenchError> {
    scenario.validate()?;
    let mut contacts = initial_contacts(scenario)?;
    let mut registry = ModeRegistry::default();

    if let Some(pre) = &scenario.pretrain {
        let mut none = Vec::new();
        let run = execute_trial(TrialSetup {
            scenario,
            index: usize::MAX,
            environment: pre.environment.clone(),
            registry: ModeRegistry::default(),
            contacts: &mut none,
            anticipate: false,
            collect_points: true,
        })?;
        if let Some(f) = run.failure {
            return Err(BenchError::Pretrain(f));
        }
        registry = run.registry;
        if scenario.model_policy == ModelPolicy::FrozenPretrained {
            let (model, report) = fit_batch(&run.points, scenario.mode.model.clone(), &pre.batch)
                .map_err(|e| BenchError::Pretrain(e.to_string()))?;
            info!(
                "pretrained frozen model: {} components, {} iterations, mean log-likelihood {:.3}",
                model.len(),
                report.iterations,
                report.mean_log_likelihood
            );
            registry = ModeRegistry::default();
            registry.push(ClusterSummary::default(), model);
        }
    }
    let pretrained = registry.clone();

    let mut trials = Vec::with_capacity(scenario.trials);
    for t in 0..scenario.trials {
        let started = Instant::now();
        let run = execute_trial(TrialSetup {
            scenario,
            index: t,
            environment: scenario.environment.clone(),
            registry: registry.clone(),
            contacts: &mut contacts,
            anticipate: scenario.controller == ControllerKind::Avic,
            collect_points: false,
        })?;
        if scenario.persistence.models {
            registry = run.registry;
        } else {
            registry = pretrained.clone();
        }
        if !scenario.persistence.estimates {
            contacts = initial_contacts(scenario)?;
        }
        if let Some(f) = &run.failure {
            warn!("{} trial {t} failed: {f}", scenario.name);
        }
        let report = TrialReport::from_rows(t, &run.rows, &metric_params(scenario));
        trials.push(TrialOutcome {
            report,
            estimates: run.records,
            retimes: run.retimes,
            failure: run.failure,
            runtime_s: started.elapsed().as_secs_f64(),
            rows: run.rows,
            mode_events: run.events,
            plan: Some(run.plan),
        });
    }
    Ok(RunResult {
        scenario: scenario.name.clone(),
        controller: scenario.controller,
        model_policy: scenario.model_policy,
        seed: scenario.seed,
        trials,
    })
}

fn trial_seed(seed: u64, index: usize) -> u64 {
    if index == usize::MAX {
        seed ^ 0x005e_ed0f_7a1e
    } else {
        seed.wrapping_add(index as u64)
    }
}

fn region_contains(plan: &MotionPlan, region: &TransitionRegion, sample: &PlanSample) -> bool {
    sample.segment == region.segment
        && region.contains_arclength(plan.segments[sample.segment].arclength_of(&sample.position))
}

/// Time of the first sample of `segment` at or past arc length `s`.
fn plan_time_at(plan: &MotionPlan, segment: usize, s: f64) -> f64 {
    let seg = &plan.segments[segment];
    plan.samples[seg.first_sample..seg.end_sample]
        .iter()
        .find(|p| seg.arclength_of(&p.position) >= s - 1e-12)
        .map_or_else(|| plan.samples[seg.end_sample - 1].time, |p| p.time)
}

fn execute_trial(setup: TrialSetup<'_>) -> Result<TrialRun, BenchError> {
    let TrialSetup {
        scenario: s,
        index,
        environment,
        registry,
        contacts,
        anticipate,
        collect_points,
    } = setup;
    let dt = s.timestep;
    let spec_a: Option<&AnticipationSpec> = s.anticipation.as_ref();
    let trial_no = if index == usize::MAX { 0 } else { index };

    if index != usize::MAX && index > 0 {
        if let Some(a) = spec_a {
            let q = Matrix3::identity() * a.process_noise;
            for c in contacts.iter_mut() {
                c.estimate = c.estimate.kf_predict(&q);
            }
        }
    }

    let base_plan =
        MotionPlan::build(&s.plan, dt).map_err(|e| BenchError::Config(e.to_string()))?;
    let k_sigma = s.transition.k_sigma;
    let regions: Vec<Option<TransitionRegion>> = contacts
        .iter()
        .map(|c| region_of(&c.estimate, &base_plan, k_sigma))
        .collect();
    let priors: Vec<ContactEstimate> = contacts.iter().map(|c| c.estimate.clone()).collect();
    let approach: Vec<Option<f64>> = contacts
        .iter()
        .map(|c| c.impact.as_ref().map(|m| m.approach_speed))
        .collect();

    let mut plan = base_plan.clone();
    let mut retimes = Vec::new();
    if anticipate {
        for (i, (c, r)) in contacts.iter().zip(&regions).enumerate() {
            if let (Some(r), Some(m)) = (r, &c.impact) {
                let out = retime_plan(
                    &plan,
                    r,
                    &RetimeParams {
                        approach_speed: m.approach_speed,
                        transition_duration: s.transition.retime_duration,
                        restore: false,
                    },
                );
                plan = out.plan;
                retimes.push(RetimeRecord {
                    contact: i,
                    segment: r.segment,
                    approach_speed: m.approach_speed,
                    slowdown_start: out.slowdown_start,
                    slowdown_time: plan_time_at(&plan, r.segment, out.slowdown_start),
                    entry_arclength: r.entry_arclength,
                    entry_time: plan_time_at(&plan, r.segment, r.entry_arclength),
                    compressed: out.compressed,
                });
            }
        }
    }
    let executed = plan.to_spec();

    let env = Environment::new(environment).map_err(|e| BenchError::Config(e.to_string()))?;
    let settle = (s.settle_time / dt).round() as usize;
    let max_ticks = plan.len() * 3 + settle;
    let sim_cfg = SimConfig {
        timestep: dt,
        trial_length: max_ticks as u64,
        noise: s.noise,
        rng_seed: trial_seed(s.seed, index),
        max_speed: 5.0,
    };
    let mut sim = Simulator::new(env, sim_cfg, RobotState::at_rest(plan.samples[0].position))
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let gravity = sim.gravity_compensation();

    let mut mode_cfg = s.mode.clone();
    if index == usize::MAX {
        mode_cfg.enabled = false;
    }
    let mut manager = ModeManager::with_registry(mode_cfg, s.gains.clone(), registry)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let fixed_kp = s.fixed_kp.unwrap_or(s.gains.kp_free);

    let mut blends = vec![Blend::Idle; contacts.len()];
    let mut observed: Vec<Option<(Vector3<f64>, usize)>> = vec![None; contacts.len()];
    let mut rows: Vec<TickRow> = Vec::with_capacity(max_ticks);
    let mut points = Vec::new();
    let mut cursor = 0usize;
    let mut settle_left = settle;
    let mut obs = sim.observe();
    let mut prev_true = *sim.true_state();
    let mut pending: Option<ContactObservation> = None;
    let mut deferred: Option<(usize, usize)> = None;
    let hold_ticks = spec_a.map_or(0, |a| (a.impact_hold / dt).round() as usize);
    let mut failure = None;

    for _ in 0..max_ticks {
        let now = obs.time;
        let row_index = rows.len();
        let mut contact_id = None;
        let mut contact_kind: Option<String> = None;
        let mut normal = None;

        if let Some(ev) = pending.take() {
            let seg = plan.samples[cursor].segment;
            match ev.kind {
                TransitionType::Impact => {
                    contact_kind = Some("impact".into());
                    normal = Some(ev.normal);
                    let impacts: Vec<(usize, ContactEstimate)> = contacts
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| c.estimate.transition_type == TransitionType::Impact)
                        .map(|(i, c)| (i, c.estimate.clone()))
                        .collect();
                    let list: Vec<ContactEstimate> =
                        impacts.iter().map(|(_, e)| e.clone()).collect();
                    if let Some(j) = nearest_estimate(&list, seg, &obs.position) {
                        let i = impacts[j].0;
                        contact_id = Some(i);
                        if observed[i].is_none() {
                            observed[i] = Some((obs.position, row_index));
                        }
                    }
                    if plan.segments[seg].spec.guarded && seg + 1 < plan.segments.len() {
                        // An anticipated impact keeps the transition controller
                        // on the plan until the impact transient has passed.
                        let held =
                            contact_id.is_some_and(|i| matches!(blends[i], Blend::Active { .. }));
                        if held {
                            deferred = Some((seg, row_index + hold_ticks));
                        } else {
                            plan.reanchor(seg + 1, obs.position);
                            cursor = plan.segments[seg + 1].first_sample;
                        }
                    }
                }
                TransitionType::ImpactLess => {
                    contact_kind = Some("impact_less".into());
                    normal = Some(ev.normal);
                }
            }
        }

        if let Some((seg, due)) = deferred {
            if row_index >= due {
                deferred = None;
                if plan.samples[cursor].segment == seg {
                    plan.reanchor(seg + 1, obs.position);
                    cursor = plan.segments[seg + 1].first_sample;
                }
            }
        }

        let sample = plan.samples[cursor];
        let step = match manager.step(&obs, &sample, &gravity, dt) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(format!("controller fault at tick {}: {e}", rows.len()));
                break;
            }
        };
        if collect_points {
            if let Some(p) = step.point {
                points.push(p);
            }
        }

        if let (Some(t), Some(a)) = (step.trigger, spec_a) {
            let sliding = sample.force_axes.iter().any(|&f| f);
            if a.discover_impactless && sliding && t != Trigger::Initial && index != usize::MAX {
                let hit = contacts
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.estimate.transition_type == TransitionType::ImpactLess)
                    .map(|(i, c)| {
                        let spread = c.estimate.covariance.diagonal().max().sqrt();
                        (
                            i,
                            (c.estimate.mean - obs.position).norm(),
                            (3.0 * spread).max(a.discovery_sigma),
                        )
                    })
                    .filter(|(_, d, gate)| d <= gate)
                    .min_by(|x, y| x.1.total_cmp(&y.1));
                match hit {
                    Some((i, _, _)) => {
                        if observed[i].is_none() {
                            observed[i] = Some((obs.position, row_index));
                        }
                        contact_id = Some(i);
                    }
                    None => {
                        let est = ContactEstimate::isotropic(
                            obs.position,
                            a.discovery_sigma,
                            TransitionType::ImpactLess,
                            sample.segment,
                        )
                        .map_err(|e| BenchError::Config(e.to_string()))?;
                        let truth = a
                            .impactless_truth
                            .iter()
                            .min_by(|x, y| {
                                (*x - obs.position)
                                    .norm()
                                    .total_cmp(&(*y - obs.position).norm())
                            })
                            .copied();
                        contacts.push(Tracked {
                            estimate: est,
                            impact: None,
                            truth,
                            spawned: true,
                        });
                        observed.push(None);
                        blends.push(Blend::Done);
                        contact_id = Some(contacts.len() - 1);
                    }
                }
                if contact_kind.is_none() {
                    contact_kind = Some("mode_change".into());
                }
            }
        }

        let in_region = regions
            .iter()
            .enumerate()
            .find(|(_, r)| {
                r.as_ref()
                    .is_some_and(|r| region_contains(&plan, r, &sample))
            })
            .map(|(i, _)| i);

        let (mut u, kp, lambda) = match s.controller {
            ControllerKind::FixedGain => {
                let u = fixed_gain_control(
                    &obs,
                    &sample,
                    &fixed_kp,
                    s.gains.damping_rule,
                    &gravity,
                    &step.output.force_command,
                );
                match u {
                    Ok(u) => (u, fixed_kp, 0.0),
                    Err(e) => {
                        failure = Some(format!("controller fault at tick {}: {e}", rows.len()));
                        break;
                    }
                }
            }
            _ => (step.output.wrench, step.output.kp, step.output.lambda),
        };

        let mut alpha: f64 = 0.0;
        if anticipate {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..regions.len() {
                let Some(r) = &regions[i] else { continue };
                let kind = contacts[i].estimate.transition_type;
                let inside = in_region == Some(i);
                let a_cfg = spec_a.expect("regions imply anticipation");
                blends[i] = match blends[i] {
                    Blend::Idle if inside => {
                        let speed = approach[i]
                            .unwrap_or(plan.segments[r.segment].spec.speed)
                            .max(1e-6);
                        let window = (0.5 * r.length() / speed).max(s.transition.min_blend_window);
                        Blend::Active {
                            since: now,
                            window,
                            left_at: None,
                        }
                    }
                    Blend::Active {
                        since,
                        window,
                        left_at,
                    } => {
                        let a = ((now - since) / window).clamp(0.0, 1.0);
                        let left_at = if inside { None } else { left_at.or(Some(now)) };
                        let done = match kind {
                            TransitionType::Impact => match observed[i] {
                                Some((_, k)) => row_index >= k + hold_ticks,
                                None => left_at.is_some_and(|t0| now - t0 >= a_cfg.impact_hold),
                            },
                            TransitionType::ImpactLess => left_at.is_some_and(|t0| {
                                manager.phase() == PhaseKind::Normal || now - t0 >= a_cfg.max_hold
                            }),
                        };
                        if done {
                            Blend::Back {
                                since: now,
                                from: a,
                            }
                        } else {
                            Blend::Active {
                                since,
                                window,
                                left_at,
                            }
                        }
                    }
                    other => other,
                };
                let a = match blends[i] {
                    Blend::Active { since, window, .. } => ((now - since) / window).clamp(0.0, 1.0),
                    Blend::Back { since, from } => {
                        let w = s.transition.blend_back_window.max(dt);
                        let v = from * (1.0 - (now - since) / w);
                        if v <= 0.0 {
                            blends[i] = Blend::Done;
                        }
                        v.max(0.0)
                    }
                    _ => 0.0,
                };
                if a > best.map_or(0.0, |b| b.1) {
                    best = Some((i, a));
                }
            }
            if let Some((i, a)) = best {
                let kind = contacts[i].estimate.transition_type;
                let tg =
                    transition_gains(kind, &s.gains, &s.transition, approach[i].unwrap_or(0.0));
                match impedance_law(
                    &obs,
                    &sample,
                    &tg.kp,
                    &tg.kd,
                    0.0,
                    &Wrench::zero(),
                    &gravity,
                    &step.output.force_command,
                ) {
                    Ok(u_t) => {
                        u = blend(&u, &u_t, a, 1.0);
                        alpha = a;
                    }
                    Err(e) => {
                        failure = Some(format!("controller fault at tick {}: {e}", rows.len()));
                        break;
                    }
                }
            }
        }

        rows.push(TickRow {
            trial: trial_no,
            tick: row_index as u64,
            time: now,
            segment: sample.segment,
            px: obs.position.x,
            py: obs.position.y,
            pz: obs.position.z,
            vx: obs.linear_velocity.x,
            vy: obs.linear_velocity.y,
            vz: obs.linear_velocity.z,
            tx: sample.position.x,
            ty: sample.position.y,
            tz: sample.position.z,
            tvx: sample.velocity.x,
            tvy: sample.velocity.y,
            tvz: sample.velocity.z,
            fx: obs.measured_wrench.force.x,
            fy: obs.measured_wrench.force.y,
            fz: obs.measured_wrench.force.z,
            ux: u.force.x,
            uy: u.force.y,
            uz: u.force.z,
            kpx: kp.x,
            kpy: kp.y,
            kpz: kp.z,
            lambda,
            epsilon: step.epsilon,
            pred_f: step.predicted.map(|p| p.force_mag),
            meas_f: step.measured.force_mag,
            feature: step.feature.value,
            mode: step.active_mode,
            phase: format!("{:?}", step.phase).to_lowercase(),
            region: in_region,
            alpha,
            contact: contact_id,
            contact_kind,
            nx: normal.map(|n| n.x),
            ny: normal.map(|n| n.y),
            nz: normal.map(|n| n.z),
        });

        match sim.step(&u) {
            Ok(next) => {
                pending = contact_event(sim.environment(), &prev_true, sim.true_state());
                prev_true = *sim.true_state();
                obs = next;
            }
            Err(e) => {
                failure = Some(format!("simulator: {e}"));
                break;
            }
        }

        if cursor + 1 < plan.len() {
            cursor += 1;
        } else if settle_left == 0 {
            break;
        } else {
            settle_left -= 1;
        }
    }

    let mut records = Vec::with_capacity(contacts.len());
    if let Some(a) = spec_a {
        let r_m = Matrix3::identity() * a.measurement_noise;
        let params = metric_params(s);
        let impacts = crate::metrics::impacts(&rows, &params);
        for (i, c) in contacts.iter_mut().enumerate() {
            let prior = priors.get(i).cloned().unwrap_or_else(|| c.estimate.clone());
            let mut impact_force = None;
            if failure.is_none() {
                if let Some((pos, _)) = observed[i] {
                    c.estimate = c
                        .estimate
                        .kf_update(&pos, &r_m)
                        .map_err(|e| BenchError::Config(e.to_string()))?;
                    if let Some(model) = &mut c.impact {
                        if let Some(hit) = impacts.iter().find(|h| h.contact == Some(i)) {
                            impact_force = Some(hit.peak_force);
                            model.update(hit.peak_force);
                        }
                    }
                }
            }
            records.push(EstimateRecord {
                index: i,
                kind: c.estimate.transition_type,
                anchor: c.estimate.plan_anchor,
                spawned: c.spawned && i >= priors.len(),
                prior_mean: prior.mean,
                prior_trace: prior.trace(),
                region_length: regions.get(i).and_then(|r| r.as_ref().map(|r| r.length())),
                approach_speed: approach.get(i).copied().flatten(),
                observed: observed[i].map(|o| o.0),
                impact_force,
                posterior_mean: c.estimate.mean,
                posterior_trace: c.estimate.trace(),
                oracle_prior_error: c.truth.map(|t| (prior.mean - t).norm()),
                oracle_posterior_error: c.truth.map(|t| (c.estimate.mean - t).norm()),
            });
        }
    }

    let events = manager.events().to_vec();
    let registry = manager.into_registry();
    Ok(TrialRun {
        rows,
        plan: executed,
        retimes,
        events,
        registry,
        records,
        points,
        failure,
    })
}
