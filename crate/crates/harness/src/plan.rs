//! Multi-seed experiment plans: train where a controller learns, evaluate
//! over a fixed window, aggregate across seeds.

use std::path::PathBuf;

use mecdc_core::env::{Env, EpisodeMetrics};
use mecdc_core::scenario::{validate, ConfigError};
use mecdc_core::{Scenario, ScenarioConfig};
use mecdc_sac::{Agent, EpisodeLog, SacHyper, TrainConfig, TrainLog};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::{
    eval_seed, run_episode, Controller, ControllerKind, DistanceGreedy, RandomController, SacController, SimEnv,
};
use crate::HarnessError;

/// Salt for the controller's own random stream.
const CONTROLLER_STREAM: u64 = 0x5eed_c0de;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCell {
    pub label: String,
    pub config: ScenarioConfig,
}

impl ScenarioCell {
    /// Scenario for run `seed`; ground-user placement follows the seed.
    pub fn build(&self, seed: u64) -> Result<Scenario, HarnessError> {
        build_scenario(&self.config, seed)
    }
}

pub fn build_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario, HarnessError> {
    let s = Scenario::from_config(cfg, seed);
    let v = validate(&s);
    if v.is_empty() {
        Ok(s)
    } else {
        Err(ConfigError::Invalid(v).into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub cells: Vec<ScenarioCell>,
    pub controllers: Vec<ControllerKind>,
    pub seeds: Vec<u64>,
    /// Training episodes for learning controllers.
    pub episodes: usize,
    /// Evaluation episodes per (controller, cell, seed).
    pub eval_window: usize,
    pub hyper: SacHyper,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Plan(m.to_string()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.cells.is_empty() {
            return bad("no scenario cells");
        }
        if self.controllers.is_empty() {
            return bad("no controllers");
        }
        if self.eval_window == 0 {
            return bad("evaluation window is empty");
        }
        if self.eval_window > self.episodes {
            return bad("evaluation window exceeds the episode count");
        }
        self.hyper.validate()?;
        for c in &self.cells {
            c.build(self.seeds[0])?;
        }
        Ok(())
    }
}

/// Mean evaluation metrics for one (controller, cell, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub controller: ControllerKind,
    pub scenario: String,
    pub seed: u64,
    pub episodes: usize,
    pub sum_reward: f64,
    pub latency_reward: f64,
    pub dc_reward: f64,
    pub penalty: f64,
    pub dc_volume_bits: f64,
    pub dc_generated_bits: f64,
    pub completion_rate: f64,
    pub dc_rate: f64,
    pub avg_energy_per_uav_step: f64,
    pub collisions: f64,
    pub mean_sum_rate: f64,
}

impl MetricsRow {
    fn from_episodes(kind: ControllerKind, scenario: &str, seed: u64, eps: &[(EpisodeMetrics, u64)]) -> Self {
        let n = eps.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeMetrics) -> f64| eps.iter().map(|(m, _)| f(m)).sum::<f64>() / n;
        Self {
            controller: kind,
            scenario: scenario.to_string(),
            seed,
            episodes: eps.len(),
            sum_reward: mean(&|m| m.sum_reward),
            latency_reward: mean(&|m| m.latency_reward),
            dc_reward: mean(&|m| m.dc_reward),
            penalty: mean(&|m| m.penalty),
            dc_volume_bits: mean(&|m| m.dc_volume_bits as f64),
            dc_generated_bits: eps.iter().map(|(_, g)| *g as f64).sum::<f64>() / n,
            completion_rate: mean(&|m| m.completion_rate),
            dc_rate: mean(&|m| m.dc_rate),
            avg_energy_per_uav_step: mean(&|m| m.avg_energy_per_uav_step),
            collisions: mean(&|m| m.collisions as f64),
            mean_sum_rate: mean(&|m| m.mean_sum_rate),
        }
    }
}

/// Mean and sample standard deviation across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub controller: ControllerKind,
    pub scenario: String,
    pub seeds: usize,
    pub sum_reward: Stat,
    pub latency_reward: Stat,
    pub dc_volume_bits: Stat,
    pub completion_rate: Stat,
    pub dc_rate: Stat,
    pub avg_energy_per_uav_step: Stat,
    pub collisions: Stat,
    pub mean_sum_rate: Stat,
}

/// One aggregate row per (controller, scenario), in first-seen order.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(ControllerKind, &str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.controller, r.scenario.as_str())) {
            keys.push((r.controller, &r.scenario));
        }
    }
    keys.into_iter()
        .map(|(c, s)| {
            let group: Vec<&MetricsRow> = rows.iter().filter(|r| r.controller == c && r.scenario == s).collect();
            let stat = |f: fn(&MetricsRow) -> f64| Stat::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            AggregateRow {
                controller: c,
                scenario: s.to_string(),
                seeds: group.len(),
                sum_reward: stat(|r| r.sum_reward),
                latency_reward: stat(|r| r.latency_reward),
                dc_volume_bits: stat(|r| r.dc_volume_bits),
                completion_rate: stat(|r| r.completion_rate),
                dc_rate: stat(|r| r.dc_rate),
                avg_energy_per_uav_step: stat(|r| r.avg_energy_per_uav_step),
                collisions: stat(|r| r.collisions),
                mean_sum_rate: stat(|r| r.mean_sum_rate),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

/// Output of one (controller, cell, seed).
pub struct CellRun {
    pub row: MetricsRow,
    pub curve: Option<TrainLog>,
    pub agent: Option<Agent>,
    /// Environment after the first evaluation episode, with its trace,
    /// trajectory and associations recorded.
    pub sample: Env,
}

pub fn make_controller(kind: ControllerKind, seed: u64, agent: Option<Agent>) -> Result<Box<dyn Controller>, HarnessError> {
    let rng = ChaCha8Rng::seed_from_u64(seed ^ CONTROLLER_STREAM);
    Ok(match kind {
        ControllerKind::SacTma | ControllerKind::SacTmaGreedy => {
            let agent = agent.ok_or_else(|| HarnessError::Plan(format!("{kind} needs a trained agent")))?;
            Box::new(SacController {
                agent,
                greedy_dc: kind == ControllerKind::SacTmaGreedy,
            })
        }
        ControllerKind::DistanceGreedy => Box::new(DistanceGreedy { rng }),
        ControllerKind::Random => Box::new(RandomController { rng }),
    })
}

/// Evaluates `controller` over `episodes` evaluation seeds of run `seed`.
/// Returns the mean row and the recorded first episode.
pub fn evaluate_controller(
    scenario: &Scenario,
    label: &str,
    controller: &mut dyn Controller,
    seed: u64,
    episodes: usize,
) -> Result<(MetricsRow, Env), HarnessError> {
    let mut sample = Env::new(scenario.clone(), eval_seed(seed, 0));
    sample.set_recording(true);
    let mut env = Env::new(scenario.clone(), eval_seed(seed, 0));
    let mut eps = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let e = if k == 0 { &mut sample } else { &mut env };
        let m = run_episode(e, controller, eval_seed(seed, k))?;
        let generated = e.world().book.buffers.iter().map(|b| b.generated_total).sum();
        eps.push((m, generated));
    }
    Ok((MetricsRow::from_episodes(controller.kind(), label, seed, &eps), sample))
}

/// Trains an agent on `scenario` for `episodes` episodes.
pub fn train_agent(
    scenario: &Scenario,
    kind: ControllerKind,
    seed: u64,
    episodes: usize,
    hyper: &SacHyper,
    opts: &RunOptions,
    on_episode: &mut dyn FnMut(&EpisodeLog),
) -> Result<(Agent, TrainLog), HarnessError> {
    let mut env = Env::new(scenario.clone(), seed);
    env.set_strategy(kind.strategy());
    let mut sim = SimEnv::new(env, seed, kind == ControllerKind::SacTmaGreedy);
    let mut agent = Agent::new(sim.env.state_dim(), sim.env.action_dim(), hyper.clone(), seed)?;
    let cfg = TrainConfig {
        episodes,
        checkpoint_every: opts.checkpoint_every,
        checkpoint_dir: opts.checkpoint_dir.clone(),
    };
    let log = mecdc_sac::train(&mut agent, &mut sim, &cfg, on_episode)?;
    Ok((agent, log))
}

#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    cell: &ScenarioCell,
    kind: ControllerKind,
    seed: u64,
    episodes: usize,
    eval_window: usize,
    hyper: &SacHyper,
    opts: &RunOptions,
    on_episode: &mut dyn FnMut(&EpisodeLog),
) -> Result<CellRun, HarnessError> {
    let scenario = cell.build(seed)?;
    if kind.is_learning() {
        let (agent, log) = train_agent(&scenario, kind, seed, episodes, hyper, opts, on_episode)?;
        let mut c = SacController {
            agent,
            greedy_dc: kind == ControllerKind::SacTmaGreedy,
        };
        let (row, sample) = evaluate_controller(&scenario, &cell.label, &mut c, seed, eval_window)?;
        return Ok(CellRun {
            row,
            curve: Some(log),
            agent: Some(c.agent),
            sample,
        });
    }
    let mut controller = make_controller(kind, seed, None)?;
    let (row, sample) = evaluate_controller(&scenario, &cell.label, controller.as_mut(), seed, eval_window)?;
    Ok(CellRun {
        row,
        curve: None,
        agent: None,
        sample,
    })
}

#[derive(Debug, Clone, Default)]
pub struct PlanResult {
    pub rows: Vec<MetricsRow>,
    pub aggregates: Vec<AggregateRow>,
    /// Training curves keyed by (controller, scenario, seed).
    pub curves: Vec<(ControllerKind, String, u64, TrainLog)>,
}

/// Runs every (cell, controller, seed) in order. `progress` sees each
/// finished cell.
pub fn run_plan(plan: &ExperimentPlan, mut progress: impl FnMut(&MetricsRow)) -> Result<PlanResult, HarnessError> {
    plan.validate()?;
    let mut out = PlanResult::default();
    for cell in &plan.cells {
        for &kind in &plan.controllers {
            for &seed in &plan.seeds {
                let run = run_cell(
                    cell,
                    kind,
                    seed,
                    plan.episodes,
                    plan.eval_window,
                    &plan.hyper,
                    &RunOptions::default(),
                    &mut |_| {},
                )?;
                progress(&run.row);
                if let Some(c) = run.curve {
                    out.curves.push((kind, cell.label.clone(), seed, c));
                }
                out.rows.push(run.row);
            }
        }
    }
    out.aggregates = aggregate(&out.rows);
    Ok(out)
}

/// One cell per MEC-user count.
pub fn mec_user_sweep(base: &ScenarioConfig, counts: &[usize]) -> Vec<ScenarioCell> {
    counts
        .iter()
        .map(|&m| ScenarioCell {
            label: format!("mec_users_{m}"),
            config: ScenarioConfig {
                num_mec_users: m,
                ..base.clone()
            },
        })
        .collect()
}

/// One cell per UAV capacity N_u_max.
pub fn capacity_sweep(base: &ScenarioConfig, capacities: &[usize]) -> Vec<ScenarioCell> {
    capacities
        .iter()
        .map(|&c| ScenarioCell {
            label: format!("capacity_{c}"),
            config: ScenarioConfig {
                uav_capacity: c,
                ..base.clone()
            },
        })
        .collect()
}
