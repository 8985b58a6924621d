//! Controllers that drive the environment.
//!
//! Every controller produces a normalized action for the same [`Env`]; the
//! association rule is set on the environment per controller.

use std::f64::consts::TAU;
use std::str::FromStr;

use mecdc_core::env::{ActionVector, Env, EnvError, EpisodeMetrics, PhysicalAction};
use mecdc_core::StrategyKind;
use mecdc_sac::{ActionMode, Agent, EnvStep, Environment, SacError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Learned motion and powers, TMA association.
    SacTma,
    /// As `SacTma` but the DC-UAV chases the fullest buffer.
    SacTmaGreedy,
    /// Centroid pursuit with distance-based association.
    DistanceGreedy,
    /// Uniform random actions with TMA association.
    Random,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::SacTma,
        ControllerKind::SacTmaGreedy,
        ControllerKind::DistanceGreedy,
        ControllerKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::SacTma => "sac_tma",
            ControllerKind::SacTmaGreedy => "sac_tma_greedy",
            ControllerKind::DistanceGreedy => "distance_greedy",
            ControllerKind::Random => "random",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, ControllerKind::SacTma | ControllerKind::SacTmaGreedy)
    }

    pub fn strategy(self) -> StrategyKind {
        match self {
            ControllerKind::DistanceGreedy => StrategyKind::DistanceGs,
            _ => StrategyKind::Tma,
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| HarnessError::UnknownController(s.to_string()))
    }
}

/// Distance and heading in [0, 2π) from `from` to `to`.
pub fn bearing(from: [f64; 2], to: [f64; 2]) -> (f64, f64) {
    let (dx, dy) = (to[0] - from[0], to[1] - from[1]);
    let d = dx.hypot(dy);
    let h = if d == 0.0 { 0.0 } else { dy.atan2(dx).rem_euclid(TAU) };
    (d, h)
}

fn hover_physical(env: &Env) -> PhysicalAction {
    let l = env.layout();
    PhysicalAction {
        moves: vec![0.0; l.num_uavs()],
        headings: vec![0.0; l.num_uavs()],
        powers: vec![0.0; l.num_gus()],
    }
}

/// Each UAV flies toward the centroid of the users it served last slot,
/// capped at m_max; powers are uniform in [0, p_max].
pub fn distance_greedy_action<R: Rng + ?Sized>(env: &Env, rng: &mut R) -> ActionVector {
    let s = env.scenario();
    let w = env.world();
    let mut p = hover_physical(env);
    for u in 0..env.layout().num_uavs() {
        let served = w.association.served_by(u);
        if served.is_empty() {
            continue;
        }
        let k = served.len() as f64;
        let c = served.iter().fold([0.0, 0.0], |acc, &g| {
            [acc[0] + w.gu_pos[g][0] / k, acc[1] + w.gu_pos[g][1] / k]
        });
        let (d, h) = bearing(w.uav_pos[u], c);
        p.moves[u] = d.min(s.max_move());
        p.headings[u] = h;
    }
    for x in &mut p.powers {
        *x = rng.random_range(0.0..=s.radio.max_tx_power);
    }
    ActionVector::from_physical(&p, s.max_move(), s.radio.max_tx_power)
}

/// Replaces the DC-UAV's motion with pursuit of the eligible DC user that
/// holds the most data; hovers if none is eligible.
pub fn greedy_dc_override(env: &Env, action: &mut ActionVector) {
    let s = env.scenario();
    let l = env.layout();
    let w = env.world();
    let dc = l.dc_uav();
    let n = l.num_uavs();
    let target = l
        .dc_users()
        .filter(|&g| w.book.buffer(g).stored >= s.tasks.dc_min_collectible)
        .max_by(|&a, &b| w.book.buffer(a).stored.cmp(&w.book.buffer(b).stored).then(b.cmp(&a)));
    let (d, h) = match target {
        Some(g) => bearing(w.uav_pos[dc], w.gu_pos[g]),
        None => (0.0, 0.0),
    };
    let mm = s.max_move();
    action.0[dc] = if mm > 0.0 { 2.0 * d.min(mm) / mm - 1.0 } else { -1.0 };
    action.0[n + dc] = 2.0 * h / TAU - 1.0;
}

pub fn random_action<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ActionVector {
    ActionVector((0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
}

/// A per-step policy over the shared environment. Baselines and learned
/// policies all go through this, so they see the same step pipeline.
pub trait Controller {
    fn kind(&self) -> ControllerKind;
    fn act(&mut self, env: &Env) -> ActionVector;
}

pub struct SacController {
    pub agent: Agent,
    pub greedy_dc: bool,
}

impl Controller for SacController {
    fn kind(&self) -> ControllerKind {
        if self.greedy_dc {
            ControllerKind::SacTmaGreedy
        } else {
            ControllerKind::SacTma
        }
    }

    fn act(&mut self, env: &Env) -> ActionVector {
        let s: Vec<f32> = env.state().normalized.iter().map(|&x| x as f32).collect();
        let a = self.agent.sample_action(&s, ActionMode::Deterministic);
        let mut a = ActionVector(a.iter().map(|&x| x as f64).collect());
        if self.greedy_dc {
            greedy_dc_override(env, &mut a);
        }
        a
    }
}

pub struct DistanceGreedy {
    pub rng: ChaCha8Rng,
}

impl Controller for DistanceGreedy {
    fn kind(&self) -> ControllerKind {
        ControllerKind::DistanceGreedy
    }

    fn act(&mut self, env: &Env) -> ActionVector {
        distance_greedy_action(env, &mut self.rng)
    }
}

pub struct RandomController {
    pub rng: ChaCha8Rng,
}

impl Controller for RandomController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Random
    }

    fn act(&mut self, env: &Env) -> ActionVector {
        random_action(&mut self.rng, env.action_dim())
    }
}

/// Runs one episode from `env_seed` and returns its metrics. The
/// environment's association rule is set from the controller kind.
pub fn run_episode(
    env: &mut Env,
    controller: &mut dyn Controller,
    env_seed: u64,
) -> Result<EpisodeMetrics, EnvError> {
    env.set_strategy(controller.kind().strategy());
    env.reset(env_seed);
    while !env.is_done() {
        let a = controller.act(env);
        env.step(&a)?;
    }
    Ok(env.metrics())
}

/// Environment seed for training episode `episode` of run `seed`.
pub fn train_seed(seed: u64, episode: usize) -> u64 {
    seed * 100_000 + episode as u64
}

/// Environment seed for evaluation episode `k` of run `seed`. Disjoint from
/// the training seeds as long as fewer than 50 000 episodes are trained.
pub fn eval_seed(seed: u64, k: usize) -> u64 {
    seed * 100_000 + 50_000 + k as u64
}

/// The simulator seen through the learner's interface.
pub struct SimEnv {
    pub env: Env,
    pub seed: u64,
    pub greedy_dc: bool,
    /// Seed function for episode indices.
    pub seeds: fn(u64, usize) -> u64,
}

impl SimEnv {
    pub fn new(env: Env, seed: u64, greedy_dc: bool) -> Self {
        Self {
            env,
            seed,
            greedy_dc,
            seeds: train_seed,
        }
    }
}

fn env_err(e: EnvError) -> SacError {
    SacError::Env(e.to_string())
}

impl Environment for SimEnv {
    fn state_dim(&self) -> usize {
        self.env.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.env.action_dim()
    }

    fn reset(&mut self, episode: usize) -> Vec<f64> {
        self.env.reset((self.seeds)(self.seed, episode)).normalized
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep, SacError> {
        let mut a = ActionVector(action.to_vec());
        let executed = if self.greedy_dc {
            greedy_dc_override(&self.env, &mut a);
            Some(a.0.clone())
        } else {
            None
        };
        let t = self.env.step(&a).map_err(env_err)?;
        let ledger = &self.env.world().ledger;
        let energy = t
            .info
            .energy
            .iter()
            .enumerate()
            .map(|(u, e)| e.total(ledger.role(u)))
            .sum();
        Ok(EnvStep {
            state: t.state.normalized,
            reward: t.reward.total,
            done: t.done,
            executed,
            latency: t.reward.latency,
            dc: t.reward.dc,
            penalty: t.reward.penalty,
            energy,
        })
    }
}
