//! Training loop: warmup with uniform actions, then act, store, update.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::agent::{ActionMode, Sac};
use crate::checkpoint;
use crate::replay::ReplayBuffer;
use crate::{SacError, Scalar};

/// Result of one environment step, in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// The action actually applied, if the environment altered it.
    pub executed: Option<Vec<f64>>,
    pub latency: f64,
    pub dc: f64,
    pub penalty: f64,
    /// Joules spent by all UAVs this step.
    pub energy: f64,
}

/// What the learner needs from a simulator.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Starts episode `episode` and returns the first observation.
    fn reset(&mut self, episode: usize) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<EnvStep, SacError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Save a checkpoint every this many episodes.
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn episodes(episodes: usize) -> Self {
        Self {
            episodes,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub sum_reward: f64,
    pub r_l: f64,
    pub r_d: f64,
    pub r_p: f64,
    pub energy: f64,
    pub steps: usize,
    pub updates: u64,
    pub critic_loss: f64,
    pub policy_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeLog>,
    pub total_steps: u64,
}

impl TrainLog {
    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.sum_reward).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SacError> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.episodes {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), SacError> {
        let f = std::fs::File::create(path).map_err(|e| SacError::Path(path.display().to_string(), e))?;
        self.write_csv(f)
    }
}

fn cast<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::from(x).unwrap()).collect()
}

/// Runs `cfg.episodes` training episodes; `on_episode` sees each log entry.
pub fn train<T: Scalar, E: Environment>(
    agent: &mut Sac<T>,
    env: &mut E,
    cfg: &TrainConfig,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<TrainLog, SacError> {
    if env.state_dim() != agent.state_dim || env.action_dim() != agent.action_dim {
        return Err(SacError::Config(format!(
            "environment is {}x{}, agent is {}x{}",
            env.state_dim(),
            env.action_dim(),
            agent.state_dim,
            agent.action_dim
        )));
    }
    if let (Some(_), None) = (cfg.checkpoint_every, &cfg.checkpoint_dir) {
        return Err(SacError::Config("checkpoint_every needs a checkpoint_dir".into()));
    }
    let h = agent.hyper.clone();
    let mut buffer = ReplayBuffer::<T>::new(h.buffer_capacity, agent.state_dim, agent.action_dim);
    let mut log = TrainLog::default();
    let mut total: u64 = 0;
    for episode in 0..cfg.episodes {
        let mut state: Vec<T> = cast(&env.reset(episode));
        let mut entry = EpisodeLog {
            episode,
            ..Default::default()
        };
        let mut loss_rounds = 0usize;
        loop {
            let action: Vec<T> = if (total as usize) < h.warmup_steps {
                agent.random_action()
            } else {
                agent.sample_action(&state, ActionMode::Stochastic)
            };
            let as_f64: Vec<f64> = action.iter().map(|x| x.to_f64().unwrap()).collect();
            let step = env.step(&as_f64)?;
            let applied = step.executed.as_deref().map(cast::<T>).unwrap_or(action);
            let next: Vec<T> = cast(&step.state);
            buffer.push(&state, &applied, T::from(step.reward).unwrap(), &next, step.done);
            total += 1;
            entry.steps += 1;
            entry.sum_reward += step.reward;
            entry.r_l += step.latency;
            entry.r_d += step.dc;
            entry.r_p += step.penalty;
            entry.energy += step.energy;

            let ready = total as usize >= h.warmup_steps && buffer.len() >= h.batch_size;
            if ready && total.is_multiple_of(h.update_interval as u64) {
                for _ in 0..h.updates_per_step {
                    let batch = buffer.sample(agent.rng(), h.batch_size);
                    let stats = agent.update(&batch);
                    entry.critic_loss += stats.critic_loss;
                    entry.policy_loss += stats.policy_loss;
                    loss_rounds += 1;
                }
            }
            state = next;
            if step.done {
                break;
            }
        }
        if loss_rounds > 0 {
            entry.critic_loss /= loss_rounds as f64;
            entry.policy_loss /= loss_rounds as f64;
        }
        entry.updates = agent.updates;
        on_episode(&entry);
        log.episodes.push(entry);
        if let (Some(every), Some(dir)) = (cfg.checkpoint_every, &cfg.checkpoint_dir) {
            if every > 0 && (episode + 1) % every == 0 {
                checkpoint::save(agent, &dir.join(format!("checkpoint-{:05}.bin", episode + 1)))?;
            }
        }
    }
    log.total_steps = total;
    Ok(log)
}

/// Runs `episodes` episodes with a frozen policy; returns episode rewards.
pub fn evaluate<T: Scalar, E: Environment>(
    agent: &mut Sac<T>,
    env: &mut E,
    episodes: impl IntoIterator<Item = usize>,
    mode: ActionMode,
) -> Result<Vec<f64>, SacError> {
    let mut out = Vec::new();
    for ep in episodes {
        let mut state: Vec<T> = cast(&env.reset(ep));
        let mut sum = 0.0;
        loop {
            let a: Vec<f64> = agent
                .sample_action(&state, mode)
                .iter()
                .map(|x| x.to_f64().unwrap())
                .collect();
            let s = env.step(&a)?;
            sum += s.reward;
            state = cast(&s.state);
            if s.done {
                break;
            }
        }
        out.push(sum);
    }
    Ok(out)
}
