//! Soft actor-critic learner with hand-written backprop on `ndarray`.
//!
//! Networks and updates are generic over `f32`/`f64`. Training uses `f32`
//! for speed; the gradient checks run in `f64`.

pub mod agent;
pub mod checkpoint;
pub mod nn;
pub mod replay;
pub mod train;

use thiserror::Error;

pub use agent::{ActionMode, Sac, SacHyper, UpdateStats};
pub use nn::{Mlp, MlpSpec};
pub use replay::{Batch, ReplayBuffer};
pub use train::{evaluate, train, EnvStep, Environment, EpisodeLog, TrainConfig, TrainLog};

/// Floating-point types the learner runs on.
pub trait Scalar:
    num_traits::Float
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::fmt::Debug
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    const NAME: &'static str;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

pub type Agent = Sac<f32>;
pub type Agent64 = Sac<f64>;

#[derive(Debug, Error)]
pub enum SacError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("environment: {0}")]
    Env(String),
    #[error("{0}: {1}")]
    Path(String, std::io::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
