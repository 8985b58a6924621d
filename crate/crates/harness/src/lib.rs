//! Experiment orchestration: baseline controllers, multi-seed plans, the
//! matching study and CSV export.

pub mod controllers;
pub mod export;
pub mod plan;
pub mod study;

use std::path::PathBuf;

use thiserror::Error;

pub use controllers::{Controller, ControllerKind, SimEnv};
pub use plan::{run_plan, AggregateRow, ExperimentPlan, MetricsRow, PlanResult, ScenarioCell};
pub use study::{matching_effectiveness_study, StudyReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown controller {0:?}")]
    UnknownController(String),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Config(#[from] mecdc_core::scenario::ConfigError),
    #[error(transparent)]
    Env(#[from] mecdc_core::env::EnvError),
    #[error(transparent)]
    Matching(#[from] mecdc_core::matching::MatchingError),
    #[error(transparent)]
    Sac(#[from] mecdc_sac::SacError),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("manifest: {0}")]
    Manifest(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
