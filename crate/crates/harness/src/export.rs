//! CSV artifacts and the run manifest.

use std::fs::File;
use std::path::{Path, PathBuf};

use mecdc_core::env::Env;
use mecdc_core::ScenarioConfig;
use mecdc_sac::{SacHyper, TrainLog};
use serde::{Deserialize, Serialize};

use crate::controllers::ControllerKind;
use crate::plan::{AggregateRow, MetricsRow};
use crate::HarnessError;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

fn create(path: &Path) -> Result<File, HarnessError> {
    File::create(path).map_err(|e| HarnessError::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Flattened: one `<metric>_mean` and `<metric>_std` column per metric.
pub fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    const METRICS: [&str; 8] = [
        "sum_reward",
        "latency_reward",
        "dc_volume_bits",
        "completion_rate",
        "dc_rate",
        "avg_energy_per_uav_step",
        "collisions",
        "mean_sum_rate",
    ];
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["controller".to_string(), "scenario".into(), "seeds".into()];
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for r in rows {
        let stats = [
            r.sum_reward,
            r.latency_reward,
            r.dc_volume_bits,
            r.completion_rate,
            r.dc_rate,
            r.avg_energy_per_uav_step,
            r.collisions,
            r.mean_sum_rate,
        ];
        let mut rec = vec![r.controller.to_string(), r.scenario.clone(), r.seeds.to_string()];
        for s in stats {
            rec.push(s.mean.to_string());
            rec.push(s.std.to_string());
        }
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// One row per training episode.
pub fn write_curve(path: &Path, log: &TrainLog) -> Result<(), HarnessError> {
    log.write_csv(create(path)?).map_err(HarnessError::from)
}

/// trajectory.csv and association.csv of a recorded episode.
pub fn write_episode(dir: &Path, env: &Env) -> Result<(), HarnessError> {
    let t = dir.join("trajectory.csv");
    env.write_trajectory(create(&t)?).map_err(csv_err(&t))?;
    let a = dir.join("association.csv");
    env.write_associations(create(&a)?).map_err(csv_err(&a))?;
    Ok(())
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub controllers: Vec<ControllerKind>,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub eval_window: usize,
    pub hyper: SacHyper,
    pub scenario: ScenarioConfig,
}

impl Manifest {
    pub fn to_text(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Manifest(e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Manifest(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_text()?).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }
}

/// Per-cell output directory `<root>/<scenario>/<controller>/seed<k>`.
pub fn cell_dir(root: &Path, scenario: &str, controller: ControllerKind, seed: u64) -> PathBuf {
    root.join(scenario).join(controller.as_str()).join(format!("seed{seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mecdc_core::env::ActionVector;
    use mecdc_core::Scenario;

    #[test]
    fn manifest_round_trips() {
        let m = Manifest {
            code_version: CODE_VERSION.into(),
            controllers: vec![ControllerKind::SacTma, ControllerKind::Random],
            seeds: vec![0, 1, 2],
            episodes: 1500,
            eval_window: 50,
            hyper: SacHyper::default(),
            scenario: ScenarioConfig::default(),
        };
        let text = m.to_text().unwrap();
        assert_eq!(Manifest::parse(&text).unwrap(), m);
        assert!(matches!(Manifest::parse("episodes = \"x\""), Err(HarnessError::Manifest(_))));
    }

    #[test]
    fn trajectory_has_one_row_per_uav_slot() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::default();
        let (t, n) = (s.horizon, s.layout.num_uavs());
        let mut env = Env::new(s, 0);
        env.set_recording(true);
        while !env.is_done() {
            env.step(&ActionVector::hover(&env.layout(), 0.5)).unwrap();
        }
        write_episode(dir.path(), &env).unwrap();
        let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + t * n);
    }

    #[test]
    fn unwritable_destination_names_the_path() {
        let bad = Path::new("/nonexistent-dir/metrics.csv");
        let err = write_metrics(bad, &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/metrics.csv"), "{err}");
    }
}
