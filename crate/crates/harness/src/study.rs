//! Matching effectiveness study: random UAV motion and random powers, every
//! association strategy evaluated on the same slot.

use std::f64::consts::TAU;
use std::time::Instant;

use mecdc_core::matching::{strategy_variant, utility, AssociationProblem};
use mecdc_core::{ScenarioConfig, StrategyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::plan::build_scenario;
use crate::HarnessError;

const MOTION_STREAM: u64 = 0x6d6f_7665;
const MATCH_STREAM: u64 = 0x6d61_7463;

#[derive(Debug, Clone, Serialize)]
pub struct StudySample {
    pub seed: u64,
    pub slot: usize,
    pub strategy: StrategyKind,
    pub sum_rate: f64,
    pub seconds: f64,
    pub swaps: usize,
    pub capped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    /// Mean gated sum rate over all seeds and slots.
    pub mean_sum_rate: f64,
    /// Wall-clock seconds summed over seeds and slots.
    pub total_seconds: f64,
    pub mean_seconds_per_slot: f64,
    pub capped_slots: usize,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub summaries: Vec<StrategySummary>,
    pub samples: Vec<StudySample>,
}

impl StudyReport {
    pub fn summary(&self, kind: StrategyKind) -> &StrategySummary {
        self.summaries.iter().find(|s| s.strategy == kind).expect("every strategy is summarized")
    }

    /// Per-slot sum rates of `kind`, in (seed, slot) order.
    pub fn series(&self, kind: StrategyKind) -> Vec<f64> {
        self.samples.iter().filter(|s| s.strategy == kind).map(|s| s.sum_rate).collect()
    }
}

/// Runs `slots` slots per seed. Every ground user is eligible. Each slot
/// the random-start strategies share one random stream, so the swap
/// refinement starts from the same association that plain random reports.
pub fn matching_effectiveness_study(
    cfg: &ScenarioConfig,
    slots: usize,
    seeds: &[u64],
) -> Result<StudyReport, HarnessError> {
    let mut samples = Vec::with_capacity(slots * seeds.len() * StrategyKind::ALL.len());
    for &seed in seeds {
        let s = build_scenario(cfg, seed)?;
        let l = s.layout;
        let mut motion = ChaCha8Rng::seed_from_u64(seed ^ MOTION_STREAM);
        let mut uav = s.uav_init_positions.clone();
        for slot in 1..=slots {
            for p in &mut uav {
                let d = motion.random_range(0.0..=s.max_move());
                let h = motion.random_range(0.0..TAU);
                *p = s.area.clamp([p[0] + d * h.cos(), p[1] + d * h.sin()]);
            }
            let powers = (0..l.num_gus())
                .map(|_| motion.random_range(0.0..=s.radio.max_tx_power))
                .collect();
            let problem = AssociationProblem::from_positions(
                l,
                s.uav_capacity,
                s.radio,
                s.area.altitude,
                &uav,
                &s.gu_positions,
                powers,
                vec![true; l.num_gus()],
            )?;
            let slot_rng = ChaCha8Rng::seed_from_u64((seed << 32 | slot as u64) ^ MATCH_STREAM);
            for kind in StrategyKind::ALL {
                let mut rng = slot_rng.clone();
                let t = Instant::now();
                let out = strategy_variant(kind, &problem, &mut rng, s.swap_iteration_cap);
                let seconds = t.elapsed().as_secs_f64();
                samples.push(StudySample {
                    seed,
                    slot,
                    strategy: kind,
                    sum_rate: utility(&out.association, &problem),
                    seconds,
                    swaps: out.swaps,
                    capped: out.capped,
                });
            }
        }
    }
    let summaries = StrategyKind::ALL
        .iter()
        .map(|&kind| {
            let mine: Vec<&StudySample> = samples.iter().filter(|x| x.strategy == kind).collect();
            let n = mine.len().max(1) as f64;
            let total: f64 = mine.iter().map(|x| x.seconds).sum();
            StrategySummary {
                strategy: kind,
                mean_sum_rate: mine.iter().map(|x| x.sum_rate).sum::<f64>() / n,
                total_seconds: total,
                mean_seconds_per_slot: total / n,
                capped_slots: mine.iter().filter(|x| x.capped).count(),
            }
        })
        .collect();
    Ok(StudyReport { summaries, samples })
}
