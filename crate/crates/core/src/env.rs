//! The reduced-action MDP.
//!
//! The agent controls UAV motion and ground-user transmit powers; the
//! association is not part of the action but is produced each slot by the
//! configured matching strategy (TMA by default).

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::energy::{compute_energy, propulsion_energy, EnergyError, EnergyLedger, SlotEnergy, UavRole};
use crate::matching::{strategy_variant, Association, AssociationProblem, MatchingError, StrategyKind};
use crate::scenario::{Layout, Scenario};
use crate::tasking::{
    completion_rate, dc_rate, expire_and_rotate, serve_slot, ServiceReport, TaskBook, TaskingError,
};

const ASSOCIATION_STREAM: u64 = 0x5eed_a550_c1a7_e000;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called after the episode finished")]
    EpisodeDone,
    #[error("action has {got} components, expected {expected}")]
    ActionLength { got: usize, expected: usize },
    #[error("action component {0} is not finite")]
    NonFiniteAction(usize),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Tasking(#[from] TaskingError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// |s_t| = 2(N_U+1) + 2N_g + 2M + N + 1.
pub fn state_dim(layout: &Layout) -> usize {
    2 * layout.num_uavs() + 2 * layout.num_gus() + 2 * layout.num_mec_users + layout.num_dc_users + 1
}

/// |a_t| = 2(N_U+1) + N_g.
pub fn action_dim(layout: &Layout) -> usize {
    2 * layout.num_uavs() + layout.num_gus()
}

/// Observation in physical units and its normalized copy.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl StateVector {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Normalized action in [−1, 1]: move fractions for every UAV, then
/// headings for every UAV, then powers for every ground user.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector(pub Vec<f64>);

/// De-normalized action.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalAction {
    /// m_u in [0, m_max].
    pub moves: Vec<f64>,
    /// α_u in [0, 2π).
    pub headings: Vec<f64>,
    /// p_g in [0, p_max].
    pub powers: Vec<f64>,
}

fn unit(a: f64) -> f64 {
    (a.clamp(-1.0, 1.0) + 1.0) / 2.0
}

impl ActionVector {
    pub fn zeros(layout: &Layout) -> Self {
        Self(vec![0.0; action_dim(layout)])
    }

    /// Hover with zero movement, all powers at `power_frac` of p_max.
    pub fn hover(layout: &Layout, power_frac: f64) -> Self {
        let n = layout.num_uavs();
        let mut v = vec![-1.0; 2 * n];
        v.extend(std::iter::repeat_n(2.0 * power_frac - 1.0, layout.num_gus()));
        Self(v)
    }

    pub fn denormalize(&self, layout: &Layout, max_move: f64, max_power: f64) -> PhysicalAction {
        let n = layout.num_uavs();
        let a = &self.0;
        PhysicalAction {
            moves: a[..n].iter().map(|&x| unit(x) * max_move).collect(),
            headings: a[n..2 * n]
                .iter()
                .map(|&x| {
                    let h = unit(x) * TAU;
                    if h >= TAU {
                        0.0
                    } else {
                        h
                    }
                })
                .collect(),
            powers: a[2 * n..].iter().map(|&x| unit(x) * max_power).collect(),
        }
    }

    pub fn from_physical(p: &PhysicalAction, max_move: f64, max_power: f64) -> Self {
        let norm = |x: f64, hi: f64| if hi > 0.0 { (2.0 * x / hi - 1.0).clamp(-1.0, 1.0) } else { -1.0 };
        let mut v: Vec<f64> = p.moves.iter().map(|&m| norm(m, max_move)).collect();
        v.extend(p.headings.iter().map(|&h| norm(h.rem_euclid(TAU), TAU)));
        v.extend(p.powers.iter().map(|&x| norm(x, max_power)));
        Self(v)
    }
}

/// Nonpositive penalty components (the energy term may be positive only in
/// signed mode).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PenaltyTerms {
    pub collision: f64,
    pub boundary: f64,
    pub energy: f64,
}

impl PenaltyTerms {
    pub fn sum(&self) -> f64 {
        self.collision + self.boundary + self.energy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RewardBreakdown {
    pub latency: f64,
    pub dc: f64,
    pub penalty: f64,
    pub total: f64,
    pub terms: PenaltyTerms,
}

impl RewardBreakdown {
    pub fn new(latency: f64, dc: f64, terms: PenaltyTerms) -> Self {
        let penalty = terms.sum();
        Self {
            latency,
            dc,
            penalty,
            total: latency + dc + penalty,
            terms,
        }
    }
}

/// Everything the simulator tracks between slots.
#[derive(Debug, Clone)]
pub struct WorldState {
    /// Completed steps.
    pub steps: usize,
    /// T°.
    pub remaining: usize,
    pub uav_pos: Vec<[f64; 2]>,
    pub gu_pos: Vec<[f64; 2]>,
    pub book: TaskBook,
    pub ledger: EnergyLedger,
    /// Association of the last slot.
    pub association: Association,
    pub powers: Vec<f64>,
}

/// Side information from one step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub slot: usize,
    pub association: Association,
    /// Rate of each user at its UAV, 0 if unassociated.
    pub rates: Vec<f64>,
    /// Thresholded sum rate of the association.
    pub utility: f64,
    pub report: ServiceReport,
    pub expired: usize,
    pub collisions: usize,
    /// Commanded positions beyond the area, per UAV.
    pub overshoot: Vec<[f64; 2]>,
    pub energy: Vec<SlotEnergy>,
    pub match_capped: bool,
    pub swaps: usize,
    /// Wall-clock seconds spent in the association call.
    pub match_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub state: StateVector,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub info: StepInfo,
}

/// Totals over an episode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EpisodeMetrics {
    pub steps: usize,
    pub sum_reward: f64,
    pub latency_reward: f64,
    pub dc_reward: f64,
    pub penalty: f64,
    pub dc_volume_bits: u64,
    pub completion_rate: f64,
    pub dc_rate: f64,
    pub avg_energy_per_uav_step: f64,
    pub collisions: usize,
    pub mean_sum_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub slot: usize,
    pub latency: f64,
    pub dc: f64,
    pub penalty: f64,
    pub collision: f64,
    pub boundary: f64,
    pub energy_penalty: f64,
    pub total: f64,
    pub energy_j: f64,
    pub pairs: usize,
    pub utility: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub slot: usize,
    pub uav: usize,
    pub x: f64,
    pub y: f64,
}

/// Σ over served task slices of t_max minus the slice's service seconds.
pub fn latency_reward(report: &ServiceReport) -> f64 {
    report
        .tasks
        .iter()
        .map(|t| t.t_max - (t.tx_seconds + t.compute_seconds))
        .sum()
}

/// Σ over collected DC users of σ·L_n·scale, with L_n taken before
/// collection and σ halved for full buffers.
pub fn dc_reward(report: &ServiceReport, storage_limit: u64, scale: f64) -> f64 {
    report
        .dc
        .iter()
        .map(|c| {
            let sigma = if c.stored_before >= storage_limit { 0.5 } else { 1.0 };
            sigma * c.stored_before as f64 * scale
        })
        .sum()
}

/// Number of UAV pairs closer than `min_sep`.
pub fn count_collisions(positions: &[[f64; 2]], min_sep: f64) -> usize {
    let mut n = 0;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if dx.hypot(dy) < min_sep {
                n += 1;
            }
        }
    }
    n
}

/// Collision, boundary and energy penalties for one slot.
pub fn penalty_reward(
    scenario: &Scenario,
    collisions: usize,
    overshoot: &[[f64; 2]],
    slot_totals: &[f64],
) -> PenaltyTerms {
    let rw = &scenario.rewards;
    let collision = -rw.collision_penalty * collisions as f64;
    let denom = rw.boundary_factor * scenario.max_move();
    let boundary = -overshoot
        .iter()
        .map(|b| b[0].hypot(b[1]) / denom)
        .sum::<f64>();
    let per_slot_budget = |u: usize| scenario.compute_for(u).energy_budget / scenario.horizon as f64;
    let excess: f64 = slot_totals
        .iter()
        .enumerate()
        .map(|(u, &e)| {
            let d = e - per_slot_budget(u);
            if rw.signed_energy_penalty {
                d
            } else {
                d.max(0.0)
            }
        })
        .sum();
    PenaltyTerms {
        collision,
        boundary,
        energy: -rw.energy_coef * excess,
    }
}

/// Assembles s_t in field order.
pub fn state_vector(scenario: &Scenario, world: &WorldState) -> StateVector {
    let layout = scenario.layout;
    let area = &scenario.area;
    let c = area.center();
    let h = area.half_extent();
    let mut raw = Vec::with_capacity(state_dim(&layout));
    let mut norm = Vec::with_capacity(state_dim(&layout));
    let mut push = |r: f64, n: f64| {
        raw.push(r);
        norm.push(n.clamp(-1.0, 1.0));
    };
    for p in world.uav_pos.iter().chain(&world.gu_pos) {
        push(p[0], (p[0] - c[0]) / h[0]);
        push(p[1], (p[1] - c[1]) / h[1]);
    }
    let tp = &scenario.tasks;
    let deadline_slots = scenario.deadline_slots();
    let l_scale = (tp.max_size() * (deadline_slots as u64 + 1)) as f64;
    for q in &world.book.queues {
        let l = q.unfinished_bits() as f64;
        push(l, l / l_scale);
    }
    // Next slot index is steps + 1.
    let now = world.steps + 1;
    for q in &world.book.queues {
        let d = q
            .head()
            .map(|t| (t.deadline_slot + 1).saturating_sub(now) as f64 * scenario.slot_len)
            .unwrap_or(0.0);
        push(d, d / tp.deadline);
    }
    for b in &world.book.buffers {
        let l = b.stored as f64;
        push(l, l / tp.dc_storage_limit as f64);
    }
    push(world.remaining as f64, world.remaining as f64 / scenario.horizon as f64);
    StateVector { raw, normalized: norm }
}

pub struct Env {
    scenario: Scenario,
    world: WorldState,
    rng: ChaCha8Rng,
    assoc_rng: ChaCha8Rng,
    strategy: StrategyKind,
    metrics: EpisodeMetrics,
    sum_rate_total: f64,
    record: bool,
    trace: Vec<TraceRow>,
    trajectory: Vec<TrajectoryRow>,
    associations: Vec<Association>,
}

impl Env {
    /// Builds the environment and resets it with `seed`.
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        let strategy = scenario.association;
        let world = Self::fresh_world(&scenario);
        let mut env = Self {
            scenario,
            world,
            rng: ChaCha8Rng::seed_from_u64(seed),
            assoc_rng: ChaCha8Rng::seed_from_u64(seed ^ ASSOCIATION_STREAM),
            strategy,
            metrics: EpisodeMetrics::default(),
            sum_rate_total: 0.0,
            record: false,
            trace: Vec::new(),
            trajectory: Vec::new(),
            associations: Vec::new(),
        };
        env.reset(seed);
        env
    }

    fn fresh_world(s: &Scenario) -> WorldState {
        let layout = s.layout;
        let roles = (0..layout.num_uavs())
            .map(|u| if layout.is_mec_uav(u) { UavRole::Mec } else { UavRole::Dc })
            .collect();
        WorldState {
            steps: 0,
            remaining: s.horizon,
            uav_pos: s.uav_init_positions.clone(),
            gu_pos: s.gu_positions.clone(),
            book: TaskBook::new(layout, s.deadline_slots()),
            ledger: EnergyLedger::new(roles),
            association: Association::new(layout.num_uavs(), layout.num_gus()),
            powers: vec![0.0; layout.num_gus()],
        }
    }

    pub fn reset(&mut self, seed: u64) -> StateVector {
        self.world = Self::fresh_world(&self.scenario);
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.assoc_rng = ChaCha8Rng::seed_from_u64(seed ^ ASSOCIATION_STREAM);
        self.metrics = EpisodeMetrics::default();
        self.sum_rate_total = 0.0;
        self.trace.clear();
        self.trajectory.clear();
        self.associations.clear();
        self.state()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn layout(&self) -> Layout {
        self.scenario.layout
    }

    pub fn state_dim(&self) -> usize {
        state_dim(&self.scenario.layout)
    }

    pub fn action_dim(&self) -> usize {
        action_dim(&self.scenario.layout)
    }

    pub fn strategy(&self) -> StrategyKind {
        self.strategy
    }

    pub fn set_strategy(&mut self, kind: StrategyKind) {
        self.strategy = kind;
    }

    /// Keeps per-step trace, trajectory and association rows.
    pub fn set_recording(&mut self, on: bool) {
        self.record = on;
    }

    pub fn is_done(&self) -> bool {
        self.world.remaining == 0
    }

    pub fn state(&self) -> StateVector {
        state_vector(&self.scenario, &self.world)
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        let mut m = self.metrics;
        m.steps = self.world.steps;
        m.completion_rate = completion_rate(&self.world.book.tally);
        m.dc_rate = dc_rate(&self.world.book.buffers);
        m.dc_volume_bits = self.world.book.buffers.iter().map(|b| b.collected_total).sum();
        m.avg_energy_per_uav_step = self.world.ledger.mean_per_uav_slot();
        m.mean_sum_rate = if self.world.steps == 0 {
            0.0
        } else {
            self.sum_rate_total / self.world.steps as f64
        };
        m
    }

    /// One slot of the pipeline.
    pub fn step(&mut self, action: &ActionVector) -> Result<Transition, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeDone);
        }
        let expected = self.action_dim();
        if action.0.len() != expected {
            return Err(EnvError::ActionLength {
                got: action.0.len(),
                expected,
            });
        }
        if let Some(i) = action.0.iter().position(|x| !x.is_finite()) {
            return Err(EnvError::NonFiniteAction(i));
        }
        let s = &self.scenario;
        let layout = s.layout;
        let slot = self.world.steps + 1;

        let act = action.denormalize(&layout, s.max_move(), s.radio.max_tx_power);

        let mut overshoot = Vec::with_capacity(layout.num_uavs());
        for u in 0..layout.num_uavs() {
            let p = self.world.uav_pos[u];
            let (sin, cos) = act.headings[u].sin_cos();
            let target = [p[0] + act.moves[u] * cos, p[1] + act.moves[u] * sin];
            overshoot.push(s.area.overshoot(target));
            self.world.uav_pos[u] = if s.rewards.allow_outside {
                target
            } else {
                s.area.clamp(target)
            };
        }

        let collisions = count_collisions(&self.world.uav_pos, s.area.min_separation);

        self.world.book.generate(slot, &mut self.rng, &s.tasks);

        let eligible = self.world.book.eligibility(s.tasks.dc_min_collectible);
        let problem = AssociationProblem::from_positions(
            layout,
            s.uav_capacity,
            s.radio,
            s.area.altitude,
            &self.world.uav_pos,
            &self.world.gu_pos,
            act.powers.clone(),
            eligible,
        )?;
        let started = Instant::now();
        let outcome = strategy_variant(self.strategy, &problem, &mut self.assoc_rng, s.swap_iteration_cap);
        let match_seconds = started.elapsed().as_secs_f64();
        let mut association = outcome.association;
        association.slot = slot;

        let rates = problem.pair_rates(&association);
        let report = serve_slot(
            &mut self.world.book,
            &association,
            &rates,
            &s.compute,
            s.slot_len,
            slot,
            s.tasks.strict_tmax_completion,
        )?;

        let expired = expire_and_rotate(&mut self.world.book, slot).len();

        let mut energy = Vec::with_capacity(layout.num_uavs());
        let mut totals = Vec::with_capacity(layout.num_uavs());
        for u in 0..layout.num_uavs() {
            let move_j = propulsion_energy(act.moves[u] / s.slot_len, s.slot_len, &s.propulsion)?;
            let compute_j = if layout.is_mec_uav(u) {
                compute_energy(report.uav_bits[u] as f64, s.compute_for(u))
            } else {
                0.0
            };
            let e = SlotEnergy { move_j, compute_j };
            totals.push(self.world.ledger.record(u, e));
            energy.push(e);
        }
        let terms = penalty_reward(s, collisions, &overshoot, &totals);

        let reward = RewardBreakdown::new(
            latency_reward(&report),
            dc_reward(&report, s.tasks.dc_storage_limit, s.rewards.dc_reward_scale),
            terms,
        );

        self.world.steps = slot;
        self.world.remaining -= 1;
        self.world.powers = act.powers;
        self.world.association = association.clone();

        let utility = outcome.utility;
        self.sum_rate_total += utility;
        let m = &mut self.metrics;
        m.sum_reward += reward.total;
        m.latency_reward += reward.latency;
        m.dc_reward += reward.dc;
        m.penalty += reward.penalty;
        m.collisions += collisions;

        if self.record {
            self.trace.push(TraceRow {
                slot,
                latency: reward.latency,
                dc: reward.dc,
                penalty: reward.penalty,
                collision: terms.collision,
                boundary: terms.boundary,
                energy_penalty: terms.energy,
                total: reward.total,
                energy_j: totals.iter().sum(),
                pairs: association.num_pairs(),
                utility,
            });
            for (u, p) in self.world.uav_pos.iter().enumerate() {
                self.trajectory.push(TrajectoryRow { slot, uav: u, x: p[0], y: p[1] });
            }
            self.associations.push(association.clone());
        }

        Ok(Transition {
            state: self.state(),
            reward,
            done: self.is_done(),
            info: StepInfo {
                slot,
                association,
                rates,
                utility,
                report,
                expired,
                collisions,
                overshoot,
                energy,
                match_capped: outcome.capped,
                swaps: outcome.swaps,
                match_seconds,
            },
        })
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn trajectory(&self) -> &[TrajectoryRow] {
        &self.trajectory
    }

    pub fn associations(&self) -> &[Association] {
        &self.associations
    }

    pub fn write_trace<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        write_rows(out, &self.trace)
    }

    pub fn write_trajectory<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        write_rows(out, &self.trajectory)
    }

    pub fn write_associations<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slot", "gu", "uav"])?;
        for a in &self.associations {
            a.write_csv_rows(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes trace.csv, trajectory.csv, association.csv, energy.csv and
    /// tasks.csv into `dir`.
    pub fn save_episode(&self, dir: &Path) -> Result<(), EnvError> {
        let open = |name: &str| std::fs::File::create(dir.join(name)).map_err(EnergyError::Io);
        self.write_trace(open("trace.csv")?).map_err(EnergyError::Csv)?;
        self.write_trajectory(open("trajectory.csv")?).map_err(EnergyError::Csv)?;
        self.write_associations(open("association.csv")?).map_err(EnergyError::Csv)?;
        self.world.ledger.save_csv(&dir.join("energy.csv"))?;
        self.world.book.save_event_log(&dir.join("tasks.csv"))?;
        Ok(())
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
