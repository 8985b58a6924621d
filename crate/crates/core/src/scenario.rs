//! Scenario configuration and generation.
//!
//! A [`Scenario`] is the immutable description of one experiment: the area,
//! the radio/compute/propulsion constants, the task profile, the UAV and
//! ground-user rosters, and the reward shaping constants. Every constant the
//! rest of the crate consumes is reached through one of its fields.
//!
//! Scenarios are loaded from a flat `key = value` document (TOML syntax,
//! `#` comments). Absent keys take the defaults of [`ScenarioConfig`];
//! unknown keys are rejected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ElevationMode, RadioParams};
use crate::energy::{ComputeParams, PropulsionParams};
use crate::matching::StrategyKind;

/// Bits in one kilobit as used by the task size table.
pub const KBIT: u64 = 1024;
/// Bits in one megabit as used by storage limits.
pub const MBIT: u64 = 1024 * 1024;

/// Salt mixed into the scenario seed for ground-user placement so that the
/// placement stream is independent of the environment's own stream.
const PLACEMENT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// One failed scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

/// Rectangular service area at a fixed flight altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// UAV altitude H in meters.
    pub altitude: f64,
    /// Minimum safe UAV separation in meters.
    pub min_separation: f64,
}

impl AreaSpec {
    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        ]
    }

    pub fn half_extent(&self) -> [f64; 2] {
        [
            0.5 * (self.x_max - self.x_min),
            0.5 * (self.y_max - self.y_min),
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.x_min, self.x_max),
            p[1].clamp(self.y_min, self.y_max),
        ]
    }

    /// Distances (B^x, B^y) by which `p` lies outside the area on each axis.
    pub fn overshoot(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.x_max).max(0.0) + (self.x_min - p[0]).max(0.0),
            (p[1] - self.y_max).max(0.0) + (self.y_min - p[1]).max(0.0),
        ]
    }
}

/// MEC task sizes, tolerances and DC storage limits. Sizes are in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskProfile {
    pub sizes: Vec<u64>,
    pub size_probs: Vec<f64>,
    /// Tolerance t_max in seconds, aligned with `sizes`.
    pub tolerance_limits: Vec<f64>,
    /// Deadline D in seconds.
    pub deadline: f64,
    /// Per-slot generation probability increment δ_g.
    pub density: f64,
    /// DC storage limit L_max in bits.
    pub dc_storage_limit: u64,
    /// Minimum stored bits before a DC user may be associated.
    pub dc_min_collectible: u64,
    /// Also require cumulative service time ≤ t_max for a task to count as
    /// completed.
    pub strict_tmax_completion: bool,
}

impl TaskProfile {
    pub fn max_size(&self) -> u64 {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Reward shaping constants and the constraint-handling switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// ϱ, charged once per UAV pair closer than the safe separation.
    pub collision_penalty: f64,
    /// ρ, divides the boundary overshoot.
    pub boundary_factor: f64,
    /// δ_p, multiplies per-slot energy excess.
    pub energy_coef: f64,
    /// Multiplier bringing stored bits into reward units.
    pub dc_reward_scale: f64,
    /// Use the signed energy term (rewards under-spending) instead of max(0, ·).
    pub signed_energy_penalty: bool,
    /// Leave out-of-area UAVs where they are instead of clamping.
    pub allow_outside: bool,
}

/// Index bookkeeping for UAVs and ground users.
///
/// UAVs `0..num_mec_uavs` are MEC-UAVs and UAV `num_mec_uavs` is the DC-UAV.
/// Ground users `0..num_mec_users` are MEC users, the rest are DC users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub num_mec_uavs: usize,
    pub num_mec_users: usize,
    pub num_dc_users: usize,
}

impl Layout {
    pub fn num_uavs(&self) -> usize {
        self.num_mec_uavs + 1
    }
    pub fn num_gus(&self) -> usize {
        self.num_mec_users + self.num_dc_users
    }
    pub fn dc_uav(&self) -> usize {
        self.num_mec_uavs
    }
    pub fn is_mec_uav(&self, u: usize) -> bool {
        u < self.num_mec_uavs
    }
    pub fn is_mec_user(&self, g: usize) -> bool {
        g < self.num_mec_users
    }
    pub fn is_dc_user(&self, g: usize) -> bool {
        g >= self.num_mec_users && g < self.num_gus()
    }
    pub fn mec_users(&self) -> std::ops::Range<usize> {
        0..self.num_mec_users
    }
    pub fn dc_users(&self) -> std::ops::Range<usize> {
        self.num_mec_users..self.num_gus()
    }
    pub fn mec_uavs(&self) -> std::ops::Range<usize> {
        0..self.num_mec_uavs
    }
    /// Whether `g` may be associated with `u` at all.
    pub fn compatible(&self, u: usize, g: usize) -> bool {
        if self.is_mec_user(g) {
            self.is_mec_uav(u)
        } else {
            u == self.dc_uav()
        }
    }
}

/// Flat configuration document. Every field has a default; see
/// [`ScenarioConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub altitude_m: f64,
    pub min_separation_m: f64,

    pub lambda1: f64,
    pub lambda2: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub carrier_freq_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub rate_threshold_mec_bps: f64,
    pub rate_threshold_dc_bps: f64,
    pub max_tx_power_w: f64,
    pub elevation: ElevationMode,

    pub cycles_per_bit: f64,
    pub cpu_freq_hz: f64,
    pub switch_cap: f64,
    pub energy_budget_j: f64,
    /// Optional per-MEC-UAV overrides of the compute constants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles_per_bit_per_uav: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpu_freq_per_uav: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_cap_per_uav: Option<Vec<f64>>,

    pub blade_profile_power_w: f64,
    pub induced_power_w: f64,
    pub rotor_tip_speed: f64,
    pub mean_induced_velocity: f64,
    pub fuselage_drag_ratio: f64,
    pub air_density: f64,
    pub rotor_solidity: f64,
    pub rotor_disc_area: f64,

    pub task_sizes_bits: Vec<u64>,
    pub task_size_probs: Vec<f64>,
    pub task_tolerance_s: Vec<f64>,
    pub task_deadline_s: f64,
    pub task_density: f64,
    pub dc_storage_limit_bits: u64,
    pub dc_min_collectible_bits: u64,
    pub strict_tmax_completion: bool,

    pub num_mec_uavs: usize,
    pub num_mec_users: usize,
    pub num_dc_users: usize,
    pub uav_capacity: usize,
    pub slot_len_s: f64,
    pub horizon: usize,
    pub max_speed: f64,
    pub uav_init_positions: Vec<[f64; 2]>,
    /// Fixed ground-user positions; drawn uniformly from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gu_positions: Option<Vec<[f64; 2]>>,

    pub collision_penalty: f64,
    pub boundary_penalty_factor: f64,
    pub energy_penalty_coef: f64,
    pub dc_reward_scale: f64,
    pub signed_energy_penalty: bool,
    pub allow_outside: bool,

    pub association: StrategyKind,
    pub swap_iteration_cap: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            x_min: -750.0,
            x_max: 750.0,
            y_min: -750.0,
            y_max: 750.0,
            altitude_m: 100.0,
            min_separation_m: 3.0,

            // Dense-urban air-to-ground constants.
            lambda1: 9.61,
            lambda2: 0.16,
            eta_los_db: 0.1,
            eta_nlos_db: 21.0,
            carrier_freq_hz: 2e9,
            noise_psd_dbm_per_hz: -140.0,
            bandwidth_hz: 3e6,
            rate_threshold_mec_bps: 1.6e6,
            rate_threshold_dc_bps: 1e6,
            max_tx_power_w: 0.5,
            elevation: ElevationMode::SlantRange,

            cycles_per_bit: 1000.0,
            cpu_freq_hz: 6e9,
            switch_cap: 1e-27,
            energy_budget_j: 30e3,
            cycles_per_bit_per_uav: None,
            cpu_freq_per_uav: None,
            switch_cap_per_uav: None,

            blade_profile_power_w: 79.86,
            induced_power_w: 88.63,
            rotor_tip_speed: 120.0,
            mean_induced_velocity: 4.03,
            fuselage_drag_ratio: 0.6,
            air_density: 1.225,
            rotor_solidity: 0.05,
            rotor_disc_area: 0.503,

            task_sizes_bits: vec![512 * KBIT, 256 * KBIT, 128 * KBIT],
            task_size_probs: vec![0.2, 0.3, 0.5],
            task_tolerance_s: vec![1.0, 0.5, 0.25],
            task_deadline_s: 20.0,
            task_density: 0.2,
            dc_storage_limit_bits: 60 * MBIT,
            // One slot of collection at the DC threshold rate.
            dc_min_collectible_bits: 1_000_000,
            strict_tmax_completion: false,

            num_mec_uavs: 3,
            num_mec_users: 25,
            num_dc_users: 10,
            uav_capacity: 4,
            slot_len_s: 1.0,
            horizon: 300,
            max_speed: 50.0,
            uav_init_positions: vec![
                [-500.0, 500.0],
                [-500.0, -500.0],
                [500.0, 500.0],
                [500.0, -500.0],
            ],
            gu_positions: None,

            collision_penalty: 10.0,
            boundary_penalty_factor: 1.0,
            energy_penalty_coef: 0.01,
            dc_reward_scale: 1e-7,
            signed_energy_penalty: false,
            allow_outside: false,

            association: StrategyKind::Tma,
            swap_iteration_cap: 500,
        }
    }
}

impl ScenarioConfig {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        toml::from_str(source).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }
}

/// Immutable description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub area: AreaSpec,
    pub radio: RadioParams<f64>,
    /// Compute constants, one entry per UAV (the DC-UAV entry only supplies
    /// its energy budget).
    pub compute: Vec<ComputeParams<f64>>,
    pub propulsion: PropulsionParams<f64>,
    pub tasks: TaskProfile,
    pub rewards: RewardParams,
    pub layout: Layout,
    /// N_u^max, the per-UAV service capacity.
    pub uav_capacity: usize,
    /// Slot length τ in seconds.
    pub slot_len: f64,
    /// Episode horizon T in slots.
    pub horizon: usize,
    pub max_speed: f64,
    pub uav_init_positions: Vec<[f64; 2]>,
    pub gu_positions: Vec<[f64; 2]>,
    pub association: StrategyKind,
    pub swap_iteration_cap: usize,
    pub seed: u64,
    /// Whether `gu_positions` came from the config rather than the seed.
    explicit_positions: bool,
}

impl Scenario {
    /// Maximum move distance per slot, m_max = max_speed · τ.
    pub fn max_move(&self) -> f64 {
        self.max_speed * self.slot_len
    }

    pub fn compute_for(&self, uav: usize) -> &ComputeParams<f64> {
        &self.compute[uav]
    }

    /// Number of slots a task survives after birth, ⌈D/τ⌉.
    pub fn deadline_slots(&self) -> usize {
        (self.tasks.deadline / self.slot_len - 1e-9).ceil().max(0.0) as usize
    }

    /// Builds a scenario from a parsed config. Performs no validation.
    pub fn from_config(cfg: &ScenarioConfig, seed: u64) -> Self {
        let layout = Layout {
            num_mec_uavs: cfg.num_mec_uavs,
            num_mec_users: cfg.num_mec_users,
            num_dc_users: cfg.num_dc_users,
        };
        let area = AreaSpec {
            x_min: cfg.x_min,
            x_max: cfg.x_max,
            y_min: cfg.y_min,
            y_max: cfg.y_max,
            altitude: cfg.altitude_m,
            min_separation: cfg.min_separation_m,
        };
        let radio = RadioParams {
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            eta_los_db: cfg.eta_los_db,
            eta_nlos_db: cfg.eta_nlos_db,
            carrier_freq_hz: cfg.carrier_freq_hz,
            bandwidth_hz: cfg.bandwidth_hz,
            rate_threshold_mec: cfg.rate_threshold_mec_bps,
            rate_threshold_dc: cfg.rate_threshold_dc_bps,
            max_tx_power: cfg.max_tx_power_w,
            elevation: cfg.elevation,
            ..RadioParams::with_noise_dbm(cfg.noise_psd_dbm_per_hz)
        };
        let pick = |over: &Option<Vec<f64>>, u: usize, shared: f64| {
            over.as_ref()
                .and_then(|v| v.get(u).copied())
                .unwrap_or(shared)
        };
        let compute = (0..layout.num_uavs())
            .map(|u| ComputeParams {
                cycles_per_bit: pick(&cfg.cycles_per_bit_per_uav, u, cfg.cycles_per_bit),
                cpu_freq: pick(&cfg.cpu_freq_per_uav, u, cfg.cpu_freq_hz),
                switch_cap: pick(&cfg.switch_cap_per_uav, u, cfg.switch_cap),
                energy_budget: cfg.energy_budget_j,
            })
            .collect();
        let propulsion = PropulsionParams {
            blade_profile_power: cfg.blade_profile_power_w,
            induced_power: cfg.induced_power_w,
            tip_speed: cfg.rotor_tip_speed,
            mean_induced_velocity: cfg.mean_induced_velocity,
            fuselage_drag_ratio: cfg.fuselage_drag_ratio,
            air_density: cfg.air_density,
            rotor_solidity: cfg.rotor_solidity,
            rotor_disc_area: cfg.rotor_disc_area,
        };
        let tasks = TaskProfile {
            sizes: cfg.task_sizes_bits.clone(),
            size_probs: cfg.task_size_probs.clone(),
            tolerance_limits: cfg.task_tolerance_s.clone(),
            deadline: cfg.task_deadline_s,
            density: cfg.task_density,
            dc_storage_limit: cfg.dc_storage_limit_bits,
            dc_min_collectible: cfg.dc_min_collectible_bits,
            strict_tmax_completion: cfg.strict_tmax_completion,
        };
        let rewards = RewardParams {
            collision_penalty: cfg.collision_penalty,
            boundary_factor: cfg.boundary_penalty_factor,
            energy_coef: cfg.energy_penalty_coef,
            dc_reward_scale: cfg.dc_reward_scale,
            signed_energy_penalty: cfg.signed_energy_penalty,
            allow_outside: cfg.allow_outside,
        };
        let (gu_positions, explicit_positions) = match &cfg.gu_positions {
            Some(p) => (p.clone(), true),
            None => (place_ground_users(&area, layout.num_gus(), seed), false),
        };
        Self {
            area,
            radio,
            compute,
            propulsion,
            tasks,
            rewards,
            layout,
            uav_capacity: cfg.uav_capacity,
            slot_len: cfg.slot_len_s,
            horizon: cfg.horizon,
            max_speed: cfg.max_speed,
            uav_init_positions: cfg.uav_init_positions.clone(),
            gu_positions,
            association: cfg.association,
            swap_iteration_cap: cfg.swap_iteration_cap,
            seed,
            explicit_positions,
        }
    }

    /// Reconstructs the config document this scenario resolves to.
    pub fn to_config(&self) -> ScenarioConfig {
        let shared = &self.compute[0];
        let per_uav = |f: fn(&ComputeParams<f64>) -> f64| {
            let vals: Vec<f64> = self.compute.iter().map(f).collect();
            if vals.iter().all(|v| *v == f(shared)) {
                None
            } else {
                Some(vals)
            }
        };
        ScenarioConfig {
            x_min: self.area.x_min,
            x_max: self.area.x_max,
            y_min: self.area.y_min,
            y_max: self.area.y_max,
            altitude_m: self.area.altitude,
            min_separation_m: self.area.min_separation,
            lambda1: self.radio.lambda1,
            lambda2: self.radio.lambda2,
            eta_los_db: self.radio.eta_los_db,
            eta_nlos_db: self.radio.eta_nlos_db,
            carrier_freq_hz: self.radio.carrier_freq_hz,
            noise_psd_dbm_per_hz: self.radio.noise_psd_dbm_per_hz,
            bandwidth_hz: self.radio.bandwidth_hz,
            rate_threshold_mec_bps: self.radio.rate_threshold_mec,
            rate_threshold_dc_bps: self.radio.rate_threshold_dc,
            max_tx_power_w: self.radio.max_tx_power,
            elevation: self.radio.elevation,
            cycles_per_bit: shared.cycles_per_bit,
            cpu_freq_hz: shared.cpu_freq,
            switch_cap: shared.switch_cap,
            energy_budget_j: shared.energy_budget,
            cycles_per_bit_per_uav: per_uav(|c| c.cycles_per_bit),
            cpu_freq_per_uav: per_uav(|c| c.cpu_freq),
            switch_cap_per_uav: per_uav(|c| c.switch_cap),
            blade_profile_power_w: self.propulsion.blade_profile_power,
            induced_power_w: self.propulsion.induced_power,
            rotor_tip_speed: self.propulsion.tip_speed,
            mean_induced_velocity: self.propulsion.mean_induced_velocity,
            fuselage_drag_ratio: self.propulsion.fuselage_drag_ratio,
            air_density: self.propulsion.air_density,
            rotor_solidity: self.propulsion.rotor_solidity,
            rotor_disc_area: self.propulsion.rotor_disc_area,
            task_sizes_bits: self.tasks.sizes.clone(),
            task_size_probs: self.tasks.size_probs.clone(),
            task_tolerance_s: self.tasks.tolerance_limits.clone(),
            task_deadline_s: self.tasks.deadline,
            task_density: self.tasks.density,
            dc_storage_limit_bits: self.tasks.dc_storage_limit,
            dc_min_collectible_bits: self.tasks.dc_min_collectible,
            strict_tmax_completion: self.tasks.strict_tmax_completion,
            num_mec_uavs: self.layout.num_mec_uavs,
            num_mec_users: self.layout.num_mec_users,
            num_dc_users: self.layout.num_dc_users,
            uav_capacity: self.uav_capacity,
            slot_len_s: self.slot_len,
            horizon: self.horizon,
            max_speed: self.max_speed,
            uav_init_positions: self.uav_init_positions.clone(),
            gu_positions: self.explicit_positions.then(|| self.gu_positions.clone()),
            collision_penalty: self.rewards.collision_penalty,
            boundary_penalty_factor: self.rewards.boundary_factor,
            energy_penalty_coef: self.rewards.energy_coef,
            dc_reward_scale: self.rewards.dc_reward_scale,
            signed_energy_penalty: self.rewards.signed_energy_penalty,
            allow_outside: self.rewards.allow_outside,
            association: self.association,
            swap_iteration_cap: self.swap_iteration_cap,
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::from_config(&ScenarioConfig::default(), 0)
    }
}

/// Parses `source`, applies defaults and draws ground-user positions from
/// `seed`. Fails on malformed input or any violated invariant.
pub fn generate_scenario(source: &str, seed: u64) -> Result<Scenario, ConfigError> {
    let cfg = ScenarioConfig::parse(source)?;
    let scenario = Scenario::from_config(&cfg, seed);
    let violations = validate(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

fn place_ground_users(area: &AreaSpec, count: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PLACEMENT_STREAM);
    (0..count)
        .map(|_| {
            [
                rng.random_range(area.x_min..=area.x_max),
                rng.random_range(area.y_min..=area.y_max),
            ]
        })
        .collect()
}

/// Lists every violated scenario invariant. Empty means valid.
pub fn validate(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &str, constraint: &str| {
        if !ok {
            out.push(Violation {
                field: field.to_string(),
                constraint: constraint.to_string(),
            });
        }
    };
    let pos = |x: f64| x > 0.0 && x.is_finite();

    let a = &s.area;
    check(a.x_min < a.x_max, "x_min", "x_min < x_max");
    check(a.y_min < a.y_max, "y_min", "y_min < y_max");
    check(pos(a.altitude), "altitude", "H > 0");
    check(pos(a.min_separation), "min_separation", "d_min > 0");

    let r = &s.radio;
    check(pos(r.lambda1), "lambda1", "> 0");
    check(pos(r.lambda2), "lambda2", "> 0");
    check(pos(r.carrier_freq_hz), "carrier_freq", "> 0");
    check(pos(r.bandwidth_hz), "bandwidth", "W > 0");
    check(pos(r.max_tx_power), "max_tx_power", "p_max > 0");
    check(pos(r.rate_threshold_dc), "rate_threshold_dc", "R_Dth > 0");
    check(
        r.rate_threshold_mec >= r.rate_threshold_dc,
        "rate_threshold_mec",
        "R_Mth >= R_Dth",
    );
    check(r.noise_psd_dbm_per_hz.is_finite(), "noise_psd", "finite");

    for (u, c) in s.compute.iter().enumerate() {
        let ok = pos(c.cycles_per_bit) && pos(c.cpu_freq) && pos(c.switch_cap) && pos(c.energy_budget);
        check(ok, &format!("compute[{u}]"), "all compute constants > 0");
    }
    check(
        s.compute.len() == s.layout.num_uavs(),
        "compute",
        "one entry per UAV",
    );

    let p = &s.propulsion;
    let all_pos = [
        p.blade_profile_power,
        p.induced_power,
        p.tip_speed,
        p.mean_induced_velocity,
        p.fuselage_drag_ratio,
        p.air_density,
        p.rotor_solidity,
        p.rotor_disc_area,
    ]
    .iter()
    .all(|v| pos(*v));
    check(all_pos, "propulsion", "all propulsion constants > 0");

    let t = &s.tasks;
    check(
        t.sizes.len() == t.size_probs.len() && t.sizes.len() == t.tolerance_limits.len(),
        "task_sizes",
        "sizes, probabilities and tolerances have equal length",
    );
    check(!t.sizes.is_empty(), "task_sizes", "nonempty");
    check(t.sizes.iter().all(|b| *b > 0), "task_sizes", "> 0");
    check(
        t.size_probs.iter().all(|p| *p >= 0.0),
        "task_size_probs",
        "nonnegative",
    );
    let total: f64 = t.size_probs.iter().sum();
    check(
        (total - 1.0).abs() <= 1e-9,
        "task_size_probs",
        "sum to 1 within 1e-9",
    );
    check(
        t.tolerance_limits.iter().all(|v| pos(*v)),
        "task_tolerance",
        "> 0",
    );
    check(pos(t.deadline), "task_deadline", "D > 0");
    check(
        t.density > 0.0 && t.density < 1.0,
        "task_density",
        "0 < δ_g < 1",
    );
    check(t.dc_storage_limit > 0, "dc_storage_limit", "L_max > 0");
    check(
        t.dc_min_collectible <= t.dc_storage_limit,
        "dc_min_collectible",
        "D_min <= L_max",
    );

    check(s.layout.num_mec_uavs >= 1, "num_mec_uavs", ">= 1");
    check(s.uav_capacity >= 1, "uav_capacity", "N_u_max >= 1");
    check(pos(s.slot_len), "slot_len", "τ > 0");
    check(s.horizon >= 1, "horizon", "T >= 1");
    check(pos(s.max_speed), "max_speed", "> 0");
    check(
        s.uav_init_positions.len() == s.layout.num_uavs(),
        "uav_init_positions",
        "one position per UAV",
    );
    for (u, p) in s.uav_init_positions.iter().enumerate() {
        check(
            a.contains(*p),
            &format!("uav_init_positions[{u}]"),
            "inside area bounds",
        );
    }
    check(
        s.gu_positions.len() == s.layout.num_gus(),
        "gu_positions",
        "one position per ground user",
    );
    for (g, p) in s.gu_positions.iter().enumerate() {
        check(
            a.contains(*p),
            &format!("gu_positions[{g}]"),
            "inside area bounds",
        );
    }

    let w = &s.rewards;
    check(w.collision_penalty >= 0.0, "collision_penalty", ">= 0");
    check(pos(w.boundary_factor), "boundary_penalty_factor", "ρ > 0");
    check(w.energy_coef >= 0.0, "energy_penalty_coef", ">= 0");
    check(w.dc_reward_scale >= 0.0, "dc_reward_scale", ">= 0");
    out
}
