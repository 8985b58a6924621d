//! Simulator for multi-UAV networks that serve edge computing users and
//! collect sensor data at the same time.
//!
//! Modules follow the data flow of one slot: [`scenario`] fixes the
//! constants, [`channel`] turns geometry into rates, [`matching`] associates
//! users with UAVs, [`tasking`] moves bits, [`energy`] accounts for flight and
//! compute, and [`env`] wraps it all as an MDP.
//!
//! Physics and energy code is generic over the float type; the simulator
//! state itself is `f64`. The aliases below fix the scalar for callers that
//! do not care.

pub mod channel;
pub mod energy;
pub mod env;
pub mod matching;
pub mod scenario;
pub mod tasking;

pub type Radio = channel::RadioParams<f64>;
pub type Gains = channel::GainMatrix<f64>;
pub type Propulsion = energy::PropulsionParams<f64>;
pub type Compute = energy::ComputeParams<f64>;

pub use env::{ActionVector, Env, RewardBreakdown, StateVector};
pub use matching::{Association, AssociationProblem, StrategyKind};
pub use scenario::{generate_scenario, Layout, Scenario, ScenarioConfig};
