//! UAV energy accounting.
//!
//! Propulsion uses the standard rotary-wing power model (blade profile,
//! induced and parasite terms). Edge computing costs κ·ω²·C joules per bit
//! processed. The ledger keeps the per-slot breakdown for every UAV.

use std::io::Write;
use std::path::Path;

use num_traits::Float;
use serde::Serialize;
use thiserror::Error;

use crate::channel::lit;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("speed must be nonnegative, got {0}")]
    NegativeSpeed(f64),
    #[error("no ledger entry for UAV {uav} slot {slot}")]
    MissingSlot { uav: usize, slot: usize },
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Rotary-wing propulsion constants. Defaults are typical small-quadrotor
/// values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropulsionParams<T> {
    /// Blade profile power in hover, P0 (W).
    pub blade_profile_power: T,
    /// Induced power in hover, Pi (W).
    pub induced_power: T,
    /// Rotor blade tip speed U_tip (m/s).
    pub tip_speed: T,
    /// Mean rotor induced velocity in hover v0 (m/s).
    pub mean_induced_velocity: T,
    pub fuselage_drag_ratio: T,
    /// Air density (kg/m³).
    pub air_density: T,
    pub rotor_solidity: T,
    /// Rotor disc area (m²).
    pub rotor_disc_area: T,
}

impl<T: Float> Default for PropulsionParams<T> {
    fn default() -> Self {
        Self {
            blade_profile_power: lit(79.86),
            induced_power: lit(88.63),
            tip_speed: lit(120.0),
            mean_induced_velocity: lit(4.03),
            fuselage_drag_ratio: lit(0.6),
            air_density: lit(1.225),
            rotor_solidity: lit(0.05),
            rotor_disc_area: lit(0.503),
        }
    }
}

impl<T: Float> PropulsionParams<T> {
    pub fn blade_term(&self, v: T) -> T {
        let three: T = lit(3.0);
        self.blade_profile_power * (T::one() + three * v * v / (self.tip_speed * self.tip_speed))
    }

    pub fn induced_term(&self, v: T) -> T {
        let v0 = self.mean_induced_velocity;
        let v0_2 = v0 * v0;
        let v2 = v * v;
        let inner = (T::one() + v2 * v2 / (lit::<T>(4.0) * v0_2 * v0_2)).sqrt() - v2 / (lit::<T>(2.0) * v0_2);
        // The difference underflows to tiny negatives at high speed.
        self.induced_power * inner.max(T::zero()).sqrt()
    }

    pub fn parasite_term(&self, v: T) -> T {
        lit::<T>(0.5)
            * self.fuselage_drag_ratio
            * self.air_density
            * self.rotor_solidity
            * self.rotor_disc_area
            * v
            * v
            * v
    }

    /// Propulsion power in watts at horizontal speed `v`.
    pub fn power(&self, v: T) -> T {
        self.blade_term(v) + self.induced_term(v) + self.parasite_term(v)
    }
}

/// Energy in joules to fly at `speed` for `slot_len` seconds.
pub fn propulsion_energy<T: Float>(
    speed: T,
    slot_len: T,
    params: &PropulsionParams<T>,
) -> Result<T, EnergyError> {
    if speed < T::zero() || speed.is_nan() {
        return Err(EnergyError::NegativeSpeed(speed.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(params.power(speed) * slot_len)
}

/// Edge-compute constants of one UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeParams<T> {
    /// C, CPU cycles per bit.
    pub cycles_per_bit: T,
    /// ω, CPU frequency in cycles/s.
    pub cpu_freq: T,
    /// κ, effective switched capacitance.
    pub switch_cap: T,
    /// E_max, total energy budget per UAV over an episode (J).
    pub energy_budget: T,
}

impl<T: Float> Default for ComputeParams<T> {
    fn default() -> Self {
        Self {
            cycles_per_bit: lit(1000.0),
            cpu_freq: lit(6e9),
            switch_cap: lit(1e-27),
            energy_budget: lit(30e3),
        }
    }
}

impl<T: Float> ComputeParams<T> {
    /// Seconds of CPU time to process `bits`.
    pub fn compute_time(&self, bits: T) -> T {
        self.cycles_per_bit * bits / self.cpu_freq
    }
}

/// κ·ω²·C·bits.
pub fn compute_energy<T: Float>(bits: T, compute: &ComputeParams<T>) -> T {
    compute.switch_cap * compute.cpu_freq * compute.cpu_freq * compute.cycles_per_bit * bits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavRole {
    Mec,
    Dc,
}

/// Energy spent by one UAV in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotEnergy {
    pub move_j: f64,
    pub compute_j: f64,
}

impl SlotEnergy {
    /// Total for the slot; the DC-UAV carries no edge server.
    pub fn total(&self, role: UavRole) -> f64 {
        match role {
            UavRole::Mec => self.move_j + self.compute_j,
            UavRole::Dc => self.move_j,
        }
    }
}

#[derive(Serialize)]
struct LedgerRow {
    uav_id: usize,
    slot: usize,
    #[serde(rename = "move_J")]
    move_j: f64,
    #[serde(rename = "compute_J")]
    compute_j: f64,
}

/// Per-UAV, per-slot energy record for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    roles: Vec<UavRole>,
    entries: Vec<Vec<SlotEnergy>>,
    cumulative: Vec<f64>,
}

impl EnergyLedger {
    pub fn new(roles: Vec<UavRole>) -> Self {
        let n = roles.len();
        Self {
            roles,
            entries: vec![Vec::new(); n],
            cumulative: vec![0.0; n],
        }
    }

    pub fn num_uavs(&self) -> usize {
        self.roles.len()
    }

    pub fn role(&self, uav: usize) -> UavRole {
        self.roles[uav]
    }

    /// Appends the next slot's entry for `uav`; returns the slot total.
    pub fn record(&mut self, uav: usize, entry: SlotEnergy) -> f64 {
        debug_assert!(entry.move_j >= 0.0 && entry.compute_j >= 0.0);
        let total = entry.total(self.roles[uav]);
        self.entries[uav].push(entry);
        self.cumulative[uav] += total;
        total
    }

    pub fn entry(&self, uav: usize, slot: usize) -> Option<&SlotEnergy> {
        self.entries[uav].get(slot)
    }

    /// E_u^total for a closed slot (0-based index into the episode).
    pub fn total_energy(&self, uav: usize, slot: usize) -> Result<f64, EnergyError> {
        self.entry(uav, slot)
            .map(|e| e.total(self.roles[uav]))
            .ok_or(EnergyError::MissingSlot { uav, slot })
    }

    pub fn cumulative(&self, uav: usize) -> f64 {
        self.cumulative[uav]
    }

    pub fn slots_recorded(&self) -> usize {
        self.entries.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Mean energy per UAV per recorded slot.
    pub fn mean_per_uav_slot(&self) -> f64 {
        let slots: usize = self.entries.iter().map(Vec::len).sum();
        if slots == 0 {
            0.0
        } else {
            self.cumulative.iter().sum::<f64>() / slots as f64
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EnergyError> {
        let mut w = csv::Writer::from_writer(out);
        for (uav, rows) in self.entries.iter().enumerate() {
            for (slot, e) in rows.iter().enumerate() {
                w.serialize(LedgerRow {
                    uav_id: uav,
                    slot,
                    move_j: e.move_j,
                    compute_j: e.compute_j,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), EnergyError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_energy() {
        let p = PropulsionParams::<f64>::default();
        let e = propulsion_energy(0.0, 1.0, &p).unwrap();
        assert!((e - 168.49).abs() < 1e-9);
        assert_eq!(propulsion_energy(0.0, 0.0, &p).unwrap(), 0.0);
        assert!(propulsion_energy(-1.0, 1.0, &p).is_err());
    }

    #[test]
    fn induced_term_falls_with_speed() {
        // Direct evaluation: at v = 10, sqrt(sqrt(1 + 10^4/(4·4.03^4)) − 100/(2·4.03^2)) ≈ 0.3975
        let p = PropulsionParams::<f64>::default();
        let at10 = p.induced_term(10.0);
        assert!(at10 < p.induced_term(0.0));
        let v0: f64 = 4.03;
        let manual = 88.63 * ((1.0 + 1e4 / (4.0 * v0.powi(4))).sqrt() - 100.0 / (2.0 * v0 * v0)).sqrt();
        assert!((at10 - manual).abs() < 1e-9);
        assert!(p.power(50.0).is_finite());
    }

    #[test]
    fn compute_energy_512_kbit() {
        let c = ComputeParams::<f64>::default();
        let e = compute_energy(512.0 * 1024.0, &c);
        assert!((e - 18.874368).abs() < 1e-9, "{e}");
        assert_eq!(compute_energy(0.0, &c), 0.0);
        assert!((compute_energy(2.0 * 1000.0, &c) - 2.0 * compute_energy(1000.0, &c)).abs() < 1e-15);
    }

    #[test]
    fn dc_uav_never_pays_compute() {
        let mut l = EnergyLedger::new(vec![UavRole::Mec, UavRole::Dc]);
        let e = SlotEnergy { move_j: 100.0, compute_j: 5.0 };
        assert_eq!(l.record(0, e), 105.0);
        assert_eq!(l.record(1, e), 100.0);
        assert_eq!(l.total_energy(1, 0).unwrap(), 100.0);
        assert!(l.total_energy(1, 3).is_err());
    }

    #[test]
    fn mec_hover_no_bits() {
        let p = PropulsionParams::<f64>::default();
        let c = ComputeParams::<f64>::default();
        let mut l = EnergyLedger::new(vec![UavRole::Mec]);
        l.record(
            0,
            SlotEnergy {
                move_j: propulsion_energy(0.0, 2.0, &p).unwrap(),
                compute_j: compute_energy(0.0, &c),
            },
        );
        assert!((l.total_energy(0, 0).unwrap() - 2.0 * 168.49).abs() < 1e-9);
    }

    #[test]
    fn ledger_is_additive_and_exports() {
        let mut l = EnergyLedger::new(vec![UavRole::Mec, UavRole::Dc]);
        let mut sums = [0.0; 2];
        for t in 0..300 {
            for u in 0..2 {
                let e = SlotEnergy { move_j: 100.0 + t as f64, compute_j: (t % 7) as f64 };
                sums[u] += l.record(u, e);
            }
        }
        for u in 0..2 {
            let recount: f64 = (0..300).map(|t| l.total_energy(u, t).unwrap()).sum();
            assert!((recount - l.cumulative(u)).abs() < 1e-9);
            assert!((sums[u] - l.cumulative(u)).abs() < 1e-9);
        }
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("uav_id,slot,move_J,compute_J"));
        assert_eq!(text.lines().count(), 601);
    }
}
