//! Air-to-ground radio model.
//!
//! Probabilistic line-of-sight blending of free-space loss with LoS/NLoS
//! excess losses, the resulting linear channel gain, and the uplink rate of
//! a ground user under OFDMA sharing at its UAV and co-channel interference
//! from users served by every other UAV.
//!
//! Everything here is generic over the floating-point type. Gains are
//! quasi-static: computed once per slot from the post-movement positions.

use num_traits::{Float, FloatConst};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::Association;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("link distance must be positive and finite, got {0}")]
    Distance(f64),
    #[error("ground user {gu} is not associated with UAV {uav}")]
    NotAssociated { gu: usize, uav: usize },
}

/// How the elevation angle is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationMode {
    /// θ = arctan(H / d) with d the 3D link distance. Caps θ at 45°.
    #[default]
    SlantRange,
    /// θ = arctan(H / d_h) with d_h the horizontal distance.
    Horizontal,
}

#[inline]
pub(crate) fn lit<T: Float>(x: f64) -> T {
    T::from(x).expect("literal representable in scalar type")
}

/// Radio constants. `noise_psd_w_per_hz` is derived from the dBm/Hz figure
/// on construction and is the only noise value the rate formula reads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub eta_los_db: T,
    pub eta_nlos_db: T,
    pub carrier_freq_hz: T,
    pub noise_psd_dbm_per_hz: T,
    pub noise_psd_w_per_hz: T,
    pub bandwidth_hz: T,
    /// R_Mth in bits/s.
    pub rate_threshold_mec: T,
    /// R_Dth in bits/s.
    pub rate_threshold_dc: T,
    /// p_max in watts.
    pub max_tx_power: T,
    pub elevation: ElevationMode,
}

impl<T: Float> RadioParams<T> {
    /// Default radio constants with the given noise density in dBm/Hz.
    pub fn with_noise_dbm(noise_dbm_per_hz: T) -> Self {
        Self {
            lambda1: lit(9.61),
            lambda2: lit(0.16),
            eta_los_db: lit(0.1),
            eta_nlos_db: lit(21.0),
            carrier_freq_hz: lit(2e9),
            noise_psd_dbm_per_hz: noise_dbm_per_hz,
            noise_psd_w_per_hz: dbm_to_watts(noise_dbm_per_hz),
            bandwidth_hz: lit(3e6),
            rate_threshold_mec: lit(1.6e6),
            rate_threshold_dc: lit(1e6),
            max_tx_power: lit(0.5),
            elevation: ElevationMode::SlantRange,
        }
    }
}

impl<T: Float> Default for RadioParams<T> {
    fn default() -> Self {
        Self::with_noise_dbm(lit(-140.0))
    }
}

pub fn dbm_to_watts<T: Float>(dbm: T) -> T {
    lit::<T>(10.0).powf((dbm - lit(30.0)) / lit(10.0))
}

/// Geometry of one UAV–ground-user link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<T> {
    pub uav: [T; 3],
    pub gu: [T; 3],
    /// 3D distance in meters.
    pub distance: T,
    /// Elevation angle in degrees.
    pub elevation_deg: T,
}

impl<T: Float + FloatConst> LinkGeometry<T> {
    pub fn new(uav_xy: [T; 2], altitude: T, gu_xy: [T; 2], mode: ElevationMode) -> Self {
        let dx = uav_xy[0] - gu_xy[0];
        let dy = uav_xy[1] - gu_xy[1];
        let horizontal = (dx * dx + dy * dy).sqrt();
        let distance = (horizontal * horizontal + altitude * altitude).sqrt();
        let reference = match mode {
            ElevationMode::SlantRange => distance,
            ElevationMode::Horizontal => horizontal,
        };
        let rad = if reference > T::zero() {
            (altitude / reference).atan()
        } else {
            T::FRAC_PI_2()
        };
        Self {
            uav: [uav_xy[0], uav_xy[1], altitude],
            gu: [gu_xy[0], gu_xy[1], T::zero()],
            distance,
            elevation_deg: rad.to_degrees(),
        }
    }
}

/// P_LoS = 1 / (1 + λ1·exp(−λ2(θ − λ1))).
pub fn los_probability<T: Float>(geometry: &LinkGeometry<T>, radio: &RadioParams<T>) -> T {
    los_probability_at(geometry.elevation_deg, radio)
}

pub fn los_probability_at<T: Float>(elevation_deg: T, radio: &RadioParams<T>) -> T {
    let e = (-radio.lambda2 * (elevation_deg - radio.lambda1)).exp();
    T::one() / (T::one() + radio.lambda1 * e)
}

/// Average path loss in dB for a given distance and LoS probability.
pub fn path_loss_db_with<T: Float + FloatConst>(
    distance: T,
    p_los: T,
    radio: &RadioParams<T>,
) -> Result<T, ChannelError> {
    if !(distance > T::zero()) || !distance.is_finite() {
        return Err(ChannelError::Distance(distance.to_f64().unwrap_or(f64::NAN)));
    }
    let twenty: T = lit(20.0);
    let four_pi_over_c = lit::<T>(4.0) * T::PI() / lit(SPEED_OF_LIGHT);
    let free_space = twenty * distance.log10()
        + twenty * radio.carrier_freq_hz.log10()
        + twenty * four_pi_over_c.log10();
    Ok(free_space + p_los * radio.eta_los_db + (T::one() - p_los) * radio.eta_nlos_db)
}

pub fn path_loss_db<T: Float + FloatConst>(
    geometry: &LinkGeometry<T>,
    radio: &RadioParams<T>,
) -> Result<T, ChannelError> {
    path_loss_db_with(geometry.distance, los_probability(geometry, radio), radio)
}

/// h = 10^(−PL/10).
pub fn channel_gain<T: Float + FloatConst>(
    geometry: &LinkGeometry<T>,
    radio: &RadioParams<T>,
) -> Result<T, ChannelError> {
    let pl = path_loss_db(geometry, radio)?;
    Ok(db_to_linear_loss(pl))
}

pub fn db_to_linear_loss<T: Float>(pl_db: T) -> T {
    lit::<T>(10.0).powf(-pl_db / lit(10.0))
}

/// The same gain written as excess-loss factor over d²·(4π f_c / c)².
pub fn channel_gain_closed_form<T: Float + FloatConst>(
    geometry: &LinkGeometry<T>,
    radio: &RadioParams<T>,
) -> Result<T, ChannelError> {
    let d = geometry.distance;
    if !(d > T::zero()) || !d.is_finite() {
        return Err(ChannelError::Distance(d.to_f64().unwrap_or(f64::NAN)));
    }
    let p = los_probability(geometry, radio);
    let excess = (radio.eta_los_db - radio.eta_nlos_db) * p + radio.eta_nlos_db;
    let k = lit::<T>(4.0) * T::PI() * radio.carrier_freq_hz / lit(SPEED_OF_LIGHT);
    Ok(lit::<T>(10.0).powf(-excess / lit(10.0)) / (d * d * k * k))
}

/// Dense UAV × ground-user gain table for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix<T> {
    num_uavs: usize,
    num_gus: usize,
    values: Vec<T>,
}

impl<T: Float + FloatConst> GainMatrix<T> {
    pub fn compute(
        uav_xy: &[[T; 2]],
        gu_xy: &[[T; 2]],
        altitude: T,
        radio: &RadioParams<T>,
    ) -> Result<Self, ChannelError> {
        let mut values = Vec::with_capacity(uav_xy.len() * gu_xy.len());
        for u in uav_xy {
            for g in gu_xy {
                let geom = LinkGeometry::new(*u, altitude, *g, radio.elevation);
                values.push(channel_gain(&geom, radio)?);
            }
        }
        Ok(Self {
            num_uavs: uav_xy.len(),
            num_gus: gu_xy.len(),
            values,
        })
    }
}

impl<T: Copy> GainMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let num_uavs = rows.len();
        let num_gus = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == num_gus), "ragged gain rows");
        Self {
            num_uavs,
            num_gus,
            values: rows.into_iter().flatten().collect(),
        }
    }

    #[inline]
    pub fn get(&self, uav: usize, gu: usize) -> T {
        self.values[uav * self.num_gus + gu]
    }

    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }

    pub fn num_gus(&self) -> usize {
        self.num_gus
    }
}

/// Everything needed to evaluate uplink rates under one association.
#[derive(Debug, Clone, Copy)]
pub struct RateContext<'a, T> {
    pub association: &'a Association,
    /// Transmit power per ground user in watts.
    pub powers: &'a [T],
    pub gains: &'a GainMatrix<T>,
}

/// Received power at `uav` from every ground user served by some other UAV.
pub fn interference_at<T: Float>(uav: usize, ctx: &RateContext<'_, T>) -> T {
    let assoc = ctx.association;
    let mut total = T::zero();
    for other in 0..assoc.num_uavs() {
        if other == uav {
            continue;
        }
        for &l in assoc.served_by(other) {
            total = total + ctx.powers[l] * ctx.gains.get(uav, l);
        }
    }
    total
}

/// (W/s)·log2(1 + signal / (I + N₀·W/s)).
#[inline]
pub fn shannon_rate<T: Float>(signal: T, interference: T, served: usize, radio: &RadioParams<T>) -> T {
    let share = radio.bandwidth_hz / T::from(served.max(1)).unwrap();
    let sinr = signal / (interference + radio.noise_psd_w_per_hz * share);
    share * (T::one() + sinr).log2()
}

/// Achievable uplink rate of `gu` at `uav` in bits/s.
pub fn uplink_rate<T: Float>(
    gu: usize,
    uav: usize,
    ctx: &RateContext<'_, T>,
    radio: &RadioParams<T>,
) -> Result<T, ChannelError> {
    if ctx.association.uav_of(gu) != Some(uav) {
        return Err(ChannelError::NotAssociated { gu, uav });
    }
    let served = ctx.association.load(uav);
    let signal = ctx.powers[gu] * ctx.gains.get(uav, gu);
    Ok(shannon_rate(
        signal,
        interference_at(uav, ctx),
        served,
        radio,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn radio() -> RadioParams<f64> {
        RadioParams::default()
    }

    #[test]
    fn los_at_lambda1_is_reciprocal() {
        let r = radio();
        let p = los_probability_at(r.lambda1, &r);
        assert!((p - 1.0 / (1.0 + 9.61)).abs() < 1e-12);
        assert!((p - 0.09425).abs() < 1e-5);
    }

    #[test]
    fn los_near_vertical() {
        // 1/(1 + 9.61·exp(−0.16·(90 − 9.61))), evaluated by hand: exp(−12.8624) = 2.5912e-6
        let r = radio();
        let p = los_probability_at(90.0, &r);
        assert!((p - 0.99997).abs() < 1e-5, "{p}");
    }

    #[test]
    fn path_loss_vanishes_at_unit_scale() {
        let mut r = radio();
        r.carrier_freq_hz = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI);
        r.eta_los_db = 0.0;
        let pl = path_loss_db_with(1.0, 1.0, &r).unwrap();
        assert!(pl.abs() < 1e-12, "{pl}");
    }

    #[test]
    fn doubling_distance_adds_6db() {
        let r = radio();
        let a = path_loss_db_with(100.0, 0.7, &r).unwrap();
        let b = path_loss_db_with(200.0, 0.7, &r).unwrap();
        assert!((b - a - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!((b - a - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn zero_distance_is_domain_error() {
        assert!(path_loss_db_with(0.0, 0.5, &radio()).is_err());
        let g = LinkGeometry {
            uav: [0.0; 3],
            gu: [0.0; 3],
            distance: 0.0,
            elevation_deg: 90.0,
        };
        assert!(channel_gain(&g, &radio()).is_err());
    }

    #[test]
    fn gain_from_db() {
        assert_eq!(db_to_linear_loss(0.0f64), 1.0);
        assert!((db_to_linear_loss(10.0f64) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn overhead_path_loss_matches_direct_evaluation() {
        // Straight-line evaluation: d = 100, θ = atan(100/100) = 45°.
        let r = radio();
        let g = LinkGeometry::new([0.0, 0.0], 100.0, [0.0, 0.0], ElevationMode::SlantRange);
        let theta = (180.0 / std::f64::consts::PI) * (100.0f64 / 100.0).atan();
        let p = 1.0 / (1.0 + 9.61 * (-0.16 * (theta - 9.61)).exp());
        let expected = 20.0 * 100f64.log10()
            + 20.0 * 2e9f64.log10()
            + 20.0 * (4.0 * std::f64::consts::PI / 299_792_458.0).log10()
            + p * 0.1
            + (1.0 - p) * 21.0;
        let got = path_loss_db(&g, &r).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-10);
    }

    #[test]
    fn gain_closed_form_at_100m() {
        let r = radio();
        let g = LinkGeometry::new([0.0, 0.0], 100.0, [0.0, 0.0], ElevationMode::SlantRange);
        let a = channel_gain(&g, &r).unwrap();
        let b = channel_gain_closed_form(&g, &r).unwrap();
        assert!(((a - b) / b).abs() < 1e-12);
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn elevation_modes_differ() {
        let lit = LinkGeometry::new([0.0, 0.0], 100.0, [0.0, 0.0], ElevationMode::SlantRange);
        let hor = LinkGeometry::new([0.0, 0.0], 100.0, [0.0, 0.0], ElevationMode::Horizontal);
        assert!((lit.elevation_deg - 45.0).abs() < 1e-12);
        assert!((hor.elevation_deg - 90.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_gain() {
        let r: RadioParams<f32> = RadioParams::default();
        let g = LinkGeometry::new([10.0f32, 0.0], 100.0, [0.0, 0.0], ElevationMode::SlantRange);
        let a = channel_gain(&g, &r).unwrap();
        let b = channel_gain_closed_form(&g, &r).unwrap();
        assert!(((a - b) / b).abs() < 1e-4);
    }

    fn two_uav_fixture() -> (Association, Vec<f64>, GainMatrix<f64>) {
        let mut a = Association::new(2, 2);
        a.assign(0, 0);
        a.assign(1, 1);
        let gains = GainMatrix::from_rows(vec![vec![1e-8, 2e-10], vec![3e-10, 5e-9]]);
        (a, vec![0.5, 0.3], gains)
    }

    #[test]
    fn rate_at_unit_snr_is_bandwidth_share() {
        let r = radio();
        let mut a = Association::new(1, 1);
        a.assign(0, 0);
        let noise = r.noise_psd_w_per_hz * r.bandwidth_hz;
        let gains = GainMatrix::from_rows(vec![vec![noise / 0.5]]);
        let powers = [0.5];
        let ctx = RateContext { association: &a, powers: &powers, gains: &gains };
        let rate = uplink_rate(0, 0, &ctx, &r).unwrap();
        assert!((rate - r.bandwidth_hz).abs() < 1e-6);
    }

    #[test]
    fn zero_power_zero_rate() {
        let (a, _, gains) = two_uav_fixture();
        let powers = [0.0, 0.3];
        let ctx = RateContext { association: &a, powers: &powers, gains: &gains };
        assert_eq!(uplink_rate(0, 0, &ctx, &radio()).unwrap(), 0.0);
    }

    #[test]
    fn two_uav_rate_literal() {
        let r = radio();
        let (a, p, gains) = two_uav_fixture();
        let ctx = RateContext { association: &a, powers: &p, gains: &gains };
        // GU 0 at UAV 0; interferer GU 1 (served by UAV 1) seen at UAV 0 with gain 2e-10.
        let n0 = 1e-17;
        let expected = 3e6 * (1.0 + 0.5 * 1e-8 / (0.3 * 2e-10 + n0 * 3e6)).log2();
        let got = uplink_rate(0, 0, &ctx, &r).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-10);
        assert_eq!(
            uplink_rate(0, 1, &ctx, &r),
            Err(ChannelError::NotAssociated { gu: 0, uav: 1 })
        );
    }

    #[test]
    fn interference_single_uav_is_zero() {
        let mut a = Association::new(2, 3);
        a.assign(0, 0);
        a.assign(1, 0);
        let gains = GainMatrix::from_rows(vec![vec![1e-9; 3], vec![1e-9; 3]]);
        let p = [0.5; 3];
        let ctx = RateContext { association: &a, powers: &p, gains: &gains };
        assert_eq!(interference_at(0, &ctx), 0.0);
        a.assign(2, 1);
        let ctx = RateContext { association: &a, powers: &p, gains: &gains };
        assert!(interference_at(0, &ctx) > 0.0);
    }

    proptest! {
        #[test]
        fn los_is_a_probability(theta in 0.0f64..90.0, l1 in 0.1f64..20.0, l2 in 0.01f64..1.0) {
            let mut r = radio();
            r.lambda1 = l1;
            r.lambda2 = l2;
            let p = los_probability_at(theta, &r);
            prop_assert!(p > 0.0 && p <= 1.0);
            prop_assert_eq!(p + (1.0 - p), 1.0);
            prop_assert!(los_probability_at(theta + 0.5, &r) >= p);
        }

        #[test]
        fn rate_is_monotone(p_own in 0.0f64..0.5, p_int in 0.0f64..0.5, bump in 0.001f64..0.1) {
            let r = radio();
            let gains = GainMatrix::from_rows(vec![vec![1e-8, 4e-10], vec![2e-10, 1e-8]]);
            let mut a = Association::new(2, 2);
            a.assign(0, 0);
            a.assign(1, 1);
            let rate = |own: f64, int: f64| {
                let p = [own, int];
                let ctx = RateContext { association: &a, powers: &p, gains: &gains };
                uplink_rate(0, 0, &ctx, &r).unwrap()
            };
            prop_assert!(rate(p_own, p_int) >= 0.0);
            prop_assert!(rate(p_own + bump, p_int) >= rate(p_own, p_int));
            prop_assert!(rate(p_own, p_int + bump) <= rate(p_own, p_int));
        }

        #[test]
        fn rate_nonincreasing_in_load(s in 1usize..8, sig in 1e-12f64..1e-8, int in 0.0f64..1e-9) {
            let r = radio();
            prop_assert!(shannon_rate(sig, int, s + 1, &r) <= shannon_rate(sig, int, s, &r));
        }
    }
}
