//! Air-to-ground uplink model: line-of-sight probability, pathloss,
//! SNR and achievable rate.
//!
//! The geometry splits into a horizontal range `r` (UAV to the point
//! under the base-station antenna) and the UAV altitude `h`; pathloss
//! then depends on the full 3D distance. Altitude enters the LoS curve
//! through two fitted coefficients, so all functions here reject
//! non-positive altitudes instead of extrapolating the fit.

use thiserror::Error;

use crate::config::{LosModel, ScenarioConfig};
use crate::geometry::Vec3;

/// Everything the link budget needs, detached from the wider scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Base-station antenna position (cell centre, `bs_height` up).
    pub bs_position: Vec3,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub carrier_freq_ghz: f64,
    pub subcarrier_bandwidth_hz: f64,
    pub cycle_duration_s: f64,
    pub info_exchange_s: f64,
    pub los_model: LosModel,
}

impl ChannelParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        ChannelParams {
            bs_position: Vec3::new(0.0, 0.0, cfg.bs_height),
            tx_power_dbm: cfg.tx_power_dbm,
            noise_power_dbm: cfg.noise_power_dbm,
            carrier_freq_ghz: cfg.carrier_freq_ghz,
            subcarrier_bandwidth_hz: cfg.subcarrier_bandwidth_hz,
            cycle_duration_s: cfg.cycle_duration_s,
            info_exchange_s: cfg.info_exchange_s,
            los_model: cfg.los_model,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("UAV altitude must be positive, got {0}")]
    NonPositiveAltitude(f64),
    #[error("UAV sits on the base-station antenna: distance is zero")]
    ZeroDistance,
}

/// Altitude coefficient of the LoS curve.
fn los_p0(h: f64) -> f64 {
    233.98 * h.log10() - 0.95
}

/// Guaranteed-LoS range in metres, floored at 18 m.
fn los_guaranteed_range(h: f64) -> f64 {
    (294.05 * h.log10() - 432.94).max(18.0)
}

/// Probability that the UAV-to-base-station link is line-of-sight.
///
/// Inside the guaranteed range the probability is 1. Beyond it the
/// `Paper` variant blends `r_c/r` with a shifted exponential and clamps
/// the sum into [0, 1]; the `ThreeGpp` variant weights the same
/// exponential by `1 - r_c/r`, which keeps the blend a true convex
/// combination and never needs the clamp.
pub fn prob_los(uav: Vec3, params: &ChannelParams) -> Result<f64, ChannelError> {
    let h = uav.z;
    if !(h > 0.0) {
        return Err(ChannelError::NonPositiveAltitude(h));
    }
    let r = uav.horizontal_dist(params.bs_position);
    let rc = los_guaranteed_range(h);
    if r <= rc {
        return Ok(1.0);
    }
    let p0 = los_p0(h);
    let expo = (-r / p0 + rc / p0).exp();
    let p = match params.los_model {
        LosModel::Paper => rc / r + expo,
        LosModel::ThreeGpp => rc / r + (1.0 - rc / r) * expo,
    };
    Ok(p.min(1.0))
}

/// Free-space-plus-fit pathloss of a line-of-sight link, in dB.
pub fn pathloss_los_db(uav: Vec3, params: &ChannelParams) -> Result<f64, ChannelError> {
    let (d, h) = link_geometry(uav, params)?;
    Ok(30.9 + (22.25 - 0.5 * h.log10()) * d.log10() + 20.0 * params.carrier_freq_ghz.log10())
}

/// Pathloss of a non-line-of-sight link, in dB. Never better than the
/// LoS loss at the same geometry.
pub fn pathloss_nlos_db(uav: Vec3, params: &ChannelParams) -> Result<f64, ChannelError> {
    let (d, h) = link_geometry(uav, params)?;
    let nlos =
        32.4 + (43.2 - 7.6 * h.log10()) * d.log10() + 20.0 * params.carrier_freq_ghz.log10();
    Ok(nlos.max(pathloss_los_db(uav, params)?))
}

/// LoS-probability-weighted mixture of the two pathloss curves, in dB.
pub fn avg_pathloss_db(uav: Vec3, params: &ChannelParams) -> Result<f64, ChannelError> {
    let p = prob_los(uav, params)?;
    Ok(p * pathloss_los_db(uav, params)? + (1.0 - p) * pathloss_nlos_db(uav, params)?)
}

/// Linear (not dB) signal-to-noise ratio of one subcarrier.
pub fn snr(uav: Vec3, params: &ChannelParams) -> Result<f64, ChannelError> {
    let pl = avg_pathloss_db(uav, params)?;
    Ok(10f64.powf((params.tx_power_dbm - params.noise_power_dbm - pl) / 10.0))
}

/// Shannon rate over `subcarriers` subcarriers, bits per second.
pub fn rate_bps(uav: Vec3, subcarriers: usize, params: &ChannelParams) -> Result<f64, ChannelError> {
    let gamma = snr(uav, params)?;
    Ok(subcarriers as f64 * params.subcarrier_bandwidth_hz * (1.0 + gamma).log2())
}

/// Payload bits a UAV moves in one cycle: the rate applied to the part
/// of the cycle left after the information-exchange overhead.
pub fn data_per_cycle(
    uav: Vec3,
    subcarriers: usize,
    params: &ChannelParams,
) -> Result<f64, ChannelError> {
    Ok(rate_bps(uav, subcarriers, params)? * (params.cycle_duration_s - params.info_exchange_s))
}

fn link_geometry(uav: Vec3, params: &ChannelParams) -> Result<(f64, f64), ChannelError> {
    if !(uav.z > 0.0) {
        return Err(ChannelError::NonPositiveAltitude(uav.z));
    }
    let d = uav.dist(params.bs_position);
    if d == 0.0 {
        return Err(ChannelError::ZeroDistance);
    }
    Ok((d, uav.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> ChannelParams {
        ChannelParams::from_config(&ScenarioConfig::default())
    }

    #[test]
    fn los_coefficients_at_200m() {
        assert!((los_p0(200.0) - 537.4449983854582).abs() < 1e-9);
        assert!((los_guaranteed_range(200.0) - 243.67787022499368).abs() < 1e-9);
    }

    #[test]
    fn guaranteed_range_floor_engages_low() {
        assert_eq!(los_guaranteed_range(10.0), 18.0);
    }

    #[test]
    fn los_probability_at_1km() {
        let p = prob_los(Vec3::new(1000.0, 0.0, 200.0), &params()).unwrap();
        assert!((p - 0.4884922616616618).abs() < 1e-12);
    }

    #[test]
    fn los_probability_saturates_near_the_cell_centre() {
        let p = prob_los(Vec3::new(100.0, 0.0, 200.0), &params()).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn los_probability_is_clamped_and_monotone() {
        let p = params();
        let mut prev = 1.0;
        for r in (0..3000).map(|k| k as f64) {
            let pr = prob_los(Vec3::new(r, 0.0, 200.0), &p).unwrap();
            assert!((0.0..=1.0).contains(&pr));
            assert!(pr <= prev + 1e-15, "not monotone at r={r}");
            prev = pr;
        }
    }

    #[test]
    fn threegpp_variant_never_exceeds_paper_variant() {
        let paper = params();
        let gpp = ChannelParams { los_model: LosModel::ThreeGpp, ..paper };
        for r in (250..3000).step_by(50) {
            let uav = Vec3::new(r as f64, 0.0, 200.0);
            let a = prob_los(uav, &paper).unwrap();
            let b = prob_los(uav, &gpp).unwrap();
            assert!(b <= a + 1e-15, "variant ordering broken at r={r}");
        }
    }

    #[test]
    fn los_pathloss_frozen_values() {
        let p = params();
        // Directly overhead the 3D distance is exactly 200 - 25 = 175 m.
        let uav = Vec3::new(0.0, 0.0, 200.0);
        assert!((uav.dist(p.bs_position) - 175.0).abs() < 1e-12);
        assert!((pathloss_los_db(uav, &p).unwrap() - 84.2475475808283).abs() < 1e-9);
        // At one metre the distance term vanishes and only the constant
        // and carrier terms remain.
        let near = Vec3::new(1.0, 0.0, 25.0);
        assert!((near.dist(p.bs_position) - 1.0).abs() < 1e-12);
        assert!((pathloss_los_db(near, &p).unwrap() - 36.920599913279624).abs() < 1e-12);
    }

    #[test]
    fn nlos_pathloss_frozen_value() {
        let p = params();
        // Horizontal range chosen so the 3D distance is exactly 500 m.
        let range = (500.0f64 * 500.0 - 175.0 * 175.0).sqrt();
        let uav = Vec3::new(range, 0.0, 200.0);
        assert!((uav.dist(p.bs_position) - 500.0).abs() < 1e-9);
        assert!((pathloss_nlos_db(uav, &p).unwrap() - 107.81698097654925).abs() < 1e-8);
    }

    #[test]
    fn overhead_snr_frozen_value() {
        let p = params();
        let uav = Vec3::new(0.0, 0.0, 200.0);
        let gamma = snr(uav, &p).unwrap();
        let gamma_db = 10.0 * gamma.log10();
        assert!((gamma_db - 34.7524524191717).abs() < 1e-9);
        assert!((gamma - 2987.068911843294).abs() < 1e-6);
    }

    #[test]
    fn average_pathloss_frozen_value_at_1km() {
        let p = params();
        let uav = Vec3::new(1000.0, 0.0, 200.0);
        assert!((avg_pathloss_db(uav, &p).unwrap() - 108.21825561465982).abs() < 1e-8);
    }

    #[test]
    fn rate_uses_all_subcarriers() {
        let p = params();
        let uav = Vec3::new(0.0, 0.0, 200.0);
        let one = rate_bps(uav, 1, &p).unwrap();
        let eighty = rate_bps(uav, 80, &p).unwrap();
        assert!((eighty - 80.0 * one).abs() < 1e-6);
        // log2(1 + 2987.07) just above 11.5 bits per symbol.
        assert!((one / 12_500.0 - (1.0f64 + 2987.068911843294).log2()).abs() < 1e-9);
    }

    #[test]
    fn per_cycle_payload_uses_the_cycle_remainder() {
        let p = params();
        let uav = Vec3::new(300.0, 0.0, 200.0);
        let rate = rate_bps(uav, 40, &p).unwrap();
        let data = data_per_cycle(uav, 40, &p).unwrap();
        assert!((data - rate * 0.08).abs() < 1e-9);
    }

    #[test]
    fn zero_subcarriers_move_nothing() {
        let p = params();
        let uav = Vec3::new(300.0, 0.0, 200.0);
        assert_eq!(data_per_cycle(uav, 0, &p).unwrap(), 0.0);
    }

    #[test]
    fn altitude_errors() {
        let p = params();
        assert_eq!(
            prob_los(Vec3::new(10.0, 0.0, 0.0), &p).unwrap_err(),
            ChannelError::NonPositiveAltitude(0.0)
        );
        assert!(pathloss_los_db(Vec3::new(10.0, 0.0, -5.0), &p).is_err());
    }

    #[test]
    fn antenna_collision_errors() {
        let p = params();
        assert_eq!(
            pathloss_los_db(Vec3::new(0.0, 0.0, 25.0), &p).unwrap_err(),
            ChannelError::ZeroDistance
        );
    }

    proptest! {
        /// NLoS loss never undercuts LoS loss, and the mixture sits
        /// between the two.
        #[test]
        fn pathloss_ordering(r in 1.0f64..3000.0, h in 30.0f64..400.0) {
            let p = params();
            let uav = Vec3::new(r, 0.0, h);
            let los = pathloss_los_db(uav, &p).unwrap();
            let nlos = pathloss_nlos_db(uav, &p).unwrap();
            let avg = avg_pathloss_db(uav, &p).unwrap();
            prop_assert!(nlos >= los);
            prop_assert!(avg >= los - 1e-12 && avg <= nlos + 1e-12);
        }

        /// SNR decreases as the UAV flies out along a ray at fixed altitude.
        #[test]
        fn snr_decays_with_range(r in 50.0f64..2500.0, h in 80.0f64..300.0) {
            let p = params();
            let near = snr(Vec3::new(r, 0.0, h), &p).unwrap();
            let far = snr(Vec3::new(r + 100.0, 0.0, h), &p).unwrap();
            prop_assert!(far <= near * (1.0 + 1e-9));
        }
    }
}
