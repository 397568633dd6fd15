//! Probabilistic sensing: cone feasibility and distance-decaying
//! success probability.
//!
//! A UAV can attempt to sense a ground target only while the target
//! lies inside its sensing cone, the downward cone of half-angle
//! `max_angle`. At altitude `z` the cone cuts the ground in a disk of
//! radius `z * tan(max_angle)` centred under the UAV. Success is a
//! Bernoulli draw whose probability decays exponentially with the 3D
//! distance to the target, so hovering low and close pays twice.

use rand::Rng;

use crate::config::ScenarioConfig;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingParams {
    /// Failure rate per metre of 3D distance.
    pub lambda: f64,
    /// Cone half-angle in radians, strictly inside (0, pi/2).
    pub max_angle: f64,
}

impl SensingParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        SensingParams { lambda: cfg.sensing_lambda, max_angle: cfg.max_sensing_angle_rad }
    }
}

/// Radius of the ground disk the cone covers from altitude `h`.
pub fn sensing_radius(h: f64, params: &SensingParams) -> f64 {
    h * params.max_angle.tan()
}

/// Success probability of one sensing attempt, `exp(-lambda * d)` when
/// the target sits inside the cone (boundary included) and 0 outside.
///
/// The cone test compares `d * sin(angle)` against `z * tan(angle)`,
/// which is the same as comparing the horizontal offset against the
/// disk radius but stays exact for targets directly underneath.
pub fn success_prob(uav: Vec3, target: Vec3, params: &SensingParams) -> f64 {
    let d = uav.dist(target);
    if d * params.max_angle.sin() <= uav.z * params.max_angle.tan() {
        (-params.lambda * d).exp()
    } else {
        0.0
    }
}

/// One Bernoulli draw of sensing validity. Consumes exactly one f64
/// from the RNG so draw sequences stay reproducible.
pub fn draw_sensing<R: Rng + ?Sized>(
    uav: Vec3,
    target: Vec3,
    params: &SensingParams,
    rng: &mut R,
) -> bool {
    rng.gen::<f64>() < success_prob(uav, target, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn params() -> SensingParams {
        SensingParams::from_config(&ScenarioConfig::default())
    }

    #[test]
    fn disk_radius_at_reference_altitude() {
        assert!((sensing_radius(200.0, &params()) - 115.47005383792515).abs() < 1e-9);
    }

    #[test]
    fn overhead_probability_frozen_value() {
        // Directly overhead at 200 m: d = 200, lambda = 0.01.
        let p = success_prob(Vec3::new(0.0, 0.0, 200.0), Vec3::ORIGIN, &params());
        assert!((p - 0.1353352832366127).abs() < 1e-12);
    }

    #[test]
    fn boundary_of_the_cone_is_inclusive() {
        let prm = params();
        let h = 200.0;
        let r = sensing_radius(h, &prm);
        let uav = Vec3::new(0.0, 0.0, h);
        let on_edge = Vec3::ground(r, 0.0);
        let p = success_prob(uav, on_edge, &prm);
        // d = h / cos(angle) on the boundary.
        let d = (h * h + r * r).sqrt();
        assert!((d - 230.9401076758503).abs() < 1e-9);
        assert!((p - 0.09932071923669414).abs() < 1e-9);
        // A hair outside the disk the cone test fails.
        let outside = Vec3::ground(r + 1e-6, 0.0);
        assert_eq!(success_prob(uav, outside, &prm), 0.0);
    }

    #[test]
    fn infeasible_target_never_succeeds() {
        let prm = params();
        let uav = Vec3::new(0.0, 0.0, 100.0);
        let far = Vec3::ground(500.0, 0.0);
        assert_eq!(success_prob(uav, far, &prm), 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..64 {
            assert!(!draw_sensing(uav, far, &prm, &mut rng));
        }
    }

    #[test]
    fn draw_consumes_exactly_one_value() {
        let prm = params();
        let uav = Vec3::new(0.0, 0.0, 200.0);
        let mut a = ChaCha12Rng::seed_from_u64(9);
        let mut b = ChaCha12Rng::seed_from_u64(9);
        let _ = draw_sensing(uav, Vec3::ORIGIN, &prm, &mut a);
        let _ = b.gen::<f64>();
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
    }

    #[test]
    fn empirical_rate_matches_probability() {
        let prm = params();
        let uav = Vec3::new(0.0, 0.0, 150.0);
        let target = Vec3::ground(30.0, -40.0);
        let p = success_prob(uav, target, &prm);
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let n = 200_000;
        let hits = (0..n).filter(|_| draw_sensing(uav, target, &prm, &mut rng)).count();
        let rate = hits as f64 / n as f64;
        // Three sigma of a Bernoulli at this p and n is about 0.003.
        assert!((rate - p).abs() < 0.004, "rate {rate} vs p {p}");
    }

    proptest! {
        /// Probability is always in [0, 1] and decays with distance
        /// along a fixed feasible ray.
        #[test]
        fn probability_bounds(h in 50.0f64..400.0, frac in 0.0f64..1.0) {
            let prm = params();
            let uav = Vec3::new(0.0, 0.0, h);
            let r = sensing_radius(h, &prm) * frac;
            let p = success_prob(uav, Vec3::ground(r, 0.0), &prm);
            prop_assert!((0.0..=1.0).contains(&p));
            let closer = success_prob(uav, Vec3::ground(r * 0.5, 0.0), &prm);
            prop_assert!(closer >= p);
        }

        /// The cone disk shrinks to nothing as the half-angle shrinks.
        #[test]
        fn radius_scales_with_angle(h in 10.0f64..400.0, angle in 0.01f64..1.5) {
            let prm = SensingParams { lambda: 0.01, max_angle: angle };
            prop_assert!((sensing_radius(h, &prm) - h * angle.tan()).abs() < 1e-9);
        }

        /// Feasibility via the cone inequality agrees with the disk test
        /// away from the boundary.
        #[test]
        fn cone_matches_disk(h in 50.0f64..400.0, r in 0.0f64..500.0) {
            let prm = params();
            let disk = sensing_radius(h, &prm);
            if (r - disk).abs() > 1e-6 {
                let p = success_prob(Vec3::new(0.0, 0.0, h), Vec3::ground(r, 0.0), &prm);
                prop_assert_eq!(p > 0.0, r < disk);
            }
        }
    }

    #[test]
    fn wide_angle_disk_is_huge() {
        let prm = SensingParams { lambda: 0.01, max_angle: 80.0 * PI / 180.0 };
        assert!(sensing_radius(200.0, &prm) > 1000.0);
    }
}
