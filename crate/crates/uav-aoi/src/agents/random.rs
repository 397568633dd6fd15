//! Uniform random reference policy.
//!
//! Picks a task uniformly from the admissible set and a sensing
//! location uniformly over that task's feasible disk (area-uniform via
//! the square-root radius trick). Learns nothing; every trained agent
//! is expected to beat it.

use rand::{Rng, RngCore};

use crate::config::ScenarioConfig;
use crate::env::{Action, EnvState, TaskId};
use crate::geometry::Vec3;

use super::{AgentError, Policy};

pub struct RandomPolicy {
    cfg: ScenarioConfig,
}

impl RandomPolicy {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        RandomPolicy { cfg: cfg.clone() }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(
        &mut self,
        _state: &EnvState,
        admissible: &[TaskId],
        _explore: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Action, AgentError> {
        if admissible.is_empty() {
            return Err(AgentError::NoAdmissibleTask);
        }
        let task = admissible[rng.gen_range(0..admissible.len())];
        let z = if self.cfg.enable_3d {
            rng.gen_range(self.cfg.altitude_range.0..=self.cfg.altitude_range.1)
        } else {
            self.cfg.uav_altitude
        };
        let radius = z * self.cfg.max_sensing_angle_rad.tan();
        let rho = radius * rng.gen::<f64>().sqrt();
        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
        let target = self.cfg.target_of(task);
        Ok(Action {
            task,
            location: Vec3::new(target.x + rho * angle.cos(), target.y + rho * angle.sin(), z),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TaskSpec;
    use crate::env;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn test_cfg() -> ScenarioConfig {
        ScenarioConfig {
            num_uavs: 1,
            num_tasks: 3,
            task_targets: vec![
                TaskSpec { id: 1, target: Vec3::ground(100.0, 0.0) },
                TaskSpec { id: 2, target: Vec3::ground(0.0, 100.0) },
                TaskSpec { id: 3, target: Vec3::ground(-80.0, -60.0) },
            ],
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn choices_are_feasible_and_cover_tasks() {
        let cfg = test_cfg();
        let mut policy = RandomPolicy::new(&cfg);
        let state = env::initial_state(&cfg);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut counts = [0usize; 3];
        let radius = cfg.uav_altitude * cfg.max_sensing_angle_rad.tan();
        for _ in 0..600 {
            let act = policy.select(&state, &[1, 2, 3], true, &mut rng).unwrap();
            counts[act.task - 1] += 1;
            let target = cfg.target_of(act.task);
            let horiz =
                ((act.location.x - target.x).powi(2) + (act.location.y - target.y).powi(2)).sqrt();
            assert!(horiz <= radius * (1.0 + 1e-12));
            assert_eq!(act.location.z, cfg.uav_altitude);
        }
        for c in counts {
            assert!((140..=260).contains(&c), "counts {counts:?} not near uniform");
        }
    }

    #[test]
    fn ranged_altitude_scales_the_disk() {
        let cfg = ScenarioConfig {
            enable_3d: true,
            altitude_range: (100.0, 300.0),
            ..test_cfg()
        };
        let mut policy = RandomPolicy::new(&cfg);
        let state = env::initial_state(&cfg);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let act = policy.select(&state, &[1, 2, 3], true, &mut rng).unwrap();
            assert!(act.location.z >= 100.0 && act.location.z <= 300.0);
            let target = cfg.target_of(act.task);
            let horiz =
                ((act.location.x - target.x).powi(2) + (act.location.y - target.y).powi(2)).sqrt();
            assert!(horiz <= act.location.z * cfg.max_sensing_angle_rad.tan() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn selection_is_deterministic_per_seed() {
        let cfg = test_cfg();
        let mut p1 = RandomPolicy::new(&cfg);
        let mut p2 = RandomPolicy::new(&cfg);
        let state = env::initial_state(&cfg);
        let mut r1 = ChaCha12Rng::seed_from_u64(9);
        let mut r2 = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..10 {
            assert_eq!(
                p1.select(&state, &[1, 2, 3], true, &mut r1).unwrap(),
                p2.select(&state, &[1, 2, 3], true, &mut r2).unwrap()
            );
        }
    }
}
