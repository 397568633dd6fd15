//! One full episode under the stalest-task-first policy, cycle by cycle.
//!
//! Prints the protocol phases as they happen: decision, flight, sensing
//! and transmission cycles, the task executions with their age payoffs,
//! and the final normalized accumulated age.
//!
//! ```bash
//! cargo run --example greedy_episode
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use uav_aoi::baselines::GreedyPolicy;
use uav_aoi::config::{ScenarioConfig, TaskSpec};
use uav_aoi::env::{self, ActionSpace};
use uav_aoi::agents::Policy;
use uav_aoi::geometry::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig {
        num_uavs: 2,
        num_tasks: 4,
        task_targets: vec![
            TaskSpec { id: 1, target: Vec3::ground(120.0, 0.0) },
            TaskSpec { id: 2, target: Vec3::ground(0.0, 150.0) },
            TaskSpec { id: 3, target: Vec3::ground(-130.0, -40.0) },
            TaskSpec { id: 4, target: Vec3::ground(60.0, -110.0) },
        ],
        cell_radius: 200.0,
        episode_cycles: 120,
        sensing_data_bits: 2e5,
        ..ScenarioConfig::default()
    };

    let mut agents: Vec<GreedyPolicy> =
        (0..cfg.num_uavs).map(|u| GreedyPolicy::for_uav(u, &cfg)).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut state = env::initial_state(&cfg);
    let mut total_reward = 0.0;

    while state.cycle_index <= cfg.episode_cycles {
        let mut actions = Vec::new();
        let mut notes = Vec::new();
        for (uav, agent) in agents.iter_mut().enumerate() {
            let phase = env::cycle_type(&state, uav, &cfg);
            match env::available_actions(&state, uav, &cfg)? {
                ActionSpace::Committed(a) => {
                    actions.push(a);
                    notes.push(format!("uav{uav} {phase:?} task {}", a.task));
                }
                ActionSpace::Decide { tasks } => {
                    // Exclusive selection: drop tasks teammates just took.
                    let taken: Vec<_> = actions.iter().map(|a| a.task).collect();
                    let open: Vec<_> =
                        tasks.into_iter().filter(|t| !taken.contains(t)).collect();
                    let a = agent.select(&state, &open, false, &mut rng)?;
                    notes.push(format!(
                        "uav{uav} {phase:?} -> task {} at ({:.0}, {:.0})",
                        a.task, a.location.x, a.location.y
                    ));
                    actions.push(a);
                }
            }
        }
        let outcome = env::step(&state, &actions, &cfg, &mut rng)?;
        total_reward += outcome.shared_reward;

        let verbose = state.cycle_index <= 20 || outcome.shared_reward > 0.0;
        if verbose {
            print!("cycle {:>3}: {}", state.cycle_index, notes.join("; "));
            if outcome.shared_reward > 0.0 {
                let done: Vec<String> = outcome
                    .executed
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| **e)
                    .map(|(j, _)| format!("task {}", j + 1))
                    .collect();
                print!("  [executed {} for +{:.1}]", done.join(", "), outcome.shared_reward);
            }
            println!();
        }
        state = outcome.next_state;
    }

    let psi = env::normalized_accumulated_aoi(total_reward, &cfg)?;
    println!();
    println!("episode reward {total_reward:.1}");
    println!("normalized accumulated age {psi:.4} s");
    println!(
        "(an idle fleet would score {:.4} s)",
        (cfg.episode_cycles as f64 + 1.0) * cfg.cycle_duration_s / 2.0
    );
    Ok(())
}
