//! The cooperative scheme versus the selfish scheme on identical
//! environments.
//!
//! Cooperative: every UAV trains on the fleet-wide reward and task
//! selections are exclusive, so the fleet spreads out. Selfish: each
//! UAV sees only the payoff of the task it executed itself and may
//! pile onto a task a teammate already holds. Both fleets train on
//! identical scenario seeds so the comparison is paired.
//!
//! ```bash
//! cargo run --release --example cooperation
//! ```

use uav_aoi::config::ScenarioConfig;
use uav_aoi::runner::{run_training, AgentKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = ScenarioConfig {
        num_uavs: 2,
        num_tasks: 4,
        cell_radius: 200.0,
        episode_cycles: 300,
        num_episodes: 600,
        hidden_width: 32,
        batch_size: 64,
        replay_capacity: 20_000,
        sensing_data_bits: 2e5,
        ..ScenarioConfig::default()
    };

    let tail = 20;
    println!("{:>6} {:>18} {:>18}", "seed", "cooperative_psi", "selfish_psi");
    for seed in [1u64, 2, 3] {
        let mut scores = Vec::new();
        for cooperative in [true, false] {
            let cfg = ScenarioConfig {
                cooperative,
                exclusive_task_selection: cooperative,
                ..base.clone()
            };
            let run = run_training(&cfg, AgentKind::Ca2c, seed, None, false)?;
            let last = &run.records[run.records.len() - tail..];
            scores.push(last.iter().map(|r| r.psi_s).sum::<f64>() / tail as f64);
        }
        println!("{seed:>6} {:>18.4} {:>18.4}", scores[0], scores[1]);
    }
    println!();
    println!("(mean normalized age over the last {tail} training episodes; lower is better)");
    Ok(())
}
