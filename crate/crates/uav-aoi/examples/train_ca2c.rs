//! Train the actor-critic fleet on a small scenario and watch the
//! normalized accumulated age fall.
//!
//! Each UAV learns two coupled networks: a critic that scores
//! (state, task, sensing location) triples and an actor that proposes
//! the best sensing location for each task. Training runs one gradient
//! pass per episode from a shared-reward replay buffer.
//!
//! Debug builds are slow for the linear algebra; prefer:
//!
//! ```bash
//! cargo run --release --example train_ca2c
//! ```

use uav_aoi::runner::{run_training, AgentKind};
use uav_aoi::config::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig {
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

    println!(
        "training {} UAVs on {} tasks, {} cycles per episode, {} episodes",
        cfg.num_uavs, cfg.num_tasks, cfg.episode_cycles, cfg.num_episodes
    );
    let run = run_training(&cfg, AgentKind::Ca2c, 1, None, false)?;

    println!();
    println!("{:>8} {:>10} {:>14}", "episode", "psi_s", "rolling_mean");
    for (rec, roll) in run.records.iter().zip(&run.rolling) {
        if rec.episode % 10 == 0 || rec.episode + 1 == run.records.len() {
            println!("{:>8} {:>10.4} {:>14.4}", rec.episode, rec.psi_s, roll);
        }
    }

    let head = &run.records[..20];
    let tail = &run.records[run.records.len() - 20..];
    let mean = |rs: &[uav_aoi::runner::EpisodeRecord]| {
        rs.iter().map(|r| r.psi_s).sum::<f64>() / rs.len() as f64
    };
    println!();
    println!(
        "first 20 episodes: {:.4} s, last 20: {:.4} s ({:+.1}%)",
        mean(head),
        mean(tail),
        100.0 * (mean(tail) / mean(head) - 1.0)
    );
    Ok(())
}
