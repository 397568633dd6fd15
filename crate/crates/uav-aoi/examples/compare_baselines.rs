//! Score every built-in policy on one scenario.
//!
//! Non-learning policies (random, stalest-task-first, shortest-route)
//! are evaluated directly; the learners (task-value network, joint
//! actor-critic, coupled actor-critic) train briefly first. Everyone is
//! scored with exploration off on the same evaluation seeds.
//!
//! ```bash
//! cargo run --release --example compare_baselines
//! ```

use uav_aoi::config::ScenarioConfig;
use uav_aoi::runner::{build_agents, resolve_config, run_eval, run_training, AgentKind};

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
    let seed = 1;
    let resolved = resolve_config(&cfg, seed);
    let eval_episodes = 5;

    println!(
        "{} UAVs, {} tasks, {} cycles per episode; learners train {} episodes first",
        cfg.num_uavs, cfg.num_tasks, cfg.episode_cycles, cfg.num_episodes
    );
    println!();
    println!("{:<16} {:>10} {:>10}", "policy", "mean_psi", "worst");

    let kinds = [
        AgentKind::Random,
        AgentKind::Greedy,
        AgentKind::ShortestRoute,
        AgentKind::Dqn,
        AgentKind::Ddpg,
        AgentKind::Ca2c,
    ];
    for kind in kinds {
        let mut agents = if kind.is_learner() {
            run_training(&resolved, kind, seed, None, false)?.agents
        } else {
            build_agents(kind, &resolved, seed)?
        };
        let (records, _) = run_eval(&resolved, &mut agents, seed, eval_episodes, false)?;
        let psi: Vec<f64> = records.iter().map(|r| r.psi_s).collect();
        let mean = psi.iter().sum::<f64>() / psi.len() as f64;
        let worst = psi.iter().cloned().fold(f64::MIN, f64::max);
        println!("{:<16} {mean:>10.4} {worst:>10.4}", kind.name());
    }

    println!();
    println!("(psi = time-averaged staleness per task, in seconds; lower is better)");
    Ok(())
}
