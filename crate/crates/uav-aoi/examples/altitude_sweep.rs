//! Sweep the flight altitude and watch the two pressures fight.
//!
//! Low flight: small sensing disks (long detours, weak coverage) but
//! high per-attempt success. High flight: broad disks and short routes
//! but frequent sensing failures and a weaker uplink. The best
//! altitude for the fleet sits strictly between the extremes.
//!
//! ```bash
//! cargo run --release --example altitude_sweep
//! ```

use uav_aoi::config::ScenarioConfig;
use uav_aoi::runner::{run_sweep, AgentKind, SweepAxis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig {
        num_uavs: 2,
        num_tasks: 8,
        cell_radius: 500.0,
        episode_cycles: 1_000,
        ..ScenarioConfig::default()
    };

    let altitudes = [50.0, 100.0, 150.0, 200.0, 250.0, 300.0];
    println!(
        "stalest-task-first fleet, {} tasks in a {} m cell, {} cycles, 5 seeds per altitude",
        cfg.num_tasks, cfg.cell_radius, cfg.episode_cycles
    );
    let rows = run_sweep(&cfg, SweepAxis::Altitude, &altitudes, AgentKind::Greedy, 1, 5)?;

    println!();
    println!("{:>10} {:>10} {:>8}", "altitude", "mean_psi", "std");
    for row in &rows {
        println!("{:>10} {:>10.4} {:>8.4}", row.value, row.mean_psi, row.std_psi);
    }

    let best = rows.iter().min_by(|a, b| a.mean_psi.total_cmp(&b.mean_psi)).unwrap();
    println!();
    println!("best altitude: {} m (mean psi {:.4} s)", best.value, best.mean_psi);
    Ok(())
}
