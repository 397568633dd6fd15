//! Shortest closed sensing route: exact tour order plus disk refinement.
//!
//! The planner first solves the traveling-salesman order over the task
//! targets exactly (bitmask dynamic programming, so it stays exact up
//! to 20 tasks), then slides each visit point inside its sensing disk
//! to shorten the tour further, and keeps the better of another
//! order/refine round.
//!
//! ```bash
//! cargo run --example route_plan
//! ```

use uav_aoi::baselines::{build_route_plan, held_karp_order};
use uav_aoi::config::{ScenarioConfig, TaskSpec};
use uav_aoi::geometry::Vec3;
use uav_aoi::sensing::{sensing_radius, SensingParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig {
        num_tasks: 6,
        task_targets: vec![
            TaskSpec { id: 1, target: Vec3::ground(350.0, 80.0) },
            TaskSpec { id: 2, target: Vec3::ground(-300.0, 240.0) },
            TaskSpec { id: 3, target: Vec3::ground(-80.0, -380.0) },
            TaskSpec { id: 4, target: Vec3::ground(150.0, 330.0) },
            TaskSpec { id: 5, target: Vec3::ground(-360.0, -120.0) },
            TaskSpec { id: 6, target: Vec3::ground(90.0, -150.0) },
        ],
        ..ScenarioConfig::default()
    };

    let params = SensingParams::from_config(&cfg);
    let r_s = sensing_radius(cfg.uav_altitude, &params);
    println!(
        "6 targets, sensing disks of radius {r_s:.2} m at {} m altitude",
        cfg.uav_altitude
    );

    // Baseline: the exact tour through the target centers themselves.
    let centers: Vec<Vec3> = cfg
        .task_targets
        .iter()
        .map(|t| Vec3::new(t.target.x, t.target.y, cfg.uav_altitude))
        .collect();
    let (_, center_len) = held_karp_order(&centers)?;
    println!("exact tour through the centers: {center_len:.2} m");

    let plan = build_route_plan(&cfg)?;
    println!("refined tour through the disks:  {:.2} m", plan.length);
    println!(
        "refinement saves {:.1}% of the flight",
        100.0 * (1.0 - plan.length / center_len)
    );
    println!();
    println!("{:>5} {:>10} {:>10} {:>12}", "task", "x_m", "y_m", "leg_to_next");
    for (k, &task) in plan.order.iter().enumerate() {
        let here = plan.points[task - 1];
        let next = plan.points[plan.order[(k + 1) % plan.order.len()] - 1];
        println!(
            "{task:>5} {:>10.2} {:>10.2} {:>12.2}",
            here.x,
            here.y,
            here.horizontal_dist(next)
        );
    }
    Ok(())
}
