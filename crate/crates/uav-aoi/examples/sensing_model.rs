//! The sensing cone and its distance-decaying success probability.
//!
//! A UAV at altitude z covers a ground disk of radius z * tan(phi);
//! inside it, one sensing attempt succeeds with exp(-lambda * d) where
//! d is the 3D distance to the target. Flying low shrinks the covered
//! disk but raises the success odds, which is one half of the altitude
//! trade-off the simulator explores.
//!
//! ```bash
//! cargo run --example sensing_model
//! ```

use uav_aoi::config::ScenarioConfig;
use uav_aoi::geometry::Vec3;
use uav_aoi::sensing::{sensing_radius, success_prob, SensingParams};

fn main() {
    let cfg = ScenarioConfig::default();
    let params = SensingParams::from_config(&cfg);
    let target = Vec3::ORIGIN;

    println!(
        "cone half-angle {:.1} deg, failure rate lambda = {} per metre",
        params.max_angle.to_degrees(),
        params.lambda
    );
    println!();
    println!("{:>8} {:>12} {:>16}", "alt_m", "disk_radius_m", "p_success_above");
    for h in [50.0, 100.0, 150.0, 200.0, 250.0, 300.0] {
        let r = sensing_radius(h, &params);
        let p = success_prob(Vec3::new(0.0, 0.0, h), target, &params);
        println!("{h:>8} {r:>12.2} {p:>16.4}");
    }

    println!();
    println!("horizontal offset at 200 m altitude:");
    println!("{:>10} {:>12}", "offset_m", "p_success");
    let h = 200.0;
    let edge = sensing_radius(h, &params);
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0, 1.01] {
        let offset = frac * edge;
        let p = success_prob(Vec3::new(offset, 0.0, h), target, &params);
        println!("{offset:>10.2} {p:>12.4}");
    }
    println!();
    println!(
        "past the disk edge ({edge:.2} m here) the target leaves the cone and \
         the probability drops to zero"
    );
}
