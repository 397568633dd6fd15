//! Uplink channel closed forms over an altitude/distance grid.
//!
//! Shows the altitude trade-off directly: climbing raises the
//! line-of-sight probability but lengthens the link, so the average
//! pathloss at a fixed ground distance is not monotone in altitude.
//!
//! ```bash
//! cargo run --example channel_table
//! ```

use uav_aoi::channel::{self, ChannelParams};
use uav_aoi::config::ScenarioConfig;
use uav_aoi::geometry::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::default();
    let params = ChannelParams::from_config(&cfg);

    println!("tx power {} dBm, noise {} dBm, carrier {} GHz, {} subcarriers of {} Hz",
        cfg.tx_power_dbm,
        cfg.noise_power_dbm,
        cfg.carrier_freq_ghz,
        cfg.num_subcarriers,
        cfg.subcarrier_bandwidth_hz);
    println!();
    println!("{:>8} {:>8} {:>9} {:>12} {:>9} {:>12}",
        "alt_m", "dist_m", "p_los", "pathloss_db", "snr_db", "rate_mbps");

    for h in [50.0, 100.0, 150.0, 200.0, 250.0, 300.0] {
        for r in [0.0, 250.0, 500.0, 750.0, 1000.0] {
            let uav = Vec3::new(r, 0.0, h);
            let p = channel::prob_los(uav, &params)?;
            let pl = channel::avg_pathloss_db(uav, &params)?;
            let snr_db = 10.0 * channel::snr(uav, &params)?.log10();
            let rate = channel::rate_bps(uav, cfg.num_subcarriers, &params)?;
            println!("{h:>8} {r:>8} {p:>9.4} {pl:>12.3} {snr_db:>9.3} {:>12.4}", rate / 1e6);
        }
        println!();
    }

    // A cycle moves payload only outside the signalling overhead, so
    // the effective per-cycle budget is rate * (t_c - t_e).
    let hover = Vec3::new(0.0, 0.0, cfg.uav_altitude);
    let per_cycle = channel::data_per_cycle(hover, cfg.num_subcarriers, &params)?;
    println!(
        "hovering over the base station at {} m moves {:.0} bits per {}-second cycle",
        cfg.uav_altitude, per_cycle, cfg.cycle_duration_s
    );
    println!(
        "one {:.0}-bit sensing payload therefore needs {} transmission cycles there",
        cfg.sensing_data_bits,
        (cfg.sensing_data_bits / per_cycle).ceil()
    );
    Ok(())
}
