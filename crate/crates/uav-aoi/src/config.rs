//! Scenario configuration: the single knob surface for the simulator.
//!
//! Configs live in flat `key=value` text files. Lines starting with `#`
//! and blank lines are skipped, later keys override earlier ones, and
//! every key has a default so partial files are fine. Task targets are
//! the one field without a default: a config must carry them (or have
//! them sampled) before a simulation can start, which is why
//! [`parse_config`] accepts their absence but [`ScenarioConfig::validate`]
//! does not.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::geometry::Vec3;

/// Which line-of-sight probability curve the channel uses.
///
/// `Paper` adds the shifted exponential to `r_c/r` directly (clamped
/// into [0, 1]); `ThreeGpp` weights the exponential by the remaining
/// probability mass so no clamp is ever needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LosModel {
    #[default]
    Paper,
    ThreeGpp,
}

/// A sensing task: fixed ground target, identified by a 1-based id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub id: usize,
    pub target: Vec3,
}

/// Full scenario description. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Fleet size M.
    pub num_uavs: usize,
    /// Task count N.
    pub num_tasks: usize,
    /// Ground targets, one per task, inside the cell. Empty until set.
    pub task_targets: Vec<TaskSpec>,
    /// Cell radius R_c in metres.
    pub cell_radius: f64,
    /// Base-station antenna height in metres.
    pub bs_height: f64,
    /// Default flight altitude h in metres.
    pub uav_altitude: f64,
    /// Maximum horizontal speed in m/s.
    pub max_speed: f64,
    /// Uplink transmit power in dBm.
    pub tx_power_dbm: f64,
    /// Noise power per subcarrier in dBm.
    pub noise_power_dbm: f64,
    /// Carrier frequency in GHz.
    pub carrier_freq_ghz: f64,
    /// Bandwidth of one subcarrier in Hz.
    pub subcarrier_bandwidth_hz: f64,
    /// Subcarrier budget K shared by transmitting UAVs.
    pub num_subcarriers: usize,
    /// Cycle duration t_c in seconds.
    pub cycle_duration_s: f64,
    /// Per-cycle signalling overhead t_e in seconds (no payload moves).
    pub info_exchange_s: f64,
    /// Sensing failure rate lambda (1/m).
    pub sensing_lambda: f64,
    /// Half-angle of the sensing cone, radians.
    pub max_sensing_angle_rad: f64,
    /// Payload produced by one sensing attempt, bits.
    pub sensing_data_bits: f64,
    /// Cycles per episode N_c.
    pub episode_cycles: u32,
    /// Training episodes.
    pub num_episodes: usize,
    /// Replay minibatch size.
    pub batch_size: usize,
    /// Polyak factor for target networks.
    pub soft_update: f64,
    /// Epsilon for epsilon-greedy task exploration.
    pub exploration: f64,
    /// Initial Adam learning rate.
    pub initial_lr: f64,
    /// Inverse-time learning-rate decay coefficient.
    pub lr_decay: f64,
    /// Width of each hidden layer in the function approximators.
    pub hidden_width: usize,
    /// Replay buffer capacity per agent.
    pub replay_capacity: usize,
    /// Shared team reward when true, per-UAV reward otherwise.
    pub cooperative: bool,
    /// Forbid two UAVs holding the same task at once.
    pub exclusive_task_selection: bool,
    /// Let agents pick altitude within `altitude_range`.
    pub enable_3d: bool,
    /// Admissible altitude band (low, high) in metres, 3D mode only.
    pub altitude_range: (f64, f64),
    /// Line-of-sight probability variant.
    pub los_model: LosModel,
    /// Master seed; every random stream in a run derives from it.
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_uavs: 2,
            num_tasks: 10,
            task_targets: Vec::new(),
            cell_radius: 500.0,
            bs_height: 25.0,
            uav_altitude: 200.0,
            max_speed: 15.0,
            tx_power_dbm: 23.0,
            noise_power_dbm: -96.0,
            carrier_freq_ghz: 2.0,
            subcarrier_bandwidth_hz: 12_500.0,
            num_subcarriers: 80,
            cycle_duration_s: 0.1,
            info_exchange_s: 0.02,
            sensing_lambda: 0.01,
            max_sensing_angle_rad: PI / 6.0,
            sensing_data_bits: 8e6,
            episode_cycles: 8_000,
            num_episodes: 10_000,
            batch_size: 256,
            soft_update: 0.01,
            exploration: 0.1,
            initial_lr: 0.1,
            lr_decay: 1e-3,
            hidden_width: 512,
            replay_capacity: 100_000,
            cooperative: true,
            exclusive_task_selection: true,
            enable_3d: false,
            altitude_range: (100.0, 200.0),
            los_model: LosModel::Paper,
            rng_seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// Small scenario that trains in minutes on one core: two UAVs,
    /// five tasks, a 200 m cell, 500-cycle episodes and narrow networks.
    pub fn desk_scale() -> Self {
        ScenarioConfig {
            num_uavs: 2,
            num_tasks: 5,
            cell_radius: 200.0,
            episode_cycles: 500,
            num_episodes: 300,
            hidden_width: 64,
            ..ScenarioConfig::default()
        }
    }

    /// Full validation: everything [`parse_config`] checks plus the
    /// requirement that targets are present and consistent. Returns
    /// human-readable warnings for legal but suspicious settings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        self.check_invariants()?;
        if self.task_targets.is_empty() {
            return Err(ConfigError::MissingTargets);
        }
        let mut warnings = Vec::new();
        if self.num_tasks < self.num_uavs {
            warnings.push(format!(
                "num_tasks ({}) < num_uavs ({}): exclusive selection cannot occupy every UAV",
                self.num_tasks, self.num_uavs
            ));
        }
        Ok(warnings)
    }

    /// Invariants that do not involve task targets, shared by parse-time
    /// and full validation. Targets are still cross-checked when present.
    fn check_invariants(&self) -> Result<(), ConfigError> {
        fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Invariant(format!("{name} must be positive, got {v}")))
            }
        }
        fn finite(name: &str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invariant(format!("{name} must be finite, got {v}")))
            }
        }

        if self.num_uavs == 0 {
            return Err(ConfigError::Invariant("num_uavs must be at least 1".into()));
        }
        if self.num_tasks == 0 {
            return Err(ConfigError::Invariant("num_tasks must be at least 1".into()));
        }
        if self.num_subcarriers <= self.num_uavs {
            return Err(ConfigError::Invariant(format!(
                "K > M violated: num_subcarriers ({}) must exceed num_uavs ({})",
                self.num_subcarriers, self.num_uavs
            )));
        }
        positive("cell_radius", self.cell_radius)?;
        positive("bs_height", self.bs_height)?;
        positive("uav_altitude", self.uav_altitude)?;
        positive("max_speed", self.max_speed)?;
        finite("tx_power_dbm", self.tx_power_dbm)?;
        finite("noise_power_dbm", self.noise_power_dbm)?;
        positive("carrier_freq_ghz", self.carrier_freq_ghz)?;
        positive("subcarrier_bandwidth_hz", self.subcarrier_bandwidth_hz)?;
        positive("cycle_duration_s", self.cycle_duration_s)?;
        if !(self.info_exchange_s > 0.0 && self.info_exchange_s < self.cycle_duration_s) {
            return Err(ConfigError::Invariant(format!(
                "info_exchange_s ({}) must lie strictly between 0 and cycle_duration_s ({})",
                self.info_exchange_s, self.cycle_duration_s
            )));
        }
        positive("sensing_lambda", self.sensing_lambda)?;
        if !(self.max_sensing_angle_rad > 0.0 && self.max_sensing_angle_rad < PI / 2.0) {
            return Err(ConfigError::Invariant(format!(
                "max_sensing_angle_rad ({}) must lie strictly between 0 and pi/2",
                self.max_sensing_angle_rad
            )));
        }
        positive("sensing_data_bits", self.sensing_data_bits)?;
        if self.episode_cycles == 0 {
            return Err(ConfigError::Invariant("episode_cycles must be at least 1".into()));
        }
        if self.num_episodes == 0 {
            return Err(ConfigError::Invariant("num_episodes must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::Invariant("batch_size must be at least 1".into()));
        }
        if !(self.soft_update > 0.0 && self.soft_update <= 1.0) {
            return Err(ConfigError::Invariant(format!(
                "soft_update ({}) must lie in (0, 1]",
                self.soft_update
            )));
        }
        if !(0.0..=1.0).contains(&self.exploration) {
            return Err(ConfigError::Invariant(format!(
                "exploration ({}) must lie in [0, 1]",
                self.exploration
            )));
        }
        positive("initial_lr", self.initial_lr)?;
        if !(self.lr_decay.is_finite() && self.lr_decay >= 0.0) {
            return Err(ConfigError::Invariant(format!(
                "lr_decay ({}) must be non-negative",
                self.lr_decay
            )));
        }
        if self.hidden_width == 0 {
            return Err(ConfigError::Invariant("hidden_width must be at least 1".into()));
        }
        if self.replay_capacity == 0 {
            return Err(ConfigError::Invariant("replay_capacity must be at least 1".into()));
        }
        let (lo, hi) = self.altitude_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(ConfigError::Invariant(format!(
                "altitude_range ({lo}, {hi}) must satisfy 0 < low <= high"
            )));
        }
        if self.enable_3d && !(lo <= self.uav_altitude && self.uav_altitude <= hi) {
            return Err(ConfigError::Invariant(format!(
                "uav_altitude ({}) must lie inside altitude_range ({lo}, {hi}) when enable_3d is set",
                self.uav_altitude
            )));
        }
        if !self.task_targets.is_empty() {
            if self.task_targets.len() != self.num_tasks {
                return Err(ConfigError::Invariant(format!(
                    "task_targets holds {} entries but num_tasks is {}",
                    self.task_targets.len(),
                    self.num_tasks
                )));
            }
            for spec in &self.task_targets {
                if !spec.target.is_finite() || spec.target.z != 0.0 {
                    return Err(ConfigError::Invariant(format!(
                        "task {} target must be a finite ground point",
                        spec.id
                    )));
                }
                if spec.target.horizontal_norm() > self.cell_radius * (1.0 + 1e-12) {
                    return Err(ConfigError::Invariant(format!(
                        "task {} target lies outside the cell radius",
                        spec.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Target of a task by 1-based id. Panics on an id the config does
    /// not hold; callers validate before simulating.
    pub fn target_of(&self, task: usize) -> Vec3 {
        self.task_targets[task - 1].target
    }
}

/// Draw `n` task targets uniformly over the disk of `radius` metres,
/// ids assigned 1..=n in draw order. Two RNG draws per target.
pub fn sample_task_targets<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Vec<TaskSpec> {
    (1..=n)
        .map(|id| {
            let r = radius * rng.gen::<f64>().sqrt();
            let theta = 2.0 * PI * rng.gen::<f64>();
            TaskSpec { id, target: Vec3::ground(r * theta.cos(), r * theta.sin()) }
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("malformed value for `{key}`: {detail}")]
    Malformed { key: String, detail: String },
    #[error("invalid configuration: {0}")]
    Invariant(String),
    #[error("task_targets required: provide them in the config or sample them before running")]
    MissingTargets,
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.trim().parse::<f64>().map_err(|e| ConfigError::Malformed {
        key: key.to_string(),
        detail: format!("{e} (got `{value}`)"),
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.trim().parse::<usize>().map_err(|e| ConfigError::Malformed {
        key: key.to_string(),
        detail: format!("{e} (got `{value}`)"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(ConfigError::Malformed {
            key: key.to_string(),
            detail: format!("expected true/false, got `{other}`"),
        }),
    }
}

fn parse_targets(value: &str) -> Result<Vec<TaskSpec>, ConfigError> {
    let mut specs = Vec::new();
    for (idx, chunk) in value.split(';').enumerate() {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let mut parts = chunk.split(',');
        let (x, y) = match (parts.next(), parts.next(), parts.next()) {
            (Some(x), Some(y), None) => (x, y),
            _ => {
                return Err(ConfigError::Malformed {
                    key: "task_targets".into(),
                    detail: format!("entry {} must be `x,y`, got `{chunk}`", idx + 1),
                })
            }
        };
        specs.push(TaskSpec {
            id: specs.len() + 1,
            target: Vec3::ground(parse_f64("task_targets", x)?, parse_f64("task_targets", y)?),
        });
    }
    if specs.is_empty() {
        return Err(ConfigError::Malformed {
            key: "task_targets".into(),
            detail: "no entries given".into(),
        });
    }
    Ok(specs)
}

/// Parse a config document on top of the defaults.
///
/// Checks every invariant that does not depend on task targets being
/// present; a document without targets parses fine and fails later in
/// [`ScenarioConfig::validate`].
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig { task_targets: Vec::new(), ..ScenarioConfig::default() };
    for raw_line in text.lines() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
            key: line.to_string(),
            detail: "expected key=value".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "num_uavs" => cfg.num_uavs = parse_usize(key, value)?,
            "num_tasks" => cfg.num_tasks = parse_usize(key, value)?,
            "task_targets" => cfg.task_targets = parse_targets(value)?,
            "cell_radius" => cfg.cell_radius = parse_f64(key, value)?,
            "bs_height" => cfg.bs_height = parse_f64(key, value)?,
            "uav_altitude" => cfg.uav_altitude = parse_f64(key, value)?,
            "max_speed" => cfg.max_speed = parse_f64(key, value)?,
            "tx_power_dbm" => cfg.tx_power_dbm = parse_f64(key, value)?,
            "noise_power_dbm" => cfg.noise_power_dbm = parse_f64(key, value)?,
            "carrier_freq_ghz" => cfg.carrier_freq_ghz = parse_f64(key, value)?,
            "subcarrier_bandwidth_hz" => cfg.subcarrier_bandwidth_hz = parse_f64(key, value)?,
            "num_subcarriers" => cfg.num_subcarriers = parse_usize(key, value)?,
            "cycle_duration_s" => cfg.cycle_duration_s = parse_f64(key, value)?,
            "info_exchange_s" => cfg.info_exchange_s = parse_f64(key, value)?,
            "sensing_lambda" => cfg.sensing_lambda = parse_f64(key, value)?,
            "max_sensing_angle_rad" => cfg.max_sensing_angle_rad = parse_f64(key, value)?,
            "max_sensing_angle_deg" => {
                cfg.max_sensing_angle_rad = parse_f64(key, value)?.to_radians()
            }
            "sensing_data_bits" => cfg.sensing_data_bits = parse_f64(key, value)?,
            "episode_cycles" => {
                cfg.episode_cycles =
                    parse_usize(key, value)?.try_into().map_err(|_| ConfigError::Malformed {
                        key: key.to_string(),
                        detail: "value too large".into(),
                    })?
            }
            "num_episodes" => cfg.num_episodes = parse_usize(key, value)?,
            "batch_size" => cfg.batch_size = parse_usize(key, value)?,
            "soft_update" => cfg.soft_update = parse_f64(key, value)?,
            "exploration" => cfg.exploration = parse_f64(key, value)?,
            "initial_lr" => cfg.initial_lr = parse_f64(key, value)?,
            "lr_decay" => cfg.lr_decay = parse_f64(key, value)?,
            "hidden_width" => cfg.hidden_width = parse_usize(key, value)?,
            "replay_capacity" => cfg.replay_capacity = parse_usize(key, value)?,
            "cooperative" => cfg.cooperative = parse_bool(key, value)?,
            "exclusive_task_selection" => cfg.exclusive_task_selection = parse_bool(key, value)?,
            "enable_3d" => cfg.enable_3d = parse_bool(key, value)?,
            "altitude_range" => {
                let (lo, hi) = value.split_once(',').ok_or_else(|| ConfigError::Malformed {
                    key: key.to_string(),
                    detail: format!("expected `low,high`, got `{value}`"),
                })?;
                cfg.altitude_range = (parse_f64(key, lo)?, parse_f64(key, hi)?);
            }
            "los_model" => {
                cfg.los_model = match value {
                    "paper" => LosModel::Paper,
                    "3gpp" => LosModel::ThreeGpp,
                    other => {
                        return Err(ConfigError::Malformed {
                            key: key.to_string(),
                            detail: format!("expected paper or 3gpp, got `{other}`"),
                        })
                    }
                }
            }
            "rng_seed" => {
                cfg.rng_seed = value.trim().parse::<u64>().map_err(|e| ConfigError::Malformed {
                    key: key.to_string(),
                    detail: format!("{e} (got `{value}`)"),
                })?
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
    }
    cfg.check_invariants()?;
    Ok(cfg)
}

/// Render a config as a document [`parse_config`] reads back exactly.
/// Floats use Rust's shortest round-trip formatting, so a serialize and
/// re-parse reproduces the struct bit for bit.
pub fn serialize_config(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("num_uavs", cfg.num_uavs.to_string());
    kv("num_tasks", cfg.num_tasks.to_string());
    if !cfg.task_targets.is_empty() {
        let entries: Vec<String> =
            cfg.task_targets.iter().map(|t| format!("{},{}", t.target.x, t.target.y)).collect();
        kv("task_targets", entries.join(";"));
    }
    kv("cell_radius", cfg.cell_radius.to_string());
    kv("bs_height", cfg.bs_height.to_string());
    kv("uav_altitude", cfg.uav_altitude.to_string());
    kv("max_speed", cfg.max_speed.to_string());
    kv("tx_power_dbm", cfg.tx_power_dbm.to_string());
    kv("noise_power_dbm", cfg.noise_power_dbm.to_string());
    kv("carrier_freq_ghz", cfg.carrier_freq_ghz.to_string());
    kv("subcarrier_bandwidth_hz", cfg.subcarrier_bandwidth_hz.to_string());
    kv("num_subcarriers", cfg.num_subcarriers.to_string());
    kv("cycle_duration_s", cfg.cycle_duration_s.to_string());
    kv("info_exchange_s", cfg.info_exchange_s.to_string());
    kv("sensing_lambda", cfg.sensing_lambda.to_string());
    kv("max_sensing_angle_rad", cfg.max_sensing_angle_rad.to_string());
    kv("sensing_data_bits", cfg.sensing_data_bits.to_string());
    kv("episode_cycles", cfg.episode_cycles.to_string());
    kv("num_episodes", cfg.num_episodes.to_string());
    kv("batch_size", cfg.batch_size.to_string());
    kv("soft_update", cfg.soft_update.to_string());
    kv("exploration", cfg.exploration.to_string());
    kv("initial_lr", cfg.initial_lr.to_string());
    kv("lr_decay", cfg.lr_decay.to_string());
    kv("hidden_width", cfg.hidden_width.to_string());
    kv("replay_capacity", cfg.replay_capacity.to_string());
    kv("cooperative", cfg.cooperative.to_string());
    kv("exclusive_task_selection", cfg.exclusive_task_selection.to_string());
    kv("enable_3d", cfg.enable_3d.to_string());
    kv("altitude_range", format!("{},{}", cfg.altitude_range.0, cfg.altitude_range.1));
    kv(
        "los_model",
        match cfg.los_model {
            LosModel::Paper => "paper".to_string(),
            LosModel::ThreeGpp => "3gpp".to_string(),
        },
    );
    kv("rng_seed", cfg.rng_seed.to_string());
    out
}
