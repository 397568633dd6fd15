//! Cycle-based simulator of a cellular UAV sensing fleet, with
//! multi-agent reinforcement learning for trajectory and task design.
//!
//! A fleet of UAVs serves sensing tasks scattered over a single cell:
//! each UAV repeatedly picks a task, flies to a sensing spot inside the
//! task's feasibility disk, gathers data there and uploads it to the
//! base station over shared subcarriers. Every upload that carries a
//! valid measurement refreshes that task's age of information; the
//! quality of a whole episode is the normalized accumulated age across
//! tasks, which the learning agents minimize.
//!
//! The crate splits along the natural seams of that loop:
//!
//! - [`geometry`], [`config`]: points, distances and the scenario knobs.
//! - [`channel`]: air-to-ground LoS probability, pathloss, SNR, rate.
//! - [`sensing`]: cone feasibility and sensing success draws.
//! - [`env`]: the cycle-step state machine, rewards and observations.
//! - [`nn`]: plain dense networks with Adam, checkpoints included.
//! - [`agents`]: actor-critic and value-based learners plus a random
//!   reference policy, all behind one [`agents::Policy`] trait.
//! - [`baselines`]: greedy task chasing and an offline shortest-route
//!   planner.
//! - [`runner`]: seeding, episode/training drivers, CSV emitters and
//!   parameter sweeps.
//!
//! Determinism is a design constraint throughout: a run is a pure
//! function of its config and master seed.

pub mod agents;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod env;
pub mod geometry;
pub mod nn;
pub mod runner;
pub mod sensing;

pub use config::{parse_config, serialize_config, ScenarioConfig, TaskSpec};
pub use env::{Action, CycleType, EnvState, StepOutcome};
pub use geometry::Vec3;
