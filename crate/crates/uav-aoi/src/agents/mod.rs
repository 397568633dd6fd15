//! Learning agents and the machinery they share.
//!
//! Every decision-maker in the crate, learned or handcrafted, sits
//! behind the [`Policy`] trait so the episode driver never cares which
//! one it is running. The learners in this module differ in how they
//! pick the compound action (task plus sensing location):
//!
//! - [`ca2c::Ca2cAgent`]: a critic scores (state, task, location)
//!   triples while an actor proposes the best location per task; the
//!   task choice is the critic argmax over the actor's proposals.
//! - [`dqn::DqnAgent`]: task values only; the sensing location is
//!   pinned right above the task target.
//! - [`ddpg::DdpgAgent`]: one actor emits task probabilities and a
//!   location offset together; the critic scores the whole vector.
//! - [`random::RandomPolicy`]: uniform feasible choices, the reference
//!   floor any learner must beat.
//!
//! Experience collection follows the protocol's rhythm rather than the
//! raw cycle clock: one transition spans from a task commitment to the
//! cycle the committed task executes (or the episode ends), with every
//! cycle's reward accumulated in between.

pub mod ca2c;
pub mod ddpg;
pub mod dqn;
pub mod random;

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::env::{self, Action, CycleType, EnvState, TaskId};
use crate::geometry::Vec3;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no admissible task to select from")]
    NoAdmissibleTask,
    #[error("network failure: {0}")]
    Nn(#[from] NnError),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error("this policy has no checkpoint support")]
    NoCheckpoint,
}

/// Learning diagnostics from one end-of-episode training pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub actor_objective: Option<f64>,
}

/// A decision-maker for one UAV. Implementations hold their own copy
/// of the scenario config, taken at construction.
pub trait Policy {
    /// Short identifier for manifests and logs.
    fn name(&self) -> &'static str;

    /// Pick an action at a Decision cycle. `admissible` is the already
    /// arbitrated task set for this UAV, ascending, never empty.
    /// `explore` enables training-time randomization.
    fn select(
        &mut self,
        state: &EnvState,
        admissible: &[TaskId],
        explore: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Action, AgentError>;

    /// Reward feedback after each cycle (training mode only).
    fn observe(&mut self, _reward: f64, _next_state: &EnvState) {}

    /// End-of-episode training pass. Non-learning policies return None.
    fn train_episode(
        &mut self,
        _lr: f64,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<TrainStats>, AgentError> {
        Ok(None)
    }

    /// Hook at the start of each episode (clears pending accumulators,
    /// re-rolls per-episode randomization).
    fn begin_episode(&mut self, _episode: usize, _rng: &mut dyn RngCore) {}

    /// Write learned parameters. Returns false when the policy has
    /// nothing to persist.
    fn write_checkpoint(&self, _out: &mut dyn Write) -> Result<bool, AgentError> {
        Ok(false)
    }

    /// Restore parameters written by [`Policy::write_checkpoint`].
    fn read_checkpoint(&mut self, _input: &mut dyn BufRead) -> Result<(), AgentError> {
        Err(AgentError::NoCheckpoint)
    }
}

/// One stored CA2C/DQN transition: decision boundary to decision
/// boundary, action split into task id and sensing offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub task: TaskId,
    /// Sensing location relative to the task target in x/y; the z
    /// component carries the absolute altitude.
    pub offset: Vec3,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

/// Bounded FIFO of experiences with uniform sampling: without
/// replacement once the buffer holds a full batch, with replacement
/// while it is still warming up.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { items: VecDeque::new(), capacity }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Stored items, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Vec<T> {
        if self.is_empty() || n == 0 {
            return Vec::new();
        }
        if self.items.len() >= n {
            rand::seq::index::sample(rng, self.items.len(), n)
                .iter()
                .map(|i| self.items[i].clone())
                .collect()
        } else {
            (0..n).map(|_| self.items[rng.gen_range(0..self.items.len())].clone()).collect()
        }
    }
}

/// Raw pieces of a finalized transition, before the agent shapes them
/// into its own experience type.
pub(crate) struct TransitionParts<A> {
    pub state: Vec<f64>,
    pub action: A,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

/// Accumulates reward between a task commitment and the next real
/// decision boundary of this UAV.
///
/// A boundary is real when the episode ends or when the UAV re-enters
/// Decision from cycle 3 onward (an execution signature). The
/// fleet-wide bootstrap re-decision at cycle 2 is not a boundary: the
/// stale commitment is silently replaced when the agent re-selects, so
/// stored transitions per episode exactly equal executions of the
/// UAV's task plus one truncated tail.
pub(crate) struct Accumulator<A> {
    pending: Option<(Vec<f64>, A, f64)>,
}

impl<A> Accumulator<A> {
    pub fn new() -> Self {
        Accumulator { pending: None }
    }

    pub fn arm(&mut self, state: Vec<f64>, action: A) {
        self.pending = Some((state, action, 0.0));
    }

    pub fn clear(&mut self) {
        self.pending = None;
    }

    pub fn observe(
        &mut self,
        reward: f64,
        next_state: &EnvState,
        cfg: &ScenarioConfig,
        uav: usize,
    ) -> Option<TransitionParts<A>> {
        let (_, _, acc) = self.pending.as_mut()?;
        *acc += reward;
        let terminal = next_state.cycle_index > cfg.episode_cycles;
        let boundary = terminal
            || (next_state.cycle_index >= 3
                && env::cycle_type(next_state, uav, cfg) == CycleType::Decision);
        if !boundary {
            return None;
        }
        let (state, action, reward) = self.pending.take().expect("checked above");
        Some(TransitionParts {
            state,
            action,
            next_state: env::encode_state(next_state, cfg, uav),
            reward,
            terminal,
        })
    }
}

/// How the actor's raw altitude output becomes a flight altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AltitudeMode {
    Fixed(f64),
    Range { low: f64, high: f64 },
}

/// Bounds raw actor outputs into a feasible sensing offset.
///
/// The horizontal pair is squashed radially: an output `u` maps to a
/// displacement of length `r_s * |u| / (1 + |u|)` in the direction of
/// `u`, which is smooth everywhere (including the origin) and lands
/// strictly inside the sensing disk for finite outputs. The algebraic
/// sigmoid is chosen over tanh deliberately: its slope decays only
/// polynomially, so gradient ascent that pushes the output far out
/// still feels a pull back instead of flatlining. In ranged-altitude
/// mode a third output maps the same way onto the altitude band and
/// the disk radius follows the mapped altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorOutputMap {
    pub tan_angle: f64,
    pub altitude: AltitudeMode,
}

/// Odd algebraic sigmoid `w / (1 + |w|)` and its derivative.
fn soft_unit(w: f64) -> (f64, f64) {
    let denom = 1.0 + w.abs();
    (w / denom, 1.0 / (denom * denom))
}

impl ActorOutputMap {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        ActorOutputMap {
            tan_angle: cfg.max_sensing_angle_rad.tan(),
            altitude: if cfg.enable_3d {
                AltitudeMode::Range { low: cfg.altitude_range.0, high: cfg.altitude_range.1 }
            } else {
                AltitudeMode::Fixed(cfg.uav_altitude)
            },
        }
    }

    /// Number of raw actor outputs this map consumes: 2, plus 1 with a
    /// free altitude.
    pub fn raw_dim(&self) -> usize {
        match self.altitude {
            AltitudeMode::Fixed(_) => 2,
            AltitudeMode::Range { .. } => 3,
        }
    }

    fn altitude_of(&self, raw: &[f64]) -> f64 {
        match self.altitude {
            AltitudeMode::Fixed(h) => h,
            AltitudeMode::Range { low, high } => {
                0.5 * (low + high) + 0.5 * (high - low) * soft_unit(raw[2]).0
            }
        }
    }

    /// Map raw outputs to (dx, dy, z): horizontal displacement from the
    /// task target plus absolute altitude.
    pub fn offset(&self, raw: &[f64]) -> Vec3 {
        assert_eq!(raw.len(), self.raw_dim(), "raw output length mismatch");
        let z = self.altitude_of(raw);
        let radius = z * self.tan_angle;
        let (u1, u2) = (raw[0], raw[1]);
        let r = (u1 * u1 + u2 * u2).sqrt();
        // s(r)/r with s(r) = r/(1+r) extends continuously to 1 at the
        // origin.
        let squash = 1.0 / (1.0 + r);
        Vec3::new(radius * squash * u1, radius * squash * u2, z)
    }

    /// Jacobian of [`ActorOutputMap::offset`]: three rows (dx, dy, z),
    /// one column per raw output.
    pub fn jacobian(&self, raw: &[f64]) -> [Vec<f64>; 3] {
        let dim = self.raw_dim();
        let z = self.altitude_of(raw);
        let radius = z * self.tan_angle;
        let (u1, u2) = (raw[0], raw[1]);
        let r = (u1 * u1 + u2 * u2).sqrt();

        let mut rows = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        let squash = 1.0 / (1.0 + r);
        if r < 1e-9 {
            // Limit of the radial squash: the identity scaled by radius.
            rows[0][0] = radius;
            rows[1][1] = radius;
        } else {
            // d(squash * u_i)/du_j = delta_ij * squash
            //   + (u_i u_j / r) * d(squash)/dr, with
            // d(squash)/dr = -1 / (1+r)^2.
            let common = -1.0 / (r * (1.0 + r) * (1.0 + r));
            rows[0][0] = radius * (squash + u1 * u1 * common);
            rows[0][1] = radius * (u1 * u2 * common);
            rows[1][0] = rows[0][1];
            rows[1][1] = radius * (squash + u2 * u2 * common);
        }
        if let AltitudeMode::Range { low, high } = self.altitude {
            let dz = 0.5 * (high - low) * soft_unit(raw[2]).1;
            // Altitude moves the disk radius as well as the z output.
            rows[0][2] = self.tan_angle * squash * u1 * dz;
            rows[1][2] = self.tan_angle * squash * u2 * dz;
            rows[2][2] = dz;
        }
        rows
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Append a task one-hot block (1-based id) to a feature vector.
pub(crate) fn push_onehot(out: &mut Vec<f64>, task: TaskId, n_tasks: usize) {
    for j in 1..=n_tasks {
        out.push(if j == task { 1.0 } else { 0.0 });
    }
}

/// Scale that maps network outputs to the reward magnitudes of the
/// scenario: one cycle of age across every task, accumulated over the
/// episode. Typical undiscounted returns then land within a few units
/// of the net output, so a fresh network's value noise stays small
/// against its own bootstrapped targets (the looser total-reward
/// ceiling left targets a hundredfold below initialization noise).
pub(crate) fn value_scale(cfg: &ScenarioConfig) -> f64 {
    let n_c = cfg.episode_cycles as f64;
    cfg.num_tasks as f64 * n_c * cfg.cycle_duration_s
}
