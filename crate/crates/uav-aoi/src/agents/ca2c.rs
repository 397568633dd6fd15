//! Compound-action actor-critic agent.
//!
//! The discrete half of the action (which task to sense) and the
//! continuous half (where to sense it from) are chosen jointly: for
//! every candidate task the actor proposes a sensing location, the
//! critic scores the (state, task, location) triple, and the agent
//! commits to the highest-scoring pair. Training follows the usual
//! actor-critic split with target networks:
//!
//! - the critic regresses onto double-estimator targets, picking the
//!   bootstrap task with the online networks and valuing it with the
//!   target networks, with no discounting (rewards already carry the
//!   remaining-horizon weight);
//! - the actor ascends the critic's value at its own proposals, chained
//!   through the feasibility map's jacobian.
//!
//! Exploration only randomizes the task; the location always comes from
//! the actor so the critic sees on-policy placements.

use std::io::{BufRead, Write};

use rand::{Rng, RngCore};

use crate::config::ScenarioConfig;
use crate::env::{self, Action, EnvState, TaskId};
use crate::geometry::Vec3;
use crate::nn::{self, AdamState, Gradients, Mlp, OutputActivation};

use super::{
    push_onehot, value_scale, Accumulator, ActorOutputMap, AgentError, Experience, Policy,
    ReplayBuffer, TrainStats,
};

pub struct Ca2cAgent {
    uav: usize,
    cfg: ScenarioConfig,
    map: ActorOutputMap,
    /// Critic outputs are multiplied by this before use, so the network
    /// regresses onto O(1) values instead of raw reward sums.
    scale: f64,
    critic: Mlp,
    actor: Mlp,
    target_critic: Mlp,
    target_actor: Mlp,
    critic_opt: AdamState,
    actor_opt: AdamState,
    replay: ReplayBuffer<Experience>,
    pending: Accumulator<(TaskId, Vec3)>,
}

impl Ca2cAgent {
    pub fn new<R: Rng + ?Sized>(uav: usize, cfg: &ScenarioConfig, rng: &mut R) -> Self {
        let map = ActorOutputMap::from_config(cfg);
        let state_len = env::encoded_state_len(cfg);
        let w = cfg.hidden_width;
        let critic_dims =
            [state_len + cfg.num_tasks + map.raw_dim(), w, w, w, 1];
        let actor_dims = [state_len + cfg.num_tasks, w, w, w, map.raw_dim()];
        let critic = Mlp::init(&critic_dims, OutputActivation::Identity, rng);
        let actor = Mlp::init(&actor_dims, OutputActivation::Identity, rng);
        let target_critic = critic.clone();
        let target_actor = actor.clone();
        let critic_opt = AdamState::new(&critic);
        let actor_opt = AdamState::new(&actor);
        Ca2cAgent {
            uav,
            cfg: cfg.clone(),
            map,
            scale: value_scale(cfg),
            critic,
            actor,
            target_critic,
            target_actor,
            critic_opt,
            actor_opt,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            pending: Accumulator::new(),
        }
    }

    /// Number of location features fed to the critic: x and y, plus
    /// altitude when it is free.
    fn loc_feat_dim(&self) -> usize {
        self.map.raw_dim()
    }

    /// Turn a stored offset back into the absolute sensing location.
    fn absolute_location(&self, task: TaskId, offset: Vec3) -> Vec3 {
        let target = self.cfg.target_of(task);
        Vec3::new(target.x + offset.x, target.y + offset.y, offset.z)
    }

    /// Per-coordinate divisors that bring a sensing offset into unit
    /// range: the feasible disk radius for x and y, the altitude span
    /// for z when the altitude is free.
    fn loc_feat_scales(&self) -> [f64; 3] {
        let tan = self.cfg.max_sensing_angle_rad.tan();
        if self.loc_feat_dim() == 3 {
            let (lo, hi) = self.cfg.altitude_range;
            let r = hi * tan;
            [r, r, (hi - lo).max(f64::EPSILON)]
        } else {
            let r = self.cfg.uav_altitude * tan;
            [r, r, 1.0]
        }
    }

    fn critic_input(&self, state: &[f64], task: TaskId, location: Vec3) -> Vec<f64> {
        let mut v = Vec::with_capacity(state.len() + self.cfg.num_tasks + self.loc_feat_dim());
        v.extend_from_slice(state);
        push_onehot(&mut v, task, self.cfg.num_tasks);
        // The critic sees the location as a normalized offset from the
        // chosen task's target: how far sideways the hover point sits
        // is exactly what drives sensing success, so hand it over
        // directly instead of burying it in absolute coordinates.
        let target = self.cfg.target_of(task);
        let scales = self.loc_feat_scales();
        v.push((location.x - target.x) / scales[0]);
        v.push((location.y - target.y) / scales[1]);
        if self.loc_feat_dim() == 3 {
            v.push((location.z - self.cfg.altitude_range.0) / scales[2]);
        }
        v
    }

    fn actor_input(&self, state: &[f64], task: TaskId) -> Vec<f64> {
        let mut v = Vec::with_capacity(state.len() + self.cfg.num_tasks);
        v.extend_from_slice(state);
        push_onehot(&mut v, task, self.cfg.num_tasks);
        v
    }

    /// The given actor's sensing offset for (state, task).
    fn propose(&self, actor: &Mlp, state: &[f64], task: TaskId) -> Result<Vec3, AgentError> {
        let (raw, _) = actor.forward(&self.actor_input(state, task))?;
        Ok(self.map.offset(&raw))
    }

    /// Scaled value of (state, task) under a critic/actor pair.
    fn value(
        &self,
        critic: &Mlp,
        actor: &Mlp,
        state: &[f64],
        task: TaskId,
    ) -> Result<f64, AgentError> {
        let offset = self.propose(actor, state, task)?;
        let location = self.absolute_location(task, offset);
        let (out, _) = critic.forward(&self.critic_input(state, task, location))?;
        Ok(out[0] * self.scale)
    }

    /// Online-network value of every task in the current state, in task
    /// id order. Exposed for inspection and tooling.
    pub fn task_values(&self, state: &EnvState) -> Result<Vec<f64>, AgentError> {
        let feats = env::encode_state(state, &self.cfg, self.uav);
        (1..=self.cfg.num_tasks).map(|j| self.value(&self.critic, &self.actor, &feats, j)).collect()
    }

    /// The actor's proposed sensing offset for every task in the current
    /// state, in task id order. Exposed for inspection and tooling.
    pub fn proposed_offsets(&self, state: &EnvState) -> Result<Vec<Vec3>, AgentError> {
        let feats = env::encode_state(state, &self.cfg, self.uav);
        (1..=self.cfg.num_tasks).map(|j| self.propose(&self.actor, &feats, j)).collect()
    }

    /// Argmax task over `tasks` by online critic + actor, ties to the
    /// lowest id (callers pass ascending ids).
    fn best_task<I>(&self, state: &[f64], tasks: I) -> Result<TaskId, AgentError>
    where
        I: IntoIterator<Item = TaskId>,
    {
        let mut best: Option<(TaskId, f64)> = None;
        for j in tasks {
            let q = self.value(&self.critic, &self.actor, state, j)?;
            if best.map_or(true, |(_, bq)| q > bq) {
                best = Some((j, q));
            }
        }
        best.map(|(j, _)| j).ok_or(AgentError::NoAdmissibleTask)
    }

    /// Bootstrap action for the critic target: the online networks pick
    /// the next task over the full task set, never the target networks.
    fn best_next_task(&self, next_state: &[f64]) -> Result<TaskId, AgentError> {
        self.best_task(next_state, 1..=self.cfg.num_tasks)
    }

    /// One critic regression step on a sampled batch; returns the mean
    /// squared error against the double-estimator targets.
    fn critic_step(&mut self, batch: &[Experience], lr: f64) -> Result<f64, AgentError> {
        let inv_b = 1.0 / batch.len() as f64;
        let mut acc = Gradients::zeros_like(&self.critic);
        let mut loss = 0.0;
        for e in batch {
            let target = if e.terminal {
                e.reward
            } else {
                let next = self.best_next_task(&e.next_state)?;
                let offset = self.propose(&self.target_actor, &e.next_state, next)?;
                let location = self.absolute_location(next, offset);
                let input = self.critic_input(&e.next_state, next, location);
                let (out, _) = self.target_critic.forward(&input)?;
                e.reward + out[0] * self.scale
            };
            let input =
                self.critic_input(&e.state, e.task, self.absolute_location(e.task, e.offset));
            let (out, cache) = self.critic.forward(&input)?;
            let err = out[0] * self.scale - target;
            loss += err * err * inv_b;
            acc.add(&self.critic.backward(&cache, &[2.0 * err * self.scale * inv_b])?);
        }
        nn::adam_step(&mut self.critic, &mut self.critic_opt, &acc, lr)?;
        nn::soft_update(&mut self.target_critic, &self.critic, self.cfg.soft_update)?;
        Ok(loss)
    }

    /// Mean critic value of the actor's own proposals on the batch,
    /// with its gradient in the actor's parameters (ascent direction).
    fn actor_batch_gradients(
        &self,
        batch: &[Experience],
    ) -> Result<(f64, Gradients), AgentError> {
        let inv_b = 1.0 / batch.len() as f64;
        let mut acc = Gradients::zeros_like(&self.actor);
        let mut objective = 0.0;
        for e in batch {
            let (raw, actor_cache) = self.actor.forward(&self.actor_input(&e.state, e.task))?;
            let offset = self.map.offset(&raw);
            let location = self.absolute_location(e.task, offset);
            let input = self.critic_input(&e.state, e.task, location);
            let (out, critic_cache) = self.critic.forward(&input)?;
            objective += out[0] * self.scale * inv_b;

            // Chain dQ/d(location features) through the feasibility map
            // back into the raw actor outputs. Each location feature is
            // the offset coordinate over its normalization scale.
            let critic_grads = self.critic.backward(&critic_cache, &[1.0])?;
            let feat_grad = &critic_grads.d_input[input.len() - self.loc_feat_dim()..];
            let jac = self.map.jacobian(&raw);
            let scales = self.loc_feat_scales();
            let chain = self.scale * inv_b;
            let mut d_raw = vec![0.0; raw.len()];
            for (col, slot) in d_raw.iter_mut().enumerate() {
                for (row, fg) in feat_grad.iter().enumerate() {
                    *slot += fg / scales[row] * jac[row][col];
                }
                *slot *= chain;
            }
            acc.add(&self.actor.backward(&actor_cache, &d_raw)?);
        }
        Ok((objective, acc))
    }

    /// One policy-gradient ascent step; returns the batch objective.
    fn actor_step(&mut self, batch: &[Experience], lr: f64) -> Result<f64, AgentError> {
        let (objective, mut grads) = self.actor_batch_gradients(batch)?;
        grads.scale(-1.0);
        nn::adam_step(&mut self.actor, &mut self.actor_opt, &grads, lr)?;
        nn::soft_update(&mut self.target_actor, &self.actor, self.cfg.soft_update)?;
        Ok(objective)
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }
}

impl Policy for Ca2cAgent {
    fn name(&self) -> &'static str {
        "ca2c"
    }

    fn select(
        &mut self,
        state: &EnvState,
        admissible: &[TaskId],
        explore: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Action, AgentError> {
        if admissible.is_empty() {
            return Err(AgentError::NoAdmissibleTask);
        }
        let feats = env::encode_state(state, &self.cfg, self.uav);
        let task = if explore && rng.gen::<f64>() < self.cfg.exploration {
            admissible[rng.gen_range(0..admissible.len())]
        } else {
            self.best_task(&feats, admissible.iter().copied())?
        };
        let offset = self.propose(&self.actor, &feats, task)?;
        let location = self.absolute_location(task, offset);
        self.pending.arm(feats, (task, offset));
        Ok(Action { task, location })
    }

    fn observe(&mut self, reward: f64, next_state: &EnvState) {
        if let Some(parts) = self.pending.observe(reward, next_state, &self.cfg, self.uav) {
            self.replay.push(Experience {
                state: parts.state,
                task: parts.action.0,
                offset: parts.action.1,
                next_state: parts.next_state,
                reward: parts.reward,
                terminal: parts.terminal,
            });
        }
    }

    fn train_episode(
        &mut self,
        lr: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Option<TrainStats>, AgentError> {
        if self.replay.is_empty() {
            return Ok(None);
        }
        let batch = self.replay.sample(self.cfg.batch_size, rng);
        let critic_loss = self.critic_step(&batch, lr)?;
        let actor_objective = self.actor_step(&batch, lr)?;
        Ok(Some(TrainStats { critic_loss, actor_objective: Some(actor_objective) }))
    }

    fn begin_episode(&mut self, _episode: usize, _rng: &mut dyn RngCore) {
        self.pending.clear();
    }

    fn write_checkpoint(&self, out: &mut dyn Write) -> Result<bool, AgentError> {
        for net in [&self.critic, &self.actor, &self.target_critic, &self.target_actor] {
            nn::save_checkpoint(net, out)?;
        }
        Ok(true)
    }

    fn read_checkpoint(&mut self, input: &mut dyn BufRead) -> Result<(), AgentError> {
        let mut nets = Vec::with_capacity(4);
        for _ in 0..4 {
            nets.push(nn::load_checkpoint(input)?);
        }
        for (loaded, expect) in nets.iter().zip([&self.critic, &self.actor]) {
            if loaded.dims != expect.dims {
                return Err(AgentError::Checkpoint(format!(
                    "layer dims {:?} do not fit this scenario (need {:?})",
                    loaded.dims, expect.dims
                )));
            }
        }
        let mut it = nets.into_iter();
        self.critic = it.next().expect("four nets");
        self.actor = it.next().expect("four nets");
        self.target_critic = it.next().expect("four nets");
        self.target_actor = it.next().expect("four nets");
        if self.target_critic.dims != self.critic.dims
            || self.target_actor.dims != self.actor.dims
        {
            return Err(AgentError::Checkpoint("target network dims mismatch".into()));
        }
        Ok(())
    }
}
