//! Deep Q-network agent over the task set only.
//!
//! The network maps the encoded state to one value per task; the
//! sensing location is not learned and sits directly above the chosen
//! task's target at the nominal flight altitude. Targets use the double
//! estimator: the online network picks the bootstrap task, the target
//! network prices it. Shares the decision-boundary experience
//! accounting with the actor-critic agent.

use std::io::{BufRead, Write};

use rand::{Rng, RngCore};

use crate::config::ScenarioConfig;
use crate::env::{self, Action, EnvState, TaskId};
use crate::geometry::Vec3;
use crate::nn::{self, AdamState, Gradients, Mlp, OutputActivation};

use super::{value_scale, Accumulator, AgentError, Experience, Policy, ReplayBuffer, TrainStats};

pub struct DqnAgent {
    uav: usize,
    cfg: ScenarioConfig,
    scale: f64,
    net: Mlp,
    target: Mlp,
    opt: AdamState,
    replay: ReplayBuffer<Experience>,
    pending: Accumulator<(TaskId, Vec3)>,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(uav: usize, cfg: &ScenarioConfig, rng: &mut R) -> Self {
        let state_len = env::encoded_state_len(cfg);
        let w = cfg.hidden_width;
        let dims = [state_len, w, w, w, cfg.num_tasks];
        let net = Mlp::init(&dims, OutputActivation::Identity, rng);
        let target = net.clone();
        let opt = AdamState::new(&net);
        DqnAgent {
            uav,
            cfg: cfg.clone(),
            scale: value_scale(cfg),
            net,
            target,
            opt,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            pending: Accumulator::new(),
        }
    }

    /// Scaled value of every task in the given encoded state.
    fn values(&self, net: &Mlp, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        let (out, _) = net.forward(state)?;
        Ok(out.iter().map(|v| v * self.scale).collect())
    }

    /// Fixed sensing location for a task: right above its target.
    fn location_for(&self, task: TaskId) -> Vec3 {
        let target = self.cfg.target_of(task);
        Vec3::new(target.x, target.y, self.cfg.uav_altitude)
    }

    /// Argmax over `tasks` by online values, ties to the lowest id.
    fn best_task(&self, state: &[f64], tasks: &[TaskId]) -> Result<TaskId, AgentError> {
        let values = self.values(&self.net, state)?;
        let mut best: Option<(TaskId, f64)> = None;
        for &j in tasks {
            let q = values[j - 1];
            if best.map_or(true, |(_, bq)| q > bq) {
                best = Some((j, q));
            }
        }
        best.map(|(j, _)| j).ok_or(AgentError::NoAdmissibleTask)
    }

    /// Bootstrap task index for the critic target: online argmax over
    /// the full task set.
    fn best_next(&self, next_state: &[f64]) -> Result<usize, AgentError> {
        let values = self.values(&self.net, next_state)?;
        let mut best = 0;
        for (j, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = j;
            }
        }
        Ok(best)
    }

    fn train_step(&mut self, batch: &[Experience], lr: f64) -> Result<f64, AgentError> {
        let inv_b = 1.0 / batch.len() as f64;
        let mut acc = Gradients::zeros_like(&self.net);
        let mut loss = 0.0;
        for e in batch {
            let target = if e.terminal {
                e.reward
            } else {
                let pick = self.best_next(&e.next_state)?;
                let (out, _) = self.target.forward(&e.next_state)?;
                e.reward + out[pick] * self.scale
            };
            let (out, cache) = self.net.forward(&e.state)?;
            let err = out[e.task - 1] * self.scale - target;
            loss += err * err * inv_b;
            let mut d_out = vec![0.0; self.cfg.num_tasks];
            d_out[e.task - 1] = 2.0 * err * self.scale * inv_b;
            acc.add(&self.net.backward(&cache, &d_out)?);
        }
        nn::adam_step(&mut self.net, &mut self.opt, &acc, lr)?;
        nn::soft_update(&mut self.target, &self.net, self.cfg.soft_update)?;
        Ok(loss)
    }
}

impl Policy for DqnAgent {
    fn name(&self) -> &'static str {
        "dqn"
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
            self.best_task(&feats, admissible)?
        };
        let location = self.location_for(task);
        let offset = Vec3::new(0.0, 0.0, location.z);
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
        let loss = self.train_step(&batch, lr)?;
        Ok(Some(TrainStats { critic_loss: loss, actor_objective: None }))
    }

    fn begin_episode(&mut self, _episode: usize, _rng: &mut dyn RngCore) {
        self.pending.clear();
    }

    fn write_checkpoint(&self, out: &mut dyn Write) -> Result<bool, AgentError> {
        nn::save_checkpoint(&self.net, out)?;
        nn::save_checkpoint(&self.target, out)?;
        Ok(true)
    }

    fn read_checkpoint(&mut self, input: &mut dyn BufRead) -> Result<(), AgentError> {
        let net = nn::load_checkpoint(input)?;
        let target = nn::load_checkpoint(input)?;
        if net.dims != self.net.dims || target.dims != self.net.dims {
            return Err(AgentError::Checkpoint(format!(
                "layer dims {:?} do not fit this scenario (need {:?})",
                net.dims, self.net.dims
            )));
        }
        self.net = net;
        self.target = target;
        Ok(())
    }
}
