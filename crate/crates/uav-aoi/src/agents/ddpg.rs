//! Deterministic policy gradient agent with a relaxed task head.
//!
//! One actor network emits the whole compound action from the state
//! alone: a score per task (softmaxed into selection probabilities)
//! concatenated with a raw sensing offset. Training-time task choice
//! samples the probabilities restricted to the admissible set;
//! evaluation takes the restricted argmax. The critic scores the state
//! together with the relaxed action vector, which keeps the whole
//! pipeline differentiable: policy gradients flow through the softmax
//! jacobian into the task head and through the feasibility map into the
//! offset head.

use std::io::{BufRead, Write};

use rand::{Rng, RngCore};

use crate::config::ScenarioConfig;
use crate::env::{self, Action, EnvState, TaskId};
use crate::geometry::Vec3;
use crate::nn::{self, AdamState, Gradients, Mlp, OutputActivation};

use super::{
    softmax, value_scale, Accumulator, ActorOutputMap, AgentError, Policy, ReplayBuffer,
    TrainStats,
};

/// Stored transition: the action is the relaxed vector the critic
/// consumes (task probabilities then offset features).
#[derive(Debug, Clone, PartialEq)]
pub struct DdpgExperience {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

pub struct DdpgAgent {
    uav: usize,
    cfg: ScenarioConfig,
    map: ActorOutputMap,
    scale: f64,
    actor: Mlp,
    critic: Mlp,
    target_actor: Mlp,
    target_critic: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
    replay: ReplayBuffer<DdpgExperience>,
    pending: Accumulator<Vec<f64>>,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(uav: usize, cfg: &ScenarioConfig, rng: &mut R) -> Self {
        let map = ActorOutputMap::from_config(cfg);
        let state_len = env::encoded_state_len(cfg);
        let w = cfg.hidden_width;
        let action_len = cfg.num_tasks + map.raw_dim();
        let actor_dims = [state_len, w, w, w, cfg.num_tasks + map.raw_dim()];
        let critic_dims = [state_len + action_len, w, w, w, 1];
        let actor = Mlp::init(&actor_dims, OutputActivation::Identity, rng);
        let critic = Mlp::init(&critic_dims, OutputActivation::Identity, rng);
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let actor_opt = AdamState::new(&actor);
        let critic_opt = AdamState::new(&critic);
        DdpgAgent {
            uav,
            cfg: cfg.clone(),
            map,
            scale: value_scale(cfg),
            actor,
            critic,
            target_actor,
            target_critic,
            actor_opt,
            critic_opt,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            pending: Accumulator::new(),
        }
    }

    /// Per-coordinate divisors that bring a sensing offset into unit
    /// range: the feasible disk radius for x and y, the altitude span
    /// for z when the altitude is free.
    fn loc_feat_scales(&self) -> [f64; 3] {
        let tan = self.cfg.max_sensing_angle_rad.tan();
        if self.map.raw_dim() == 3 {
            let (lo, hi) = self.cfg.altitude_range;
            let r = hi * tan;
            [r, r, (hi - lo).max(f64::EPSILON)]
        } else {
            let r = self.cfg.uav_altitude * tan;
            [r, r, 1.0]
        }
    }

    /// Split raw actor outputs into task probabilities, the mapped
    /// sensing offset, and the relaxed action vector for the critic.
    fn process(&self, raw: &[f64]) -> (Vec<f64>, Vec3, Vec<f64>) {
        let n = self.cfg.num_tasks;
        let probs = softmax(&raw[..n]);
        let offset = self.map.offset(&raw[n..]);
        let mut action = probs.clone();
        let scales = self.loc_feat_scales();
        action.push(offset.x / scales[0]);
        action.push(offset.y / scales[1]);
        if self.map.raw_dim() == 3 {
            action.push((offset.z - self.cfg.altitude_range.0) / scales[2]);
        }
        (probs, offset, action)
    }

    fn critic_input(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(state.len() + action.len());
        v.extend_from_slice(state);
        v.extend_from_slice(action);
        v
    }

    /// Pick a task from probabilities restricted to the admissible set.
    /// Sampling renormalizes over the admissible mass (uniform fallback
    /// when it vanishes); the greedy path takes the restricted argmax
    /// with ties to the lowest id.
    fn pick_task(
        &self,
        probs: &[f64],
        admissible: &[TaskId],
        explore: bool,
        rng: &mut dyn RngCore,
    ) -> TaskId {
        if explore {
            let mass: f64 = admissible.iter().map(|&j| probs[j - 1]).sum();
            let draw = rng.gen::<f64>();
            if mass <= 1e-300 {
                return admissible[(draw * admissible.len() as f64) as usize % admissible.len()];
            }
            let mut acc = 0.0;
            for &j in admissible {
                acc += probs[j - 1] / mass;
                if draw < acc {
                    return j;
                }
            }
            *admissible.last().expect("admissible is non-empty")
        } else {
            let mut best = admissible[0];
            for &j in &admissible[1..] {
                if probs[j - 1] > probs[best - 1] {
                    best = j;
                }
            }
            best
        }
    }

    fn critic_step(&mut self, batch: &[DdpgExperience], lr: f64) -> Result<f64, AgentError> {
        let inv_b = 1.0 / batch.len() as f64;
        let mut acc = Gradients::zeros_like(&self.critic);
        let mut loss = 0.0;
        for e in batch {
            let target = if e.terminal {
                e.reward
            } else {
                let (raw, _) = self.target_actor.forward(&e.next_state)?;
                let (_, _, action) = self.process(&raw);
                let (out, _) =
                    self.target_critic.forward(&self.critic_input(&e.next_state, &action))?;
                e.reward + out[0] * self.scale
            };
            let (out, cache) = self.critic.forward(&self.critic_input(&e.state, &e.action))?;
            let err = out[0] * self.scale - target;
            loss += err * err * inv_b;
            acc.add(&self.critic.backward(&cache, &[2.0 * err * self.scale * inv_b])?);
        }
        nn::adam_step(&mut self.critic, &mut self.critic_opt, &acc, lr)?;
        nn::soft_update(&mut self.target_critic, &self.critic, self.cfg.soft_update)?;
        Ok(loss)
    }

    /// Batch objective (mean critic value of the actor's own actions)
    /// and its ascent gradient in the actor parameters.
    fn actor_batch_gradients(
        &self,
        batch: &[DdpgExperience],
    ) -> Result<(f64, Gradients), AgentError> {
        let n = self.cfg.num_tasks;
        let inv_b = 1.0 / batch.len() as f64;
        let mut acc = Gradients::zeros_like(&self.actor);
        let mut objective = 0.0;
        for e in batch {
            let (raw, actor_cache) = self.actor.forward(&e.state)?;
            let (probs, _, action) = self.process(&raw);
            let input = self.critic_input(&e.state, &action);
            let (out, critic_cache) = self.critic.forward(&input)?;
            objective += out[0] * self.scale * inv_b;

            let critic_grads = self.critic.backward(&critic_cache, &[1.0])?;
            let d_action = &critic_grads.d_input[e.state.len()..];
            let mut d_raw = vec![0.0; raw.len()];
            // Task head: chain through the softmax jacobian.
            let dot: f64 = probs.iter().zip(&d_action[..n]).map(|(p, g)| p * g).sum();
            for j in 0..n {
                d_raw[j] = probs[j] * (d_action[j] - dot);
            }
            // Offset head: features are offset coordinates over their
            // normalization scales; chain through the feasibility map.
            let jac = self.map.jacobian(&raw[n..]);
            let scales = self.loc_feat_scales();
            for col in 0..self.map.raw_dim() {
                let mut g = 0.0;
                for (row, da) in d_action[n..].iter().enumerate() {
                    g += da / scales[row] * jac[row][col];
                }
                d_raw[n + col] = g;
            }
            for v in &mut d_raw {
                *v *= self.scale * inv_b;
            }
            acc.add(&self.actor.backward(&actor_cache, &d_raw)?);
        }
        Ok((objective, acc))
    }

    fn actor_step(&mut self, batch: &[DdpgExperience], lr: f64) -> Result<f64, AgentError> {
        let (objective, mut grads) = self.actor_batch_gradients(batch)?;
        grads.scale(-1.0);
        nn::adam_step(&mut self.actor, &mut self.actor_opt, &grads, lr)?;
        nn::soft_update(&mut self.target_actor, &self.actor, self.cfg.soft_update)?;
        Ok(objective)
    }
}

impl Policy for DdpgAgent {
    fn name(&self) -> &'static str {
        "ddpg"
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
        let (raw, _) = self.actor.forward(&feats)?;
        let (probs, offset, action_vec) = self.process(&raw);
        let task = self.pick_task(&probs, admissible, explore, rng);
        let target = self.cfg.target_of(task);
        let location = Vec3::new(target.x + offset.x, target.y + offset.y, offset.z);
        self.pending.arm(feats, action_vec);
        Ok(Action { task, location })
    }

    fn observe(&mut self, reward: f64, next_state: &EnvState) {
        if let Some(parts) = self.pending.observe(reward, next_state, &self.cfg, self.uav) {
            self.replay.push(DdpgExperience {
                state: parts.state,
                action: parts.action,
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
        let critic = nn::load_checkpoint(input)?;
        let actor = nn::load_checkpoint(input)?;
        let target_critic = nn::load_checkpoint(input)?;
        let target_actor = nn::load_checkpoint(input)?;
        if critic.dims != self.critic.dims || actor.dims != self.actor.dims {
            return Err(AgentError::Checkpoint(format!(
                "layer dims {:?}/{:?} do not fit this scenario",
                critic.dims, actor.dims
            )));
        }
        if target_critic.dims != self.critic.dims || target_actor.dims != self.actor.dims {
            return Err(AgentError::Checkpoint("target network dims mismatch".into()));
        }
        self.critic = critic;
        self.actor = actor;
        self.target_critic = target_critic;
        self.target_actor = target_actor;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TaskSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn test_cfg() -> ScenarioConfig {
        ScenarioConfig {
            num_uavs: 2,
            num_tasks: 3,
            task_targets: vec![
                TaskSpec { id: 1, target: Vec3::ground(100.0, 0.0) },
                TaskSpec { id: 2, target: Vec3::ground(0.0, 100.0) },
                TaskSpec { id: 3, target: Vec3::ground(-80.0, -60.0) },
            ],
            cell_radius: 200.0,
            episode_cycles: 40,
            hidden_width: 16,
            batch_size: 8,
            replay_capacity: 1000,
            ..ScenarioConfig::default()
        }
    }

    fn agent(seed: u64) -> DdpgAgent {
        let cfg = test_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        DdpgAgent::new(0, &cfg, &mut rng)
    }

    fn crafted_batch(cfg: &ScenarioConfig, n: usize, seed: u64) -> Vec<DdpgExperience> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let state_len = env::encoded_state_len(cfg);
        let map = ActorOutputMap::from_config(cfg);
        (0..n)
            .map(|_| {
                let raw: Vec<f64> =
                    (0..cfg.num_tasks + map.raw_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let probs = softmax(&raw[..cfg.num_tasks]);
                let offset = map.offset(&raw[cfg.num_tasks..]);
                let mut action = probs;
                action.push(offset.x / cfg.cell_radius);
                action.push(offset.y / cfg.cell_radius);
                DdpgExperience {
                    state: (0..state_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    action,
                    next_state: (0..state_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    reward: rng.gen_range(0.0..500.0),
                    terminal: false,
                }
            })
            .collect()
    }

    #[test]
    fn actor_emits_task_scores_plus_offset() {
        let a = agent(1);
        assert_eq!(a.actor.dims, vec![20, 16, 16, 16, 5]);
        assert_eq!(a.critic.dims, vec![25, 16, 16, 16, 1]);
        let state = env::initial_state(&a.cfg);
        let feats = env::encode_state(&state, &a.cfg, 0);
        let (raw, _) = a.actor.forward(&feats).unwrap();
        let (probs, _, action) = a.process(&raw);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(action.len(), 5);
    }

    #[test]
    fn emitted_locations_stay_feasible() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut a = agent(3);
        let state = env::initial_state(&a.cfg);
        for explore in [false, true] {
            for _ in 0..20 {
                let act = a.select(&state, &[1, 2, 3], explore, &mut rng).unwrap();
                let target = a.cfg.target_of(act.task);
                let horiz = ((act.location.x - target.x).powi(2)
                    + (act.location.y - target.y).powi(2))
                .sqrt();
                let radius = act.location.z * a.map.tan_angle;
                assert!(horiz <= radius * (1.0 + 1e-12));
                assert_eq!(act.location.z, a.cfg.uav_altitude);
            }
        }
    }

    #[test]
    fn sampling_respects_the_admissible_set() {
        let mut a = agent(4);
        // Concentrate the task head on task 1, then exclude it.
        let last = a.actor.num_layers() - 1;
        a.actor.biases[last][0] = 50.0;
        let state = env::initial_state(&a.cfg);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let act = a.select(&state, &[2, 3], true, &mut rng).unwrap();
            assert!(act.task == 2 || act.task == 3);
        }
        // Greedy restricted argmax also avoids the excluded task.
        let act = a.select(&state, &[2, 3], false, &mut rng).unwrap();
        assert!(act.task == 2 || act.task == 3);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let mut a = agent(6);
        let state = env::initial_state(&a.cfg);
        let mut r1 = ChaCha12Rng::seed_from_u64(7);
        let mut r2 = ChaCha12Rng::seed_from_u64(8);
        let x = a.select(&state, &[1, 2, 3], false, &mut r1).unwrap();
        let y = a.select(&state, &[1, 2, 3], false, &mut r2).unwrap();
        assert_eq!(x, y, "greedy path must not consume randomness");
    }

    #[test]
    fn terminal_critic_loss_matches_independent_recomputation() {
        let mut a = agent(9);
        let mut batch = crafted_batch(&a.cfg, 4, 10);
        for e in &mut batch {
            e.terminal = true;
        }
        let frozen = a.critic.clone();
        let mut expected = 0.0;
        for e in &batch {
            let (out, _) = frozen.forward(&a.critic_input(&e.state, &e.action)).unwrap();
            let err = out[0] * a.scale - e.reward;
            expected += err * err / batch.len() as f64;
        }
        let loss = a.critic_step(&batch, 1e-3).unwrap();
        assert!((loss - expected).abs() <= 1e-10 * expected.abs().max(1.0));
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let a = agent(11);
        let batch = crafted_batch(&a.cfg, 3, 12);
        let (_, grads) = a.actor_batch_gradients(&batch).unwrap();

        let h = 1e-5;
        let mut checked = 0;
        for layer in 0..a.actor.num_layers() {
            let len = a.actor.weights[layer].len();
            for idx in [1, len / 2, len - 2] {
                let mut up = agent(11);
                up.actor.weights[layer][idx] += h;
                let mut down = agent(11);
                down.actor.weights[layer][idx] -= h;
                let ju = up.actor_batch_gradients(&batch).unwrap().0;
                let jd = down.actor_batch_gradients(&batch).unwrap().0;
                let numeric = (ju - jd) / (2.0 * h);
                let analytic = grads.d_weights[layer][idx];
                let scale = analytic.abs().max(numeric.abs());
                if scale < 1e-10 {
                    continue;
                }
                assert!(
                    (analytic - numeric).abs() / scale < 1e-3,
                    "layer {layer} idx {idx}: analytic {analytic} vs numeric {numeric}"
                );
                checked += 1;
            }
        }
        assert!(checked >= 6, "finite-difference check barely ran");
    }

    #[test]
    fn training_is_deterministic_and_checkpoints_round_trip() {
        let run = || {
            let mut a = agent(13);
            for e in crafted_batch(&a.cfg, 6, 14) {
                a.replay.push(e);
            }
            let mut rng = ChaCha12Rng::seed_from_u64(15);
            let stats = a.train_episode(0.01, &mut rng).unwrap().unwrap();
            (stats, a.critic.weights[0][0], a.actor.weights[0][0])
        };
        assert_eq!(run(), run());

        let mut a = agent(13);
        for e in crafted_batch(&a.cfg, 6, 14) {
            a.replay.push(e);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        a.train_episode(0.01, &mut rng).unwrap();
        let mut buf = Vec::new();
        assert!(a.write_checkpoint(&mut buf).unwrap());
        let mut restored = agent(999);
        restored.read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(restored.critic, a.critic);
        assert_eq!(restored.actor, a.actor);
        assert_eq!(restored.target_actor, a.target_actor);
    }
}
