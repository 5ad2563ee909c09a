use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Checkpoint, MetricsRow, MetricsWriter, Network, TrainConfig, TrainError, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use crate::demos::{env_digest, sensor_digest, DemoDataset, ExpertBatch};
use crate::imitation::{bc_objective, BcLossMode, Discriminator};
use crate::neural::{adam_step, forward_logits, gradient, lr_at, softmax_rows, MlpSpec, OutputHead, Schedule};
use crate::ppo::{
    compute_advantages, normalize, policy_loss, sample_index, value_loss, AdvantageConfig, RolloutBuffer, Transition,
    CHANNELS,
};
use crate::sense::ObservationSpec;
use crate::sim::{spawn_episode, step_in_place, ActionId, EnvConfig, WorldState};

pub const VALUE_COEF: f64 = 0.5;
/// Finished agent-episodes in the rolling reward/length/success window.
const WINDOW: usize = 100;

/// Fixed divisor per reward channel between returns and critic outputs, so
/// the critic regresses targets of order one.
pub fn value_scale(env: &EnvConfig) -> [f64; CHANNELS] {
    [(env.r_f / 10.0).max(1.0), 10.0]
}

/// Gradient of `bc_strength * L_BC` with respect to the actor parameters,
/// together with the unweighted loss.
pub fn bc_gradient(
    actor: &Network,
    batch: &ExpertBatch,
    mode: BcLossMode,
    strength: f64,
) -> Result<(f64, Vec<f64>), TrainError> {
    let n = ActionId::COUNT;
    let (loss, mut grad) = gradient(&actor.spec, &actor.params, &batch.observations, |z| bc_objective(z, n, &batch.actions, mode, 1.0))?;
    for g in &mut grad {
        *g *= strength;
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePhase {
    /// Supervised warm-up on demonstrations.
    Bc,
    /// PPO on extrinsic (+ GAIL) advantages.
    Rl,
}

/// Loss components of one update, averaged over its minibatches.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub bc_loss: f64,
    pub disc_loss: f64,
    pub gail_reward_mean: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy)]
struct EpisodeStat {
    ret: f64,
    len: u64,
    success: bool,
}

struct Slot {
    world: WorldState,
    returns: Vec<f64>,
    lengths: Vec<u64>,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<MetricsRow>,
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Mutable state of one training run.
pub struct Trainer {
    pub config: TrainConfig,
    pub observation: ObservationSpec,
    pub actor: Network,
    pub critic: Network,
    pub discriminator: Option<Discriminator>,
    pub step: u64,
    demos: Option<DemoDataset>,
    slots: Vec<Slot>,
    buffer: RolloutBuffer,
    window: VecDeque<EpisodeStat>,
    episode_rng: ChaCha8Rng,
    action_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    scale: [f64; CHANNELS],
}

impl Trainer {
    pub fn new(config: TrainConfig, demos: Option<DemoDataset>) -> Result<Self, TrainError> {
        config.validate()?;
        let observation = config.observation();
        let obs_dim = observation.dim();
        if config.needs_demos() {
            let d = demos.as_ref().ok_or(TrainError::MissingDemos)?;
            if d.obs_dim != obs_dim || d.is_empty() {
                return Err(TrainError::Config(format!(
                    "demonstrations have obs_dim {} and {} pairs; run needs obs_dim {obs_dim}",
                    d.obs_dim,
                    d.len()
                )));
            }
        }
        let mut init = rng_stream(config.seed, 0);
        let mut actor_spec = MlpSpec::new(obs_dim, config.hidden_units, config.num_layers, ActionId::COUNT, OutputHead::Softmax);
        actor_spec.hidden_activation = config.activation;
        let mut critic_spec = MlpSpec::new(obs_dim, config.hidden_units, config.num_layers, CHANNELS, OutputHead::Linear);
        critic_spec.hidden_activation = config.activation;
        let mut actor = Network::new(actor_spec, init.gen());
        actor.params.scale_output_layer(0.01);
        let critic = Network::new(critic_spec, init.gen());
        let disc_seed: u64 = init.gen();
        let discriminator = config
            .use_gail
            .then(|| Discriminator::new(obs_dim, ActionId::COUNT, config.disc_hidden_units, config.disc_num_layers, disc_seed));
        let mut episode_rng = rng_stream(config.seed, 1);
        let n = config.env.n_uavs;
        let slots = (0..config.n_envs)
            .map(|_| {
                Ok(Slot { world: spawn_episode(&config.env, episode_rng.gen())?, returns: vec![0.0; n], lengths: vec![0; n] })
            })
            .collect::<Result<Vec<_>, TrainError>>()?;
        let buffer = RolloutBuffer::new(config.buffer_size, config.n_envs * n);
        let scale = value_scale(&config.env);
        Ok(Self {
            observation,
            actor,
            critic,
            discriminator,
            step: 0,
            demos,
            slots,
            buffer,
            window: VecDeque::new(),
            episode_rng,
            action_rng: rng_stream(config.seed, 2),
            update_rng: rng_stream(config.seed, 3),
            scale,
            config,
        })
    }

    pub fn buffer(&self) -> &RolloutBuffer {
        &self.buffer
    }

    pub fn phase(&self, step: u64) -> UpdatePhase {
        if self.config.use_bc && step < self.config.steps_bc {
            UpdatePhase::Bc
        } else {
            UpdatePhase::Rl
        }
    }

    fn critic_values(&self, rows: &[f64]) -> Result<Vec<f64>, TrainError> {
        let mut v = forward_logits(&self.critic.spec, &self.critic.params, rows)?;
        for (i, x) in v.iter_mut().enumerate() {
            *x *= self.scale[i % CHANNELS];
        }
        Ok(v)
    }

    /// Step every environment until the buffer holds `buffer_size`
    /// transitions.
    pub fn collect(&mut self) -> Result<(), TrainError> {
        let env = self.config.env.clone();
        let n = env.n_uavs;
        let obs_dim = self.observation.dim();
        while !self.buffer.is_full() {
            let mut who = Vec::new();
            let mut rows = Vec::new();
            for (e, slot) in self.slots.iter().enumerate() {
                for id in slot.world.alive_ids() {
                    who.push((e, id));
                    rows.extend(self.observation.encode(&slot.world, id, &env));
                }
            }
            let logits = forward_logits(&self.actor.spec, &self.actor.params, &rows)?;
            let values = self.critic_values(&rows)?;
            let mut actions = vec![vec![ActionId::Fwd; n]; self.slots.len()];
            let mut picked = Vec::with_capacity(who.len());
            for (k, &(e, id)) in who.iter().enumerate() {
                let (a, lp) = sample_index(&logits[k * ActionId::COUNT..(k + 1) * ActionId::COUNT], &mut self.action_rng);
                let a = ActionId::from_index(a).unwrap_or(ActionId::Fwd);
                actions[e][id] = a;
                picked.push((a, lp));
            }
            let mut reports = Vec::with_capacity(self.slots.len());
            for (slot, acts) in self.slots.iter_mut().zip(&actions) {
                reports.push(step_in_place(&mut slot.world, acts, &env)?);
            }
            for (k, &(e, id)) in who.iter().enumerate() {
                let rep = &reports[e];
                let (r, done) = (rep.rewards[id], rep.dones[id]);
                let slot = &mut self.slots[e];
                slot.returns[id] += r;
                slot.lengths[id] += 1;
                if done {
                    let success = slot.world.uavs[id].outcome.is_some_and(|o| o.is_success());
                    self.window.push_back(EpisodeStat { ret: slot.returns[id], len: slot.lengths[id], success });
                    if self.window.len() > WINDOW {
                        self.window.pop_front();
                    }
                    slot.returns[id] = 0.0;
                    slot.lengths[id] = 0;
                }
                self.buffer.push(
                    e * n + id,
                    Transition {
                        observation: rows[k * obs_dim..(k + 1) * obs_dim].to_vec(),
                        action: picked[k].0,
                        log_prob_old: picked[k].1,
                        value_old: [values[k * CHANNELS], values[k * CHANNELS + 1]],
                        reward_extrinsic: r,
                        reward_gail: 0.0,
                        done,
                        agent_id: id,
                    },
                );
            }
            self.step += who.len() as u64;
            for slot in &mut self.slots {
                if slot.world.all_done() {
                    slot.world = spawn_episode(&env, self.episode_rng.gen())?;
                }
            }
        }
        // Streams cut mid-episode bootstrap from the critic.
        let mut cut = Vec::new();
        let mut rows = Vec::new();
        for (s, stream) in self.buffer.streams().iter().enumerate() {
            if stream.transitions.last().is_some_and(|t| !t.done) {
                let (e, id) = (s / n, s % n);
                cut.push(s);
                rows.extend(self.observation.encode(&self.slots[e].world, id, &env));
            }
        }
        if !cut.is_empty() {
            let v = self.critic_values(&rows)?;
            for (k, &s) in cut.iter().enumerate() {
                self.buffer.set_bootstrap(s, [v[k * CHANNELS], v[k * CHANNELS + 1]]);
            }
        }
        Ok(())
    }

    /// One policy update on the full buffer, then clear it. `start_step` is
    /// the step count at which the buffer started filling; it selects the
    /// phase and the learning rate.
    pub fn update(&mut self, start_step: u64) -> Result<UpdateStats, TrainError> {
        let cfg = self.config.clone();
        let phase = self.phase(start_step);
        let gail = cfg.use_gail && phase == UpdatePhase::Rl;
        let lr = lr_at(start_step, cfg.total_steps, cfg.learning_rate, cfg.learning_rate_schedule);
        let beta = match cfg.beta_schedule {
            Schedule::Constant => cfg.beta,
            Schedule::Linear => cfg.beta * (1.0 - (start_step as f64 / cfg.total_steps.max(1) as f64).min(1.0)),
        };
        let nact = ActionId::COUNT;
        let obs_dim = self.observation.dim();
        let observations: Vec<f64> = self.buffer.transitions().flat_map(|t| t.observation.iter().copied()).collect();
        let actions: Vec<usize> = self.buffer.transitions().map(|t| t.action.index()).collect();
        let total = actions.len();
        let mut stats = UpdateStats { lr, ..Default::default() };

        if gail {
            let disc = self.discriminator.as_ref().expect("discriminator exists when use_gail");
            let rewards = disc.rewards(&observations, &actions)?;
            stats.gail_reward_mean = rewards.iter().sum::<f64>() / total as f64;
            for (t, r) in self.buffer.transitions_mut().zip(rewards) {
                t.reward_gail = r;
            }
        }
        let adv_cfg = AdvantageConfig {
            gamma: [cfg.extrinsic_gamma, cfg.gail_gamma],
            lambda: cfg.lambda,
            strength: [cfg.extrinsic_strength, if gail { cfg.gail_strength } else { 0.0 }],
            mode: cfg.advantage_mode,
        };
        let set = compute_advantages(&self.buffer, &adv_cfg);
        let old_lp: Vec<f64> = self.buffer.transitions().map(|t| t.log_prob_old).collect();
        let targets: Vec<[f64; CHANNELS]> =
            (0..total).map(|i| [set.returns[0][i] / self.scale[0], set.returns[1][i] / self.scale[1]]).collect();

        let ppo_active = phase == UpdatePhase::Rl || cfg.bc_phase_ppo;
        let mut batches = 0usize;
        let mut idx: Vec<usize> = (0..total).collect();
        for _ in 0..cfg.num_epoch {
            idx.shuffle(&mut self.update_rng);
            for chunk in idx.chunks(cfg.batch_size) {
                batches += 1;
                let obs: Vec<f64> = chunk.iter().flat_map(|&i| observations[i * obs_dim..(i + 1) * obs_dim].iter().copied()).collect();
                let tg: Vec<[f64; CHANNELS]> = chunk.iter().map(|&i| targets[i]).collect();
                let (vl, vgrad) = gradient(&self.critic.spec, &self.critic.params, &obs, |v| value_loss(v, &tg, VALUE_COEF))?;
                adam_step(&mut self.critic.params, &vgrad, &mut self.critic.optimizer, lr)?;
                stats.value_loss += vl / VALUE_COEF;

                let mut actor_grad: Option<Vec<f64>> = None;
                if ppo_active {
                    let acts: Vec<usize> = chunk.iter().map(|&i| actions[i]).collect();
                    let lps: Vec<f64> = chunk.iter().map(|&i| old_lp[i]).collect();
                    let adv = normalize(&chunk.iter().map(|&i| set.combined[i]).collect::<Vec<_>>());
                    let mut entropy = 0.0;
                    let (pl, g) = gradient(&self.actor.spec, &self.actor.params, &obs, |z| {
                        let (l, d, parts) = policy_loss(z, nact, &lps, &acts, &adv, cfg.epsilon, beta);
                        entropy = parts.entropy;
                        (l, d)
                    })?;
                    stats.policy_loss += pl;
                    stats.entropy += entropy;
                    actor_grad = Some(g);
                } else {
                    let probs = softmax_rows(&forward_logits(&self.actor.spec, &self.actor.params, &obs)?, nact);
                    stats.entropy += -probs.iter().map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>() / chunk.len() as f64;
                }
                if phase == UpdatePhase::Bc {
                    let demos = self.demos.as_ref().ok_or(TrainError::MissingDemos)?;
                    let batch = demos.sample(chunk.len(), &mut self.update_rng);
                    let (bl, g) = bc_gradient(&self.actor, &batch, cfg.bc_loss_mode, cfg.bc_strength)?;
                    stats.bc_loss += bl;
                    actor_grad = Some(match actor_grad {
                        Some(mut a) => {
                            a.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
                            a
                        }
                        None => g,
                    });
                }
                if let Some(g) = actor_grad {
                    adam_step(&mut self.actor.params, &g, &mut self.actor.optimizer, lr)?;
                }
            }
            if gail {
                let demos = self.demos.as_ref().ok_or(TrainError::MissingDemos)?;
                let expert = demos.sample(total, &mut self.update_rng);
                let disc = self.discriminator.as_mut().expect("discriminator exists when use_gail");
                stats.disc_loss = disc.update(&observations, &actions, &expert.observations, &expert.actions, lr)?;
            }
        }
        let b = batches.max(1) as f64;
        stats.policy_loss /= b;
        stats.value_loss /= b;
        stats.entropy /= b;
        stats.bc_loss /= b;
        self.buffer.clear();
        let named = [
            ("policy loss", stats.policy_loss),
            ("value loss", stats.value_loss),
            ("entropy", stats.entropy),
            ("bc loss", stats.bc_loss),
            ("discriminator loss", stats.disc_loss),
            ("gail reward", stats.gail_reward_mean),
        ];
        if let Some((what, _)) = named.iter().find(|(_, v)| !v.is_finite()) {
            return Err(TrainError::NonFinite { what, step: self.step });
        }
        Ok(stats)
    }

    pub fn metrics_row(&self, stats: &UpdateStats) -> MetricsRow {
        let n = self.window.len();
        let (mut ret, mut len, mut wins) = (0.0, 0.0, 0.0);
        for e in &self.window {
            ret += e.ret;
            len += e.len as f64;
            wins += if e.success { 1.0 } else { 0.0 };
        }
        let d = n.max(1) as f64;
        MetricsRow {
            step: self.step,
            mean_reward: ret / d,
            mean_episode_length: len / d,
            success_rate: wins / d,
            ppo_policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            bc_loss: stats.bc_loss,
            gail_disc_loss: stats.disc_loss,
            gail_reward_mean: stats.gail_reward_mean,
            lr: stats.lr,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.to_text(),
            sensor_digest: sensor_digest(&self.observation),
            env_digest: env_digest(&self.config.env),
            step: self.step,
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            discriminator: self.discriminator.clone(),
        }
    }

    /// Collect and update until `total_steps`. Metrics are appended after
    /// every update and checkpoints written every `eval_interval` steps and
    /// at the end when `out_dir` is given. A non-finite loss aborts the run
    /// and leaves the last checkpoint in place.
    pub fn run(&mut self, out_dir: Option<&Path>) -> Result<TrainOutcome, TrainError> {
        let mut writer = match out_dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                Some(MetricsWriter::create(&d.join("metrics.csv"))?)
            }
            None => None,
        };
        let ck_path: Option<PathBuf> = out_dir.map(|d| d.join("checkpoint.json"));
        let mut metrics = Vec::new();
        let mut next_ck = self.config.eval_interval;
        while self.step < self.config.total_steps {
            let start = self.step;
            self.collect()?;
            let stats = self.update(start)?;
            let row = self.metrics_row(&stats);
            if let Some(w) = writer.as_mut() {
                w.write(&row)?;
            }
            info!(
                "step {} reward {:.1} success {:.2} policy {:.4} value {:.4} bc {:.4} disc {:.4}",
                row.step, row.mean_reward, row.success_rate, row.ppo_policy_loss, row.value_loss, row.bc_loss, row.gail_disc_loss
            );
            metrics.push(row);
            if self.step >= next_ck {
                if let Some(p) = &ck_path {
                    self.checkpoint().save(p)?;
                }
                while next_ck <= self.step {
                    next_ck += self.config.eval_interval;
                }
            }
        }
        let checkpoint = self.checkpoint();
        if let Some(p) = &ck_path {
            checkpoint.save(p)?;
        }
        Ok(TrainOutcome { checkpoint, metrics })
    }
}

/// Train from scratch; see [`Trainer::run`].
pub fn train(config: &TrainConfig, demos: Option<DemoDataset>, out_dir: Option<&Path>) -> Result<TrainOutcome, TrainError> {
    Trainer::new(config.clone(), demos)?.run(out_dir)
}
