use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, TrainConfig, TrainError};
use crate::demos::scripted_expert;
use crate::neural::{forward_logits, MlpSpec, ParamVector};
use crate::ppo::argmax_action;
use crate::sense::{ObservationSpec, SensorConfig};
use crate::sim::{spawn_episode, step_in_place, ActionId, EnvConfig, Outcome, WorldState};

/// Anything that can fly a UAV.
pub trait Policy {
    fn act(&mut self, world: &WorldState, agent_id: usize, env: &EnvConfig) -> ActionId;
}

/// Greedy (argmax) actor network.
#[derive(Debug, Clone)]
pub struct ActorPolicy {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub observation: ObservationSpec,
}

impl ActorPolicy {
    pub fn from_checkpoint(ck: &Checkpoint, observation: ObservationSpec) -> Self {
        Self { spec: ck.actor.spec, params: ck.actor.params.clone(), observation }
    }
}

impl Policy for ActorPolicy {
    fn act(&mut self, world: &WorldState, agent_id: usize, env: &EnvConfig) -> ActionId {
        let obs = self.observation.encode(world, agent_id, env);
        match forward_logits(&self.spec, &self.params, &obs) {
            Ok(logits) => argmax_action(&logits),
            Err(_) => ActionId::Fwd,
        }
    }
}

pub struct ScriptedPolicy {
    pub sensor: SensorConfig,
}

impl Policy for ScriptedPolicy {
    fn act(&mut self, world: &WorldState, agent_id: usize, _env: &EnvConfig) -> ActionId {
        scripted_expert(world, agent_id, &self.sensor)
    }
}

/// Uniform over the three actions.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _world: &WorldState, _agent_id: usize, _env: &EnvConfig) -> ActionId {
        ActionId::ALL[self.rng.gen_range(0..ActionId::COUNT)]
    }
}

/// Outcome counts for one UAV id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgentTally {
    pub reached_own_goal: u64,
    pub reached_other_goal: u64,
    pub hit_uav: u64,
    pub hit_obstacle: u64,
    pub hit_wall: u64,
    pub timeout: u64,
}

impl AgentTally {
    fn record(&mut self, o: Outcome) {
        match o {
            Outcome::ReachedOwnGoal => self.reached_own_goal += 1,
            Outcome::ReachedOtherGoal => self.reached_other_goal += 1,
            Outcome::HitUav => self.hit_uav += 1,
            Outcome::HitObstacle => self.hit_obstacle += 1,
            Outcome::HitWall => self.hit_wall += 1,
            Outcome::Timeout => self.timeout += 1,
        }
    }

    fn add(&mut self, o: &AgentTally) {
        self.reached_own_goal += o.reached_own_goal;
        self.reached_other_goal += o.reached_other_goal;
        self.hit_uav += o.hit_uav;
        self.hit_obstacle += o.hit_obstacle;
        self.hit_wall += o.hit_wall;
        self.timeout += o.timeout;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: u64,
    pub per_agent: Vec<AgentTally>,
    /// Episodes in which every UAV reached its own goal.
    pub all_reached: u64,
    /// Sum over episodes of ticks until the last UAV finished.
    pub total_length: u64,
}

pub const EVAL_HEADER: &str = "agent,episodes,success_rate,reached_other_goal,hit_uav,hit_obstacle,hit_wall,timeout,mean_episode_length";

fn pct(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

impl EvalReport {
    pub fn agent_success_rate(&self, id: usize) -> f64 {
        pct(self.per_agent[id].reached_own_goal, self.episodes) / 100.0
    }

    /// Fraction of episodes in which all UAVs succeeded.
    pub fn success_rate(&self) -> f64 {
        pct(self.all_reached, self.episodes) / 100.0
    }

    pub fn mean_episode_length(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.total_length as f64 / self.episodes as f64
        }
    }

    /// Collision and timeout counts summed over agents.
    pub fn totals(&self) -> AgentTally {
        let mut t = AgentTally::default();
        for a in &self.per_agent {
            t.add(a);
        }
        t
    }

    /// Aligned plain-text table, one line per agent plus an aggregate line.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6} {:>8} {:>8} {:>10} {:>8} {:>12} {:>8} {:>8} {:>10}",
            "agent", "episodes", "success", "other_goal", "hit_uav", "hit_obstacle", "hit_wall", "timeout", "mean_len"
        );
        let line = |s: &mut String, name: String, rate: f64, t: &AgentTally| {
            let _ = writeln!(
                s,
                "{:<6} {:>8} {:>7.1}% {:>10} {:>8} {:>12} {:>8} {:>8} {:>10.1}",
                name,
                self.episodes,
                rate,
                t.reached_other_goal,
                t.hit_uav,
                t.hit_obstacle,
                t.hit_wall,
                t.timeout,
                self.mean_episode_length()
            );
        };
        for (i, t) in self.per_agent.iter().enumerate() {
            line(&mut s, format!("uav{}", i + 1), pct(t.reached_own_goal, self.episodes), t);
        }
        line(&mut s, "all".into(), pct(self.all_reached, self.episodes), &self.totals());
        s
    }

    /// Comma-separated rows under [`EVAL_HEADER`].
    pub fn to_rows(&self) -> String {
        let mut s = format!("{EVAL_HEADER}\n");
        let row = |s: &mut String, name: String, rate: f64, t: &AgentTally| {
            let _ = writeln!(
                s,
                "{name},{},{rate:?},{},{},{},{},{},{:?}",
                self.episodes,
                t.reached_other_goal,
                t.hit_uav,
                t.hit_obstacle,
                t.hit_wall,
                t.timeout,
                self.mean_episode_length()
            );
        };
        for (i, t) in self.per_agent.iter().enumerate() {
            row(&mut s, format!("uav{}", i + 1), self.agent_success_rate(i), t);
        }
        row(&mut s, "all".into(), self.success_rate(), &self.totals());
        s
    }
}

/// Seed of the `i`-th evaluation episode.
pub fn episode_seeds(seed: u64, n: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xE7A1);
    (0..n).map(|_| rng.gen()).collect()
}

/// Run `n_episodes` freshly seeded episodes with every UAV flown by `policy`.
pub fn evaluate_policy(policy: &mut dyn Policy, env: &EnvConfig, n_episodes: u64, seed: u64) -> Result<EvalReport, TrainError> {
    let mut report =
        EvalReport { episodes: n_episodes, per_agent: vec![AgentTally::default(); env.n_uavs], all_reached: 0, total_length: 0 };
    for s in episode_seeds(seed, n_episodes) {
        let mut world = spawn_episode(env, s)?;
        let mut actions = vec![ActionId::Fwd; world.uavs.len()];
        while !world.all_done() {
            for (id, a) in actions.iter_mut().enumerate() {
                *a = if world.uavs[id].alive { policy.act(&world, id, env) } else { ActionId::Fwd };
            }
            step_in_place(&mut world, &actions, env)?;
        }
        report.total_length += world.tick;
        let mut all = true;
        for (id, u) in world.uavs.iter().enumerate() {
            let o = u.outcome.unwrap_or(Outcome::Timeout);
            report.per_agent[id].record(o);
            all &= o.is_success();
        }
        if all {
            report.all_reached += 1;
        }
    }
    Ok(report)
}

/// Greedy evaluation of a checkpoint under `config` (the checkpoint's own
/// config when `None`).
pub fn evaluate(ck: &Checkpoint, config: Option<&TrainConfig>, n_episodes: u64, seed: u64) -> Result<EvalReport, TrainError> {
    let own;
    let config = match config {
        Some(c) => {
            ck.check_compatible(c)?;
            c
        }
        None => {
            own = ck.train_config()?;
            &own
        }
    };
    let mut policy = ActorPolicy::from_checkpoint(ck, config.observation());
    evaluate_policy(&mut policy, &config.env, n_episodes, seed)
}
