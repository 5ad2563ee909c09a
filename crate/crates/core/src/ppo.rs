//! Rollout storage, advantage estimation and the clipped PPO objective.
//!
//! Losses here are functions of raw network outputs and return their exact
//! derivative with respect to those outputs, ready for
//! [`crate::neural::gradient`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::neural::log_softmax_rows;
use crate::sim::ActionId;

/// Number of reward channels: extrinsic and GAIL.
pub const CHANNELS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: ActionId,
    pub log_prob_old: f64,
    /// Critic estimate per channel at collection time.
    pub value_old: [f64; CHANNELS],
    pub reward_extrinsic: f64,
    /// Filled in from a discriminator snapshot before the update.
    pub reward_gail: f64,
    pub done: bool,
    pub agent_id: usize,
}

/// Transitions of one agent in one environment instance, in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stream {
    pub transitions: Vec<Transition>,
    /// Critic estimate of the state after the last transition, used when the
    /// stream was cut mid-episode.
    pub bootstrap: [f64; CHANNELS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub capacity: usize,
    streams: Vec<Stream>,
    len: usize,
}

impl RolloutBuffer {
    pub fn new(capacity: usize, n_streams: usize) -> Self {
        Self { capacity, streams: vec![Stream::default(); n_streams], len: 0 }
    }

    pub fn push(&mut self, stream: usize, t: Transition) {
        self.streams[stream].transitions.push(t);
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len >= self.capacity
    }

    pub fn set_bootstrap(&mut self, stream: usize, values: [f64; CHANNELS]) {
        self.streams[stream].bootstrap = values;
    }

    pub fn streams(&self) -> &[Stream] {
        &self.streams
    }

    /// Every transition, streams concatenated in index order.
    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.streams.iter().flat_map(|s| s.transitions.iter())
    }

    pub fn transitions_mut(&mut self) -> impl Iterator<Item = &mut Transition> {
        self.streams.iter_mut().flat_map(|s| s.transitions.iter_mut())
    }

    pub fn clear(&mut self) {
        for s in &mut self.streams {
            s.transitions.clear();
            s.bootstrap = [0.0; CHANNELS];
        }
        self.len = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvantageMode {
    /// Generalized advantage estimation.
    Gae,
    /// Discounted Monte-Carlo return minus the critic estimate.
    Simple,
}

impl AdvantageMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gae" => Some(AdvantageMode::Gae),
            "simple" => Some(AdvantageMode::Simple),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AdvantageMode::Gae => "gae",
            AdvantageMode::Simple => "simple",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageConfig {
    pub gamma: [f64; CHANNELS],
    pub lambda: f64,
    /// Channel weights of the combined advantage.
    pub strength: [f64; CHANNELS],
    pub mode: AdvantageMode,
}

/// Per-transition estimates in [`RolloutBuffer::transitions`] order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdvantageSet {
    pub advantages: [Vec<f64>; CHANNELS],
    pub returns: [Vec<f64>; CHANNELS],
    /// `sum_c strength_c * advantage_c`, not yet normalized.
    pub combined: Vec<f64>,
}

fn channel_reward(t: &Transition, c: usize) -> f64 {
    if c == 0 {
        t.reward_extrinsic
    } else {
        t.reward_gail
    }
}

pub fn compute_advantages(buffer: &RolloutBuffer, cfg: &AdvantageConfig) -> AdvantageSet {
    let mut set = AdvantageSet::default();
    for stream in buffer.streams() {
        let ts = &stream.transitions;
        for c in 0..CHANNELS {
            let gamma = cfg.gamma[c];
            let mut adv = vec![0.0; ts.len()];
            let mut ret = vec![0.0; ts.len()];
            let mut next_value = stream.bootstrap[c];
            let mut running_gae = 0.0;
            let mut running_return = stream.bootstrap[c];
            for i in (0..ts.len()).rev() {
                let t = &ts[i];
                let r = channel_reward(t, c);
                let live = if t.done { 0.0 } else { 1.0 };
                match cfg.mode {
                    AdvantageMode::Gae => {
                        let delta = r + gamma * next_value * live - t.value_old[c];
                        running_gae = delta + gamma * cfg.lambda * live * running_gae;
                        adv[i] = running_gae;
                        ret[i] = running_gae + t.value_old[c];
                    }
                    AdvantageMode::Simple => {
                        running_return = r + gamma * live * running_return;
                        ret[i] = running_return;
                        adv[i] = running_return - t.value_old[c];
                    }
                }
                next_value = t.value_old[c];
            }
            set.advantages[c].extend(adv);
            set.returns[c].extend(ret);
        }
    }
    set.combined = (0..set.advantages[0].len())
        .map(|i| (0..CHANNELS).map(|c| cfg.strength[c] * set.advantages[c][i]).sum())
        .collect();
    set
}

/// Shift and scale to zero mean and unit (population) variance. Batches of
/// one, or with zero spread, are only centred.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if values.len() < 2 || std < 1e-12 {
        return values.iter().map(|v| v - mean).collect();
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyLossParts {
    /// `mean(min(r A, clip(r) A))`, the quantity being maximized.
    pub surrogate: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Clipped surrogate with entropy bonus, as a loss to minimize:
/// `-surrogate - beta * entropy`. Returns the loss, its gradient with
/// respect to the `batch x n_actions` logits, and the parts.
pub fn policy_loss(
    logits: &[f64],
    n_actions: usize,
    old_log_probs: &[f64],
    actions: &[usize],
    advantages: &[f64],
    epsilon: f64,
    beta: f64,
) -> (f64, Vec<f64>, PolicyLossParts) {
    let batch = actions.len();
    assert_eq!(logits.len(), batch * n_actions);
    assert_eq!(old_log_probs.len(), batch);
    assert_eq!(advantages.len(), batch);
    let log_p = log_softmax_rows(logits, n_actions);
    let mut grad = vec![0.0; logits.len()];
    let mut parts = PolicyLossParts::default();
    let inv = 1.0 / batch as f64;
    for i in 0..batch {
        let row = &log_p[i * n_actions..(i + 1) * n_actions];
        let g = &mut grad[i * n_actions..(i + 1) * n_actions];
        let a = actions[i];
        let adv = advantages[i];
        let ratio = (row[a] - old_log_probs[i]).exp();
        let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
        let unclipped_term = ratio * adv;
        let clipped_term = clipped * adv;
        parts.surrogate += unclipped_term.min(clipped_term) * inv;
        parts.approx_kl += (old_log_probs[i] - row[a]) * inv;
        if clipped != ratio {
            parts.clip_fraction += inv;
        }
        // The unclipped branch is active unless clipping strictly lowers the term.
        let d_ratio = if unclipped_term <= clipped_term { adv } else { 0.0 };
        let entropy: f64 = -row.iter().map(|&l| l.exp() * l).sum::<f64>();
        parts.entropy += entropy * inv;
        for j in 0..n_actions {
            let p = row[j].exp();
            let onehot = if j == a { 1.0 } else { 0.0 };
            let d_surr = d_ratio * ratio * (onehot - p);
            let d_ent = -p * (row[j] + entropy);
            g[j] = -(d_surr + beta * d_ent) * inv;
        }
    }
    (-parts.surrogate - beta * parts.entropy, grad, parts)
}

/// `sum_c mean((V_c - R_c)^2)` over a `batch x CHANNELS` output, scaled by
/// `coef`; returns the loss and its gradient.
pub fn value_loss(values: &[f64], returns: &[[f64; CHANNELS]], coef: f64) -> (f64, Vec<f64>) {
    let batch = returns.len();
    assert_eq!(values.len(), batch * CHANNELS);
    let inv = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; values.len()];
    for (i, r) in returns.iter().enumerate() {
        for c in 0..CHANNELS {
            let e = values[i * CHANNELS + c] - r[c];
            loss += e * e * inv;
            grad[i * CHANNELS + c] = 2.0 * e * inv * coef;
        }
    }
    (coef * loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoLoss {
    pub total: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Full PPO objective `-surrogate + c_v * value_loss - beta * entropy` with
/// its gradients with respect to policy logits and critic outputs.
#[allow(clippy::too_many_arguments)]
pub fn ppo_loss(
    policy_logits: &[f64],
    n_actions: usize,
    old_log_probs: &[f64],
    actions: &[usize],
    advantages: &[f64],
    returns: &[[f64; CHANNELS]],
    values: &[f64],
    epsilon: f64,
    beta: f64,
    value_coef: f64,
) -> (PpoLoss, Vec<f64>, Vec<f64>) {
    let (pl, dlogits, parts) = policy_loss(policy_logits, n_actions, old_log_probs, actions, advantages, epsilon, beta);
    let (vl, dvalues) = value_loss(values, returns, value_coef);
    let loss = PpoLoss {
        total: pl + vl,
        surrogate: parts.surrogate,
        value_loss: if value_coef != 0.0 { vl / value_coef } else { 0.0 },
        entropy: parts.entropy,
    };
    (loss, dlogits, dvalues)
}

/// Categorical sample from one row of logits; returns `(index, log_prob)`.
pub fn sample_index<R: Rng>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let log_p = log_softmax_rows(logits, logits.len());
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &l) in log_p.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return (i, l);
        }
    }
    let last = log_p.len() - 1;
    (last, log_p[last])
}

pub fn sample_action<R: Rng>(logits: &[f64], rng: &mut R) -> (ActionId, f64) {
    let (i, lp) = sample_index(logits, rng);
    (ActionId::from_index(i).expect("three action logits"), lp)
}

/// Index of the largest logit; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_action(logits: &[f64]) -> ActionId {
    ActionId::from_index(argmax(logits)).expect("three action logits")
}
