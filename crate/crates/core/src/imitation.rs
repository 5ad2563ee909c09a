//! Behavior cloning loss and the GAIL discriminator.
//!
//! The discriminator scores `(observation, one-hot action)` pairs; expert
//! pairs are pushed towards 1, agent pairs towards 0, and the agent's
//! imitation reward is `ln D`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{
    adam_step, forward_logits, gradient, softmax_rows, MlpSpec, NeuralError, OptimizerState, OutputHead,
    ParamVector,
};

/// Clamp applied to discriminator outputs before any logarithm.
pub const DISC_CLAMP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImitationError {
    #[error("empty {0} batch")]
    EmptyBatch(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

pub type Result<T> = std::result::Result<T, ImitationError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BcLossMode {
    #[default]
    Mse,
    Xent,
}

impl BcLossMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mse" => Some(BcLossMode::Mse),
            "xent" => Some(BcLossMode::Xent),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BcLossMode::Mse => "mse",
            BcLossMode::Xent => "xent",
        }
    }
}

/// `1/2 * mean_i ||p_i - onehot(a_i)||^2` over a `batch x n_actions` slice of
/// probabilities.
pub fn bc_loss(policy_probs: &[f64], n_actions: usize, expert_actions: &[usize]) -> Result<f64> {
    if policy_probs.len() != expert_actions.len() * n_actions {
        return Err(ImitationError::Dimension { expected: expert_actions.len() * n_actions, got: policy_probs.len() });
    }
    if expert_actions.is_empty() {
        return Err(ImitationError::EmptyBatch("expert"));
    }
    let mut total = 0.0;
    for (row, &a) in policy_probs.chunks(n_actions).zip(expert_actions) {
        total += row
            .iter()
            .enumerate()
            .map(|(j, &p)| (p - if j == a { 1.0 } else { 0.0 }).powi(2))
            .sum::<f64>();
    }
    Ok(0.5 * total / expert_actions.len() as f64)
}

/// BC loss of raw policy logits, scaled by `strength`, with its gradient.
pub fn bc_objective(
    logits: &[f64],
    n_actions: usize,
    expert_actions: &[usize],
    mode: BcLossMode,
    strength: f64,
) -> (f64, Vec<f64>) {
    let batch = expert_actions.len();
    let inv = 1.0 / batch as f64;
    let probs = softmax_rows(logits, n_actions);
    let mut grad = vec![0.0; logits.len()];
    let mut loss = 0.0;
    for (i, &a) in expert_actions.iter().enumerate() {
        let p = &probs[i * n_actions..(i + 1) * n_actions];
        let g = &mut grad[i * n_actions..(i + 1) * n_actions];
        match mode {
            BcLossMode::Mse => {
                let resid: Vec<f64> = (0..n_actions).map(|j| p[j] - if j == a { 1.0 } else { 0.0 }).collect();
                loss += 0.5 * resid.iter().map(|r| r * r).sum::<f64>() * inv;
                let dot: f64 = resid.iter().zip(p).map(|(r, q)| r * q).sum();
                for k in 0..n_actions {
                    g[k] = strength * inv * p[k] * (resid[k] - dot);
                }
            }
            BcLossMode::Xent => {
                loss -= p[a].max(f64::MIN_POSITIVE).ln() * inv;
                for k in 0..n_actions {
                    g[k] = strength * inv * (p[k] - if k == a { 1.0 } else { 0.0 });
                }
            }
        }
    }
    (strength * loss, grad)
}

fn clamp_d(d: f64) -> f64 {
    d.clamp(DISC_CLAMP, 1.0 - DISC_CLAMP)
}

/// `ln` of the clamped discriminator output.
pub fn gail_reward_from_d(d: f64) -> f64 {
    clamp_d(d).ln()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of discriminator logits: the first `n_expert` rows
/// carry label 1, the rest label 0. Each class is averaged separately, so
/// indistinguishable classes give `2 ln 2`.
pub fn discriminator_objective(logits: &[f64], n_expert: usize) -> (f64, Vec<f64>) {
    let n_agent = logits.len() - n_expert;
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (i, &z) in logits.iter().enumerate() {
        let d = sigmoid(z);
        let inside = (DISC_CLAMP..=1.0 - DISC_CLAMP).contains(&d);
        if i < n_expert {
            let w = 1.0 / n_expert as f64;
            loss -= clamp_d(d).ln() * w;
            if inside {
                grad[i] = -(1.0 - d) * w;
            }
        } else {
            let w = 1.0 / n_agent as f64;
            loss -= (1.0 - clamp_d(d)).ln() * w;
            if inside {
                grad[i] = d * w;
            }
        }
    }
    (loss, grad)
}

/// Observation followed by the one-hot action.
pub fn disc_input(observation: &[f64], action: usize, n_actions: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(observation.len() + n_actions);
    v.extend_from_slice(observation);
    v.extend((0..n_actions).map(|j| if j == action { 1.0 } else { 0.0 }));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub optimizer: OptimizerState,
    pub n_actions: usize,
}

impl Discriminator {
    pub fn new(obs_dim: usize, n_actions: usize, hidden_units: usize, num_layers: usize, seed: u64) -> Self {
        let spec = MlpSpec::new(obs_dim + n_actions, hidden_units, num_layers, 1, OutputHead::Sigmoid);
        let params = ParamVector::init(&spec, seed);
        let optimizer = OptimizerState::new(params.len());
        Self { spec, params, optimizer, n_actions }
    }

    fn rows(&self, observations: &[f64], actions: &[usize]) -> Result<Vec<f64>> {
        let obs_dim = self.spec.input_dim - self.n_actions;
        if observations.len() != actions.len() * obs_dim {
            return Err(ImitationError::Dimension { expected: actions.len() * obs_dim, got: observations.len() });
        }
        Ok(observations
            .chunks(obs_dim)
            .zip(actions)
            .flat_map(|(o, &a)| disc_input(o, a, self.n_actions))
            .collect())
    }

    /// Clamped `D(s, a)` for a batch of observations (`batch x obs_dim`).
    pub fn scores(&self, observations: &[f64], actions: &[usize]) -> Result<Vec<f64>> {
        if actions.is_empty() {
            return Ok(Vec::new());
        }
        let logits = forward_logits(&self.spec, &self.params, &self.rows(observations, actions)?)?;
        Ok(logits.into_iter().map(|z| clamp_d(sigmoid(z))).collect())
    }

    pub fn rewards(&self, observations: &[f64], actions: &[usize]) -> Result<Vec<f64>> {
        Ok(self.scores(observations, actions)?.into_iter().map(f64::ln).collect())
    }

    pub fn loss(&self, agent_obs: &[f64], agent_actions: &[usize], expert_obs: &[f64], expert_actions: &[usize]) -> Result<f64> {
        let input = self.batch(agent_obs, agent_actions, expert_obs, expert_actions)?;
        let logits = forward_logits(&self.spec, &self.params, &input)?;
        Ok(discriminator_objective(&logits, expert_actions.len()).0)
    }

    fn batch(&self, agent_obs: &[f64], agent_actions: &[usize], expert_obs: &[f64], expert_actions: &[usize]) -> Result<Vec<f64>> {
        if agent_actions.is_empty() {
            return Err(ImitationError::EmptyBatch("agent"));
        }
        if expert_actions.is_empty() {
            return Err(ImitationError::EmptyBatch("expert"));
        }
        let mut input = self.rows(expert_obs, expert_actions)?;
        input.extend(self.rows(agent_obs, agent_actions)?);
        Ok(input)
    }

    /// One Adam step on the cross-entropy objective; returns the loss after
    /// the step.
    pub fn update(
        &mut self,
        agent_obs: &[f64],
        agent_actions: &[usize],
        expert_obs: &[f64],
        expert_actions: &[usize],
        lr: f64,
    ) -> Result<f64> {
        let input = self.batch(agent_obs, agent_actions, expert_obs, expert_actions)?;
        let n_expert = expert_actions.len();
        let (_, grad) = gradient(&self.spec, &self.params, &input, |z| discriminator_objective(z, n_expert))?;
        adam_step(&mut self.params, &grad, &mut self.optimizer, lr)?;
        let logits = forward_logits(&self.spec, &self.params, &input)?;
        Ok(discriminator_objective(&logits, n_expert).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bc_loss_spot_values() {
        assert_eq!(bc_loss(&[0.0, 1.0, 0.0], 3, &[1]).unwrap(), 0.0);
        let third = 1.0 / 3.0;
        let u = bc_loss(&[third; 3], 3, &[0]).unwrap();
        assert!((u - 1.0 / 3.0).abs() < 1e-15);
        let both = bc_loss(&[0.0, 1.0, 0.0, third, third, third], 3, &[1, 2]).unwrap();
        assert!((both - 1.0 / 6.0).abs() < 1e-15);
        assert!(bc_loss(&[0.5, 0.5], 3, &[0]).is_err());
    }

    #[test]
    fn bc_objective_matches_loss_and_scales() {
        let logits = [0.2, -1.0, 0.7, 1.5, 0.0, -0.3];
        let probs = softmax_rows(&logits, 3);
        let (l, g) = bc_objective(&logits, 3, &[2, 0], BcLossMode::Mse, 1.0);
        assert!((l - bc_loss(&probs, 3, &[2, 0]).unwrap()).abs() < 1e-15);
        let (lh, gh) = bc_objective(&logits, 3, &[2, 0], BcLossMode::Mse, 0.5);
        assert!((lh - 0.5 * l).abs() < 1e-15);
        for (a, b) in g.iter().zip(&gh) {
            assert!((0.5 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reward_clamps() {
        assert!((gail_reward_from_d(1.0) - (1.0 - 1e-7f64).ln()).abs() < 1e-15);
        assert!((gail_reward_from_d(1.0) + 1e-7).abs() < 1e-12);
        assert!((gail_reward_from_d(0.5) + 0.6931).abs() < 1e-4);
        assert!((gail_reward_from_d(0.0) + 16.118).abs() < 1e-3);
    }

    #[test]
    fn reward_is_monotone_and_bounded() {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let r = gail_reward_from_d(k as f64 / 1000.0);
            assert!(r >= prev);
            assert!(r >= DISC_CLAMP.ln() && r <= (1.0 - DISC_CLAMP).ln());
            prev = r;
        }
    }

    #[test]
    fn indistinguishable_classes_cost_two_ln2() {
        let (l, _) = discriminator_objective(&[0.0; 6], 3);
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12);
        let (swapped, _) = discriminator_objective(&[0.0; 6], 3);
        assert!((swapped - l).abs() < 1e-9);
    }

    #[test]
    fn empty_batches_are_errors() {
        let mut d = Discriminator::new(2, 3, 8, 1, 0);
        assert_eq!(d.update(&[], &[], &[0.0, 1.0], &[0], 1e-3), Err(ImitationError::EmptyBatch("agent")));
        assert_eq!(d.update(&[0.0, 1.0], &[0], &[], &[], 1e-3), Err(ImitationError::EmptyBatch("expert")));
    }
}
