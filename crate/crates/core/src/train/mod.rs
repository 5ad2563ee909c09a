//! The composite training loop, evaluation harness and their file formats.
//!
//! A run has two phases. During the first `steps_bc` steps (when `use_bc`
//! is set) rollouts only feed the critic and the metrics while the actor is
//! fitted to the demonstrations. Afterwards PPO optimizes the
//! strength-weighted sum of extrinsic and (with `use_gail`) discriminator
//! advantages.

mod checkpoint;
mod config;
mod eval;
mod metrics;
mod run;

pub use checkpoint::{Checkpoint, Network, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{Profile, TrainConfig};
pub use eval::{episode_seeds, 
    evaluate, evaluate_policy, ActorPolicy, AgentTally, EvalReport, Policy, RandomPolicy, ScriptedPolicy, EVAL_HEADER,
};
pub use metrics::{parse_metrics, read_metrics, MetricsRow, MetricsWriter, METRICS_HEADER};
pub use run::{
    bc_gradient, train, value_scale, TrainOutcome, Trainer, UpdatePhase, UpdateStats, VALUE_COEF,
};

use crate::demos::DemoError;
use crate::imitation::ImitationError;
use crate::neural::NeuralError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("config: {0}")]
    Config(String),
    #[error("config line {line}: {reason}")]
    ConfigLine { line: usize, reason: String },
    #[error("{which} digest mismatch: checkpoint has {expected}, config gives {found}")]
    DigestMismatch { which: &'static str, expected: String, found: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("metrics line {line}: {reason}")]
    Metrics { line: usize, reason: String },
    #[error("demonstrations required when use_bc or use_gail is set")]
    MissingDemos,
    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: u64 },
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Imitation(#[from] ImitationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
