use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::demos::{env_digest, sensor_digest};
use crate::imitation::Discriminator;
use crate::neural::{MlpSpec, OptimizerState, ParamVector};

pub const CHECKPOINT_FORMAT: &str = "racil-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub optimizer: OptimizerState,
}

impl Network {
    pub fn new(spec: MlpSpec, seed: u64) -> Self {
        let params = ParamVector::init(&spec, seed);
        let optimizer = OptimizerState::new(params.len());
        Self { spec, params, optimizer }
    }
}

/// Everything needed to resume or evaluate a run, stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Canonical config text of the run.
    pub config: String,
    pub sensor_digest: String,
    pub env_digest: String,
    pub step: u64,
    pub actor: Network,
    /// Outputs one value per reward channel.
    pub critic: Network,
    pub discriminator: Option<Discriminator>,
}

impl Checkpoint {
    pub fn train_config(&self) -> Result<TrainConfig, TrainError> {
        TrainConfig::parse(&self.config)
    }

    /// Refuse to run this checkpoint under `config` unless observations and
    /// geometry agree.
    pub fn check_compatible(&self, config: &TrainConfig) -> Result<(), TrainError> {
        let sensor = sensor_digest(&config.observation());
        if sensor != self.sensor_digest {
            return Err(TrainError::DigestMismatch { which: "sensor", expected: self.sensor_digest.clone(), found: sensor });
        }
        let env = env_digest(&config.env);
        if env != self.env_digest {
            return Err(TrainError::DigestMismatch { which: "env", expected: self.env_digest.clone(), found: env });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(TrainError::Checkpoint(format!("not a checkpoint: format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(TrainError::Checkpoint(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }

    /// Write through a temporary file so a crash never leaves a torn
    /// checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
