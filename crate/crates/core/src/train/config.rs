use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::imitation::BcLossMode;
use crate::neural::{Activation, Schedule};
use crate::ppo::AdvantageMode;
use crate::sense::{ObservationSpec, SensorConfig, Tag};
use crate::sim::EnvConfig;

/// Named starting points for a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Laptop scale: 300k steps, 2 x 128 networks, 4 environments.
    Desk,
    /// Full-size networks and batches, 10M steps.
    Fidelity,
}

impl Profile {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "desk" => Some(Profile::Desk),
            "fidelity" => Some(Profile::Fidelity),
            _ => None,
        }
    }
}

/// Every knob of a training run. Field names follow the config file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub buffer_size: usize,
    pub learning_rate: f64,
    /// Entropy bonus coefficient.
    pub beta: f64,
    /// PPO clip range.
    pub epsilon: f64,
    /// GAE lambda.
    pub lambda: f64,
    pub num_epoch: usize,
    pub learning_rate_schedule: Schedule,
    pub beta_schedule: Schedule,
    /// Running observation normalization; only `false` is supported.
    pub normalize: bool,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub extrinsic_gamma: f64,
    pub extrinsic_strength: f64,
    pub gail_gamma: f64,
    pub gail_strength: f64,
    pub bc_strength: f64,
    /// Length of the supervised warm-up, counted from step 0.
    pub steps_bc: u64,
    pub total_steps: u64,
    pub seed: u64,
    pub use_raycast: bool,
    pub use_bc: bool,
    pub use_gail: bool,
    /// Also run PPO updates during the warm-up.
    pub bc_phase_ppo: bool,
    /// Steps between checkpoints.
    pub eval_interval: u64,
    pub advantage_mode: AdvantageMode,
    pub bc_loss_mode: BcLossMode,
    pub n_envs: usize,
    pub activation: Activation,
    pub disc_hidden_units: usize,
    pub disc_num_layers: usize,
    pub env: EnvConfig,
    pub sensor: SensorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

fn schedule_name(s: Schedule) -> &'static str {
    s.name()
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Swish => "swish",
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
    }
}

fn parse_activation(s: &str) -> Option<Activation> {
    match s {
        "swish" => Some(Activation::Swish),
        "relu" => Some(Activation::Relu),
        "tanh" => Some(Activation::Tanh),
        _ => None,
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "on" => Some(true),
        "false" | "off" => Some(false),
        _ => None,
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            batch_size: 256,
            buffer_size: 2048,
            learning_rate: 3e-4,
            beta: 0.005,
            epsilon: 0.2,
            lambda: 0.95,
            num_epoch: 3,
            learning_rate_schedule: Schedule::Linear,
            beta_schedule: Schedule::Constant,
            normalize: false,
            hidden_units: 128,
            num_layers: 2,
            extrinsic_gamma: 0.99,
            extrinsic_strength: 1.0,
            gail_gamma: 0.99,
            gail_strength: 1.0,
            bc_strength: 0.5,
            steps_bc: 100_000,
            total_steps: 300_000,
            seed: 0,
            use_raycast: true,
            use_bc: true,
            use_gail: true,
            bc_phase_ppo: false,
            eval_interval: 50_000,
            advantage_mode: AdvantageMode::Gae,
            bc_loss_mode: BcLossMode::Mse,
            n_envs: 4,
            activation: Activation::Swish,
            disc_hidden_units: 128,
            disc_num_layers: 2,
            env: EnvConfig::default(),
            sensor: SensorConfig::default(),
        }
    }

    pub fn fidelity() -> Self {
        Self {
            batch_size: 1024,
            hidden_units: 1024,
            num_layers: 8,
            total_steps: 10_000_000,
            eval_interval: 500_000,
            ..Self::desk()
        }
    }

    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self::desk(),
            Profile::Fidelity => Self::fidelity(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::Config(msg));
        self.env.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        self.sensor.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        if self.batch_size == 0 || self.buffer_size == 0 {
            return fail("batch_size and buffer_size must be >= 1".into());
        }
        if self.batch_size > self.buffer_size {
            return fail(format!("batch_size {} exceeds buffer_size {}", self.batch_size, self.buffer_size));
        }
        if self.steps_bc > self.total_steps {
            return fail(format!("steps_bc {} exceeds total_steps {}", self.steps_bc, self.total_steps));
        }
        for (name, v) in [
            ("extrinsic_strength", self.extrinsic_strength),
            ("gail_strength", self.gail_strength),
            ("bc_strength", self.bc_strength),
            ("beta", self.beta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be > 0".into());
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be > 0".into());
        }
        for (name, v) in [("lambda", self.lambda), ("extrinsic_gamma", self.extrinsic_gamma), ("gail_gamma", self.gail_gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.num_epoch == 0 || self.n_envs == 0 {
            return fail("num_epoch and n_envs must be >= 1".into());
        }
        if self.hidden_units == 0 || self.num_layers == 0 || self.disc_hidden_units == 0 || self.disc_num_layers == 0 {
            return fail("network sizes must be >= 1".into());
        }
        if self.normalize {
            return fail("normalize = true is not supported; observations are normalized by the sensor".into());
        }
        if self.eval_interval == 0 {
            return fail("eval_interval must be >= 1".into());
        }
        Ok(())
    }

    pub fn observation(&self) -> ObservationSpec {
        if self.use_raycast {
            ObservationSpec::Rays(self.sensor.clone())
        } else {
            ObservationSpec::Coordinates { n_obstacles: self.env.n_obstacles, n_peers: self.env.n_uavs - 1 }
        }
    }

    pub fn needs_demos(&self) -> bool {
        self.use_bc || self.use_gail
    }

    /// Canonical `key = value` text; [`TrainConfig::parse`] reads it back to
    /// an identical config.
    pub fn to_text(&self) -> String {
        let e = &self.env;
        let s = &self.sensor;
        let tags: Vec<&str> = s.tags.iter().map(|t| t.name()).collect();
        let rows: Vec<(&str, String)> = vec![
            ("batch_size", self.batch_size.to_string()),
            ("buffer_size", self.buffer_size.to_string()),
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("beta", format!("{:?}", self.beta)),
            ("epsilon", format!("{:?}", self.epsilon)),
            ("lambda", format!("{:?}", self.lambda)),
            ("num_epoch", self.num_epoch.to_string()),
            ("learning_rate_schedule", schedule_name(self.learning_rate_schedule).into()),
            ("beta_schedule", schedule_name(self.beta_schedule).into()),
            ("normalize", self.normalize.to_string()),
            ("hidden_units", self.hidden_units.to_string()),
            ("num_layers", self.num_layers.to_string()),
            ("extrinsic_gamma", format!("{:?}", self.extrinsic_gamma)),
            ("extrinsic_strength", format!("{:?}", self.extrinsic_strength)),
            ("gail_gamma", format!("{:?}", self.gail_gamma)),
            ("gail_strength", format!("{:?}", self.gail_strength)),
            ("bc_strength", format!("{:?}", self.bc_strength)),
            ("steps_bc", self.steps_bc.to_string()),
            ("r_f", format!("{:?}", e.r_f)),
            ("r_p", format!("{:?}", e.r_p)),
            ("r_tp", format!("{:?}", e.r_tp)),
            ("x_max", format!("{:?}", e.x_max)),
            ("y_max", format!("{:?}", e.y_max)),
            ("x_min", format!("{:?}", e.x_min)),
            ("y_min", format!("{:?}", e.y_min)),
            ("r_min", format!("{:?}", e.r_min)),
            ("r_max", format!("{:?}", e.r_max)),
            ("n_obstacles", e.n_obstacles.to_string()),
            ("epsilon_proximity", format!("{:?}", e.epsilon_proximity)),
            ("total_steps", self.total_steps.to_string()),
            ("n_uavs", e.n_uavs.to_string()),
            ("seed", self.seed.to_string()),
            ("use_raycast", self.use_raycast.to_string()),
            ("use_bc", self.use_bc.to_string()),
            ("use_gail", self.use_gail.to_string()),
            ("bc_phase_ppo", self.bc_phase_ppo.to_string()),
            ("eval_interval", self.eval_interval.to_string()),
            ("advantage_mode", self.advantage_mode.name().into()),
            ("bc_loss_mode", self.bc_loss_mode.name().into()),
            ("n_envs", self.n_envs.to_string()),
            ("activation", activation_name(self.activation).into()),
            ("disc_hidden_units", self.disc_hidden_units.to_string()),
            ("disc_num_layers", self.disc_num_layers.to_string()),
            ("max_episode_steps", e.max_episode_steps.to_string()),
            ("n_rays", s.n_rays.to_string()),
            ("ray_arc", format!("{:?}", s.arc_degrees)),
            ("max_range", format!("{:?}", s.max_range)),
            ("ray_tags", tags.join(",")),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Parse `key = value` lines over the desk profile, or over the profile
    /// named by a `profile` key. `#` starts a comment. Unknown and repeated
    /// keys are errors.
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut pairs: Vec<(usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(TrainError::ConfigLine { line: i + 1, reason: format!("expected `key = value`, got `{line}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if pairs.iter().any(|(_, seen, _)| *seen == k) {
                return Err(TrainError::ConfigLine { line: i + 1, reason: format!("duplicate key `{k}`") });
            }
            pairs.push((i + 1, k, v));
        }
        let mut cfg = match pairs.iter().find(|(_, k, _)| *k == "profile") {
            Some(&(line, _, v)) => Profile::parse(v)
                .map(Self::profile)
                .ok_or_else(|| TrainError::ConfigLine { line, reason: format!("unknown profile `{v}`") })?,
            None => Self::desk(),
        };
        for (line, k, v) in pairs {
            if k == "profile" {
                continue;
            }
            cfg.set(k, v).map_err(|reason| TrainError::ConfigLine { line, reason })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assign one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        let bad = || format!("invalid value `{value}` for `{key}`");
        let e = &mut self.env;
        match key {
            "batch_size" => self.batch_size = num(key, value)?,
            "buffer_size" => self.buffer_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "num_epoch" => self.num_epoch = num(key, value)?,
            "learning_rate_schedule" => self.learning_rate_schedule = Schedule::parse(value).ok_or_else(bad)?,
            "beta_schedule" => self.beta_schedule = Schedule::parse(value).ok_or_else(bad)?,
            "normalize" => self.normalize = parse_bool(value).ok_or_else(bad)?,
            "hidden_units" => self.hidden_units = num(key, value)?,
            "num_layers" => self.num_layers = num(key, value)?,
            "extrinsic_gamma" => self.extrinsic_gamma = num(key, value)?,
            "extrinsic_strength" => self.extrinsic_strength = num(key, value)?,
            "gail_gamma" => self.gail_gamma = num(key, value)?,
            "gail_strength" => self.gail_strength = num(key, value)?,
            "bc_strength" => self.bc_strength = num(key, value)?,
            "steps_bc" => self.steps_bc = num(key, value)?,
            "r_f" => e.r_f = num(key, value)?,
            "r_p" => e.r_p = num(key, value)?,
            "r_tp" => e.r_tp = num(key, value)?,
            "x_max" => e.x_max = num(key, value)?,
            "y_max" => e.y_max = num(key, value)?,
            "x_min" => e.x_min = num(key, value)?,
            "y_min" => e.y_min = num(key, value)?,
            "r_min" => e.r_min = num(key, value)?,
            "r_max" => e.r_max = num(key, value)?,
            "n_obstacles" => e.n_obstacles = num(key, value)?,
            "epsilon_proximity" => e.epsilon_proximity = num(key, value)?,
            "n_uavs" => e.n_uavs = num(key, value)?,
            "max_episode_steps" => e.max_episode_steps = num(key, value)?,
            "total_steps" => self.total_steps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "use_raycast" => self.use_raycast = parse_bool(value).ok_or_else(bad)?,
            "use_bc" => self.use_bc = parse_bool(value).ok_or_else(bad)?,
            "use_gail" => self.use_gail = parse_bool(value).ok_or_else(bad)?,
            "bc_phase_ppo" => self.bc_phase_ppo = parse_bool(value).ok_or_else(bad)?,
            "eval_interval" => self.eval_interval = num(key, value)?,
            "advantage_mode" => self.advantage_mode = AdvantageMode::parse(value).ok_or_else(bad)?,
            "bc_loss_mode" => self.bc_loss_mode = BcLossMode::parse(value).ok_or_else(bad)?,
            "n_envs" => self.n_envs = num(key, value)?,
            "activation" => self.activation = parse_activation(value).ok_or_else(bad)?,
            "disc_hidden_units" => self.disc_hidden_units = num(key, value)?,
            "disc_num_layers" => self.disc_num_layers = num(key, value)?,
            "n_rays" => self.sensor.n_rays = num(key, value)?,
            "ray_arc" => self.sensor.arc_degrees = num(key, value)?,
            "max_range" => self.sensor.max_range = num(key, value)?,
            "ray_tags" => {
                self.sensor.tags = value
                    .split(',')
                    .map(|t| Tag::parse(t.trim()).ok_or_else(|| format!("unknown ray tag `{}`", t.trim())))
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_profiles() {
        for cfg in [TrainConfig::desk(), TrainConfig::fidelity()] {
            let back = TrainConfig::parse(&cfg.to_text()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn fidelity_matches_table() {
        let c = TrainConfig::parse("profile = fidelity\n").unwrap();
        assert_eq!((c.batch_size, c.buffer_size, c.hidden_units, c.num_layers, c.num_epoch), (1024, 2048, 1024, 8, 3));
        assert_eq!((c.learning_rate, c.beta, c.epsilon, c.lambda), (3e-4, 0.005, 0.2, 0.95));
        assert_eq!((c.extrinsic_gamma, c.gail_gamma, c.extrinsic_strength, c.gail_strength, c.bc_strength), (0.99, 0.99, 1.0, 1.0, 0.5));
        assert_eq!(c.steps_bc, 100_000);
        assert_eq!((c.env.r_f, c.env.r_p, c.env.r_tp, c.env.epsilon_proximity), (10_000.0, 0.2, 1.0, 5.0));
        assert_eq!((c.env.x_min, c.env.x_max, c.env.y_min, c.env.y_max, c.env.r_min, c.env.r_max), (-15.0, 15.0, -15.0, 15.0, 3.5, 3.5));
        assert_eq!(c.env.n_obstacles, 4);
        assert!(!c.normalize && !c.bc_phase_ppo);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = TrainConfig::parse("batch_size = 64\nbatchsize = 64\n").unwrap_err();
        assert!(matches!(err, TrainError::ConfigLine { line: 2, .. }), "{err}");
        let err = TrainConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, TrainError::ConfigLine { line: 2, .. }));
        assert!(TrainConfig::parse("use_gail = maybe\n").is_err());
        assert!(TrainConfig::parse("no equals sign\n").is_err());
    }

    #[test]
    fn invariants_are_checked() {
        assert!(TrainConfig::parse("batch_size = 4096\n").is_err());
        assert!(TrainConfig::parse("steps_bc = 400000\n").is_err());
        assert!(TrainConfig::parse("gail_strength = -1\n").is_err());
        assert!(TrainConfig::parse("normalize = true\n").is_err());
    }

    #[test]
    fn comments_and_toggles() {
        let c = TrainConfig::parse("# baseline\nuse_raycast = false # coordinates\nuse_gail=off\n\n").unwrap();
        assert!(!c.use_raycast && !c.use_gail && c.use_bc);
        assert!(matches!(c.observation(), ObservationSpec::Coordinates { n_obstacles: 4, n_peers: 0 }));
    }
}
