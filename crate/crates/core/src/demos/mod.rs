//! Expert demonstrations: the scripted pilot, the on-disk demo format and
//! the in-memory dataset.
//!
//! A demo file is UTF-8 text with LF line endings. The first line is the
//! header:
//!
//! ```text
//! racildemo version=1 sensor=<hex16> env=<hex16> obs_dim=<n> n_actions=3 source=scripted episodes=<n>
//! ```
//!
//! followed by one record per step, space separated: episode index, step
//! index, the observation (`obs_dim` floats with 9 significant digits) and
//! the action id. Every line, including the last, ends with LF.

mod expert;

pub use expert::{scripted_expert, scripted_expert_with, ExpertConfig};

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sense::{ObservationSpec, SensorConfig};
use crate::sim::{check_success, spawn_episode, step_in_place, ActionId, EnvConfig, SimError};

pub const DEMO_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "racildemo";
/// Episodes per window when checking that the expert is not hopeless.
pub const PROBE_WINDOW: usize = 100;
pub const MIN_EXPERT_SUCCESS: f64 = 0.05;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("unsupported demo format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("{which} digest mismatch: file has {found}, config gives {expected}")]
    DigestMismatch { which: &'static str, expected: String, found: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("malformed record {record} (line {line}): {reason}")]
    Record { record: usize, line: usize, reason: String },
    #[error("expert succeeded in only {successes} of {attempts} episodes; environment too hard")]
    TooHard { successes: usize, attempts: usize },
    #[error("n_episodes must be >= 1")]
    NoEpisodes,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn short_digest(text: &str) -> String {
    let d = Sha256::digest(text.as_bytes());
    d.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sensor_digest(obs: &ObservationSpec) -> String {
    short_digest(&obs.canonical())
}

pub fn env_digest(env: &EnvConfig) -> String {
    short_digest(&env.geometry_canonical())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoSource {
    Scripted,
    Human,
}

impl DemoSource {
    pub fn name(self) -> &'static str {
        match self {
            DemoSource::Scripted => "scripted",
            DemoSource::Human => "human",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scripted" => Some(DemoSource::Scripted),
            "human" => Some(DemoSource::Human),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoHeader {
    pub version: u32,
    pub sensor_digest: String,
    pub env_digest: String,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub source: DemoSource,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRecord {
    pub episode: usize,
    pub step: usize,
    pub observation: Vec<f64>,
    pub action: ActionId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoFile {
    pub header: DemoHeader,
    pub records: Vec<DemoRecord>,
}

fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

/// Round to the 9 significant digits the file stores, so in-memory and
/// reloaded observations are identical.
pub fn quantize(v: f64) -> f64 {
    format_float(v).parse().expect("formatted float parses")
}

impl DemoFile {
    pub fn new(obs: &ObservationSpec, env: &EnvConfig, source: DemoSource) -> Self {
        Self {
            header: DemoHeader {
                version: DEMO_FORMAT_VERSION,
                sensor_digest: sensor_digest(obs),
                env_digest: env_digest(env),
                obs_dim: obs.dim(),
                n_actions: ActionId::COUNT,
                source,
                episodes: 0,
            },
            records: Vec::new(),
        }
    }

    /// Append one episode of `(observation, action)` steps.
    pub fn push_episode(&mut self, steps: &[(Vec<f64>, ActionId)]) {
        let episode = self.header.episodes;
        for (step, (o, a)) in steps.iter().enumerate() {
            self.records.push(DemoRecord {
                episode,
                step,
                observation: o.iter().map(|&v| quantize(v)).collect(),
                action: *a,
            });
        }
        self.header.episodes += 1;
    }

    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut out = format!(
            "{MAGIC} version={} sensor={} env={} obs_dim={} n_actions={} source={} episodes={}\n",
            h.version,
            h.sensor_digest,
            h.env_digest,
            h.obs_dim,
            h.n_actions,
            h.source.name(),
            h.episodes
        );
        for r in &self.records {
            let _ = write!(out, "{} {}", r.episode, r.step);
            for &v in &r.observation {
                out.push(' ');
                out.push_str(&format_float(v));
            }
            let _ = writeln!(out, " {}", r.action.index());
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), DemoError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Parse and validate every invariant; nothing is returned for an
    /// invalid file.
    pub fn parse(text: &str) -> Result<Self, DemoError> {
        let mut lines = text.split_inclusive('\n');
        let first = lines.next().ok_or_else(|| DemoError::Header("empty file".into()))?;
        let header = parse_header(first.strip_suffix('\n').ok_or_else(|| DemoError::Header("missing LF".into()))?)?;
        let mut records: Vec<DemoRecord> = Vec::new();
        for (k, raw) in lines.enumerate() {
            let bad = |reason: String| DemoError::Record { record: k, line: k + 2, reason };
            let line = raw.strip_suffix('\n').ok_or_else(|| bad("truncated record (no trailing LF)".into()))?;
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != header.obs_dim + 3 {
                return Err(bad(format!("expected {} fields, found {}", header.obs_dim + 3, fields.len())));
            }
            let episode: usize = fields[0].parse().map_err(|_| bad(format!("bad episode index {:?}", fields[0])))?;
            let step: usize = fields[1].parse().map_err(|_| bad(format!("bad step index {:?}", fields[1])))?;
            let observation = fields[2..2 + header.obs_dim]
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| bad("bad observation value".into()))?;
            let action = fields[header.obs_dim + 2]
                .parse::<usize>()
                .ok()
                .filter(|&a| a < header.n_actions)
                .and_then(ActionId::from_index)
                .ok_or_else(|| bad(format!("bad action {:?}", fields[header.obs_dim + 2])))?;
            let (want_ep, want_step) = match records.last() {
                None => (0, 0),
                Some(prev) if episode == prev.episode => (prev.episode, prev.step + 1),
                Some(prev) => (prev.episode + 1, 0),
            };
            if episode != want_ep || step != want_step {
                return Err(bad(format!(
                    "expected episode {want_ep} step {want_step}, found episode {episode} step {step}"
                )));
            }
            records.push(DemoRecord { episode, step, observation, action });
        }
        let found = records.last().map_or(0, |r| r.episode + 1);
        if found != header.episodes {
            return Err(DemoError::Header(format!("header lists {} episodes, records hold {found}", header.episodes)));
        }
        Ok(Self { header, records })
    }

    pub fn check_digests(&self, obs: &ObservationSpec, env: &EnvConfig) -> Result<(), DemoError> {
        let (s, e) = (sensor_digest(obs), env_digest(env));
        if self.header.sensor_digest != s {
            return Err(DemoError::DigestMismatch { which: "sensor", expected: s, found: self.header.sensor_digest.clone() });
        }
        if self.header.env_digest != e {
            return Err(DemoError::DigestMismatch { which: "env", expected: e, found: self.header.env_digest.clone() });
        }
        Ok(())
    }

    pub fn dataset(&self) -> DemoDataset {
        DemoDataset {
            obs_dim: self.header.obs_dim,
            observations: self.records.iter().flat_map(|r| r.observation.iter().copied()).collect(),
            actions: self.records.iter().map(|r| r.action.index()).collect(),
            source: self.header.source,
        }
    }
}

fn parse_header(line: &str) -> Result<DemoHeader, DemoError> {
    let mut parts = line.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(DemoError::Header(format!("missing '{MAGIC}' tag")));
    }
    let mut kv = std::collections::BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| DemoError::Header(format!("bad field {p:?}")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| DemoError::Header(format!("missing {k}")));
    let version = get("version")?;
    if version != DEMO_FORMAT_VERSION.to_string() {
        return Err(DemoError::Version { found: version.to_string(), expected: DEMO_FORMAT_VERSION });
    }
    let num = |k: &str| -> Result<usize, DemoError> {
        get(k)?.parse().map_err(|_| DemoError::Header(format!("bad {k}")))
    };
    Ok(DemoHeader {
        version: DEMO_FORMAT_VERSION,
        sensor_digest: get("sensor")?.to_string(),
        env_digest: get("env")?.to_string(),
        obs_dim: num("obs_dim")?,
        n_actions: num("n_actions")?,
        source: DemoSource::parse(get("source")?).ok_or_else(|| DemoError::Header("bad source".into()))?,
        episodes: num("episodes")?,
    })
}

/// Read, validate and digest-check a demo file.
pub fn load_demos(path: &Path, obs: &ObservationSpec, env: &EnvConfig) -> Result<DemoDataset, DemoError> {
    let text = std::fs::read_to_string(path)?;
    let file = DemoFile::parse(&text)?;
    file.check_digests(obs, env)?;
    Ok(file.dataset())
}

/// Roll the scripted expert until `n_episodes` successful trajectories are
/// collected. In multi-UAV configs every agent is flown by the expert and
/// each successful agent trajectory counts as one episode.
pub fn generate_demos(
    env: &EnvConfig,
    sensor: &SensorConfig,
    obs: &ObservationSpec,
    n_episodes: usize,
    seed: u64,
) -> Result<DemoFile, DemoError> {
    if n_episodes == 0 {
        return Err(DemoError::NoEpisodes);
    }
    let mut file = DemoFile::new(obs, env, DemoSource::Scripted);
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let (mut attempts, mut successes) = (0usize, 0usize);
    while file.header.episodes < n_episodes {
        let mut world = spawn_episode(env, seeds.gen())?;
        let n = world.uavs.len();
        let mut traj: Vec<Vec<(Vec<f64>, ActionId)>> = vec![Vec::new(); n];
        while !world.all_done() {
            let mut actions = Vec::with_capacity(n);
            for id in 0..n {
                let a = scripted_expert(&world, id, sensor);
                if world.uavs[id].alive {
                    traj[id].push((obs.encode(&world, id, env), a));
                }
                actions.push(a);
            }
            step_in_place(&mut world, &actions, env)?;
        }
        for (id, t) in traj.iter().enumerate() {
            attempts += 1;
            if check_success(&world, id)? {
                successes += 1;
                if file.header.episodes < n_episodes {
                    file.push_episode(t);
                }
            }
        }
        if attempts >= PROBE_WINDOW && (successes as f64) < MIN_EXPERT_SUCCESS * attempts as f64 {
            return Err(DemoError::TooHard { successes, attempts });
        }
    }
    Ok(file)
}

/// A batch of expert pairs; `observations` is `len x obs_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertBatch {
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub source: DemoSource,
}

/// Immutable, flat collection of expert pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    pub obs_dim: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub source: DemoSource,
}

impl DemoDataset {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn gather(&self, indices: &[usize]) -> ExpertBatch {
        ExpertBatch {
            observations: indices.iter().flat_map(|&i| self.observation(i).iter().copied()).collect(),
            actions: indices.iter().map(|&i| self.actions[i]).collect(),
            source: self.source,
        }
    }

    /// One shuffled pass over the data in batches of at most `batch_size`.
    pub fn minibatches<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Vec<ExpertBatch> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        idx.chunks(batch_size.max(1)).map(|c| self.gather(c)).collect()
    }

    /// `n` pairs drawn uniformly with replacement.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> ExpertBatch {
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..self.len())).collect();
        self.gather(&idx)
    }

    /// Split off the last `n` pairs.
    pub fn split_tail(&self, n: usize) -> (DemoDataset, DemoDataset) {
        let k = self.len().saturating_sub(n);
        let head = DemoDataset {
            obs_dim: self.obs_dim,
            observations: self.observations[..k * self.obs_dim].to_vec(),
            actions: self.actions[..k].to_vec(),
            source: self.source,
        };
        let tail = DemoDataset {
            obs_dim: self.obs_dim,
            observations: self.observations[k * self.obs_dim..].to_vec(),
            actions: self.actions[k..].to_vec(),
            source: self.source,
        };
        (head, tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Arena, Goal, Uav, WorldState};

    fn open_world(heading: f64, goal: (f64, f64)) -> WorldState {
        let cfg = EnvConfig { n_obstacles: 0, ..Default::default() };
        WorldState {
            tick: 0,
            arena: Arena::from_config(&cfg),
            uavs: vec![Uav { id: 0, x: 0.0, y: -13.0, heading, alive: true, outcome: None }],
            goals: vec![Goal { owner: 0, x: goal.0, y: goal.1 }],
            obstacles: vec![],
        }
    }

    #[test]
    fn expert_flies_at_goal_ahead() {
        let w = open_world(90.0, (0.0, 13.0));
        assert_eq!(scripted_expert(&w, 0, &SensorConfig::default()), ActionId::Fwd);
    }

    #[test]
    fn expert_turns_left_towards_goal() {
        let w = open_world(0.0, (0.0, 13.0));
        assert_eq!(scripted_expert(&w, 0, &SensorConfig::default()), ActionId::RotLeft);
    }

    #[test]
    fn digests_are_16_hex() {
        let d = short_digest("abc");
        assert_eq!(d, "ba7816bf8f01cfea");
    }

    #[test]
    fn quantize_is_idempotent() {
        for v in [0.1, -1.0 / 3.0, 1e-12, 12345.678901234] {
            let q = quantize(v);
            assert_eq!(quantize(q), q);
            assert!((q - v).abs() <= 1e-8 * v.abs());
        }
    }
}
