//! Transport-free session logic; the server only moves messages.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use racil_core::demos::{DemoFile, DemoSource};
use racil_core::sense::{ObservationSpec, SensorConfig};
use racil_core::sim::{check_success, spawn_episode, step_in_place, ActionId, EnvConfig, WorldState};
use racil_core::train::Policy;

use crate::protocol::{ClientMsg, ControlCmd, ServerMsg, StateFrame};

fn wrong_mode(what: &str, mode: &str) -> ServerMsg {
    ServerMsg::error("wrong_mode", format!("{what} is not available in {mode} mode"))
}

/// Turn-based human control. The world advances once every flying agent
/// has an action queued; nothing moves between messages.
pub struct PilotSession {
    env: EnvConfig,
    sensor: SensorConfig,
    observation: ObservationSpec,
    world: WorldState,
    seeds: ChaCha8Rng,
    pending: Vec<Option<ActionId>>,
    last_reward: Vec<f64>,
    recording: bool,
    current: Vec<Vec<(Vec<f64>, ActionId)>>,
    demos: DemoFile,
    demo_path: PathBuf,
}

impl PilotSession {
    pub fn new(env: EnvConfig, sensor: SensorConfig, observation: ObservationSpec, seed: u64, demo_path: PathBuf) -> anyhow::Result<Self> {
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let world = spawn_episode(&env, seeds.gen())?;
        let n = env.n_uavs;
        let demos = DemoFile::new(&observation, &env, DemoSource::Human);
        Ok(Self {
            env,
            sensor,
            observation,
            world,
            seeds,
            pending: vec![None; n],
            last_reward: vec![0.0; n],
            recording: false,
            current: vec![Vec::new(); n],
            demos,
            demo_path,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    /// Completed episodes held in memory, saved or not.
    pub fn episodes_recorded(&self) -> usize {
        self.demos.header.episodes
    }

    pub fn frame(&self) -> ServerMsg {
        ServerMsg::State(StateFrame::capture(&self.world, &self.sensor, &self.last_reward, self.recording))
    }

    fn restart(&mut self) -> anyhow::Result<()> {
        self.world = spawn_episode(&self.env, self.seeds.gen())?;
        self.pending.iter_mut().for_each(|p| *p = None);
        self.last_reward.iter_mut().for_each(|r| *r = 0.0);
        self.current.iter_mut().for_each(Vec::clear);
        Ok(())
    }

    /// Drop the episode being recorded, as on a disconnect.
    pub fn discard_recording(&mut self) {
        self.current.iter_mut().for_each(Vec::clear);
    }

    pub fn handle(&mut self, msg: ClientMsg) -> Vec<ServerMsg> {
        match msg {
            ClientMsg::Hello { .. } => vec![ServerMsg::error("bad_message", "hello already received")],
            ClientMsg::Action { agent_id, action } => self.action(agent_id, action),
            ClientMsg::Control { cmd } => self.control(cmd),
        }
    }

    fn action(&mut self, agent_id: usize, action: u8) -> Vec<ServerMsg> {
        let Some(a) = ActionId::from_index(action as usize) else {
            return vec![ServerMsg::error("invalid_action", format!("action must be 0, 1 or 2, got {action}"))];
        };
        if agent_id >= self.world.uavs.len() {
            return vec![ServerMsg::error("unknown_agent", format!("no agent {agent_id}"))];
        }
        if self.world.all_done() {
            return vec![ServerMsg::error("episode_done", "episode finished; send reset")];
        }
        if !self.world.uavs[agent_id].alive {
            return vec![ServerMsg::error("agent_finished", format!("agent {agent_id} already finished"))];
        }
        self.pending[agent_id] = Some(a);
        let ready = self.world.alive_ids().all(|id| self.pending[id].is_some());
        if !ready {
            return Vec::new();
        }
        let actions: Vec<ActionId> = self.pending.iter().map(|p| p.unwrap_or(ActionId::Fwd)).collect();
        if self.recording {
            for id in self.world.alive_ids().collect::<Vec<_>>() {
                let obs = self.observation.encode(&self.world, id, &self.env);
                self.current[id].push((obs, actions[id]));
            }
        }
        let report = match step_in_place(&mut self.world, &actions, &self.env) {
            Ok(r) => r,
            Err(e) => return vec![ServerMsg::error("internal", e.to_string())],
        };
        self.last_reward = report.rewards;
        self.pending.iter_mut().for_each(|p| *p = None);
        let mut out = vec![self.frame()];
        if self.world.all_done() && self.recording {
            let mut kept = 0;
            for id in 0..self.current.len() {
                let traj = std::mem::take(&mut self.current[id]);
                if !traj.is_empty() && check_success(&self.world, id).unwrap_or(false) {
                    self.demos.push_episode(&traj);
                    kept += 1;
                }
            }
            out.push(ServerMsg::Info {
                message: format!("kept {kept} successful trajectories; {} episodes recorded", self.episodes_recorded()),
            });
        }
        out
    }

    fn control(&mut self, cmd: ControlCmd) -> Vec<ServerMsg> {
        match cmd {
            ControlCmd::Reset => match self.restart() {
                Ok(()) => vec![self.frame()],
                Err(e) => vec![ServerMsg::error("internal", e.to_string())],
            },
            ControlCmd::RecordStart => {
                self.recording = true;
                self.discard_recording();
                vec![self.frame()]
            }
            ControlCmd::RecordStop => {
                self.recording = false;
                self.discard_recording();
                vec![self.frame()]
            }
            ControlCmd::Save => match self.demos.save(&self.demo_path) {
                Ok(()) => vec![ServerMsg::Saved {
                    path: self.demo_path.display().to_string(),
                    episodes: self.episodes_recorded(),
                }],
                Err(e) => vec![ServerMsg::error("save_failed", e.to_string())],
            },
            ControlCmd::Play | ControlCmd::Pause | ControlCmd::StepFwd => vec![wrong_mode("playback control", "pilot")],
        }
    }
}

/// Playback of a saved trajectory.
pub struct ReplaySession {
    frames: Vec<StateFrame>,
    cursor: usize,
    playing: bool,
}

impl ReplaySession {
    pub fn new(frames: Vec<StateFrame>) -> anyhow::Result<Self> {
        if frames.is_empty() {
            bail!("trajectory has no frames");
        }
        Ok(Self { frames, cursor: 0, playing: false })
    }

    pub fn playing(&self) -> bool {
        self.playing
    }

    pub fn frame(&self) -> ServerMsg {
        ServerMsg::State(self.frames[self.cursor].clone())
    }

    fn advance(&mut self) -> Option<ServerMsg> {
        if self.cursor + 1 < self.frames.len() {
            self.cursor += 1;
            Some(self.frame())
        } else {
            self.playing = false;
            None
        }
    }

    /// Next frame while playing.
    pub fn tick(&mut self) -> Option<ServerMsg> {
        if self.playing {
            self.advance()
        } else {
            None
        }
    }

    pub fn handle(&mut self, msg: ClientMsg) -> Vec<ServerMsg> {
        match msg {
            ClientMsg::Hello { .. } => vec![ServerMsg::error("bad_message", "hello already received")],
            ClientMsg::Action { .. } => vec![wrong_mode("action", "replay")],
            ClientMsg::Control { cmd } => match cmd {
                ControlCmd::Play => {
                    self.playing = true;
                    Vec::new()
                }
                ControlCmd::Pause => {
                    self.playing = false;
                    Vec::new()
                }
                ControlCmd::StepFwd => {
                    self.playing = false;
                    match self.advance() {
                        Some(f) => vec![f],
                        None => vec![ServerMsg::Info { message: "end of trajectory".into() }],
                    }
                }
                ControlCmd::Reset => {
                    self.cursor = 0;
                    self.playing = false;
                    vec![self.frame()]
                }
                ControlCmd::RecordStart | ControlCmd::RecordStop | ControlCmd::Save => vec![wrong_mode("recording", "replay")],
            },
        }
    }
}

/// A policy flying every UAV, one step per tick, restarting after each
/// episode.
pub struct WatchRunner {
    env: EnvConfig,
    sensor: SensorConfig,
    policy: Box<dyn Policy + Send>,
    world: WorldState,
    seeds: ChaCha8Rng,
    last_reward: Vec<f64>,
}

impl WatchRunner {
    pub fn new(env: EnvConfig, sensor: SensorConfig, policy: Box<dyn Policy + Send>, seed: u64) -> anyhow::Result<Self> {
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let world = spawn_episode(&env, seeds.gen())?;
        let n = env.n_uavs;
        Ok(Self { env, sensor, policy, world, seeds, last_reward: vec![0.0; n] })
    }

    pub fn frame(&self) -> StateFrame {
        StateFrame::capture(&self.world, &self.sensor, &self.last_reward, false)
    }

    pub fn tick(&mut self) -> anyhow::Result<StateFrame> {
        if self.world.all_done() {
            self.world = spawn_episode(&self.env, self.seeds.gen())?;
            self.last_reward.iter_mut().for_each(|r| *r = 0.0);
        } else {
            let actions: Vec<ActionId> = (0..self.world.uavs.len())
                .map(|id| if self.world.uavs[id].alive { self.policy.act(&self.world, id, &self.env) } else { ActionId::Fwd })
                .collect();
            self.last_reward = step_in_place(&mut self.world, &actions, &self.env)?.rewards;
        }
        Ok(self.frame())
    }
}

/// Frames of one episode flown by `policy`, from tick 0 to the end.
pub fn record_episode(policy: &mut dyn Policy, env: &EnvConfig, sensor: &SensorConfig, seed: u64) -> anyhow::Result<Vec<StateFrame>> {
    let mut world = spawn_episode(env, seed)?;
    let mut last = vec![0.0; world.uavs.len()];
    let mut frames = vec![StateFrame::capture(&world, sensor, &last, false)];
    while !world.all_done() {
        let actions: Vec<ActionId> = (0..world.uavs.len())
            .map(|id| if world.uavs[id].alive { policy.act(&world, id, env) } else { ActionId::Fwd })
            .collect();
        last = step_in_place(&mut world, &actions, env)?.rewards;
        frames.push(StateFrame::capture(&world, sensor, &last, false));
    }
    Ok(frames)
}

/// One JSON frame per line.
pub fn write_trajectory(path: &Path, frames: &[StateFrame]) -> anyhow::Result<()> {
    let mut text = String::new();
    for f in frames {
        text.push_str(&serde_json::to_string(f)?);
        text.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Read a trajectory, requiring ticks to run 0, 1, 2, ... without gaps.
pub fn read_trajectory(path: &Path) -> anyhow::Result<Vec<StateFrame>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: StateFrame = serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        if f.tick != frames.len() as u64 {
            bail!("{} line {}: expected tick {}, found {}", path.display(), i + 1, frames.len(), f.tick);
        }
        frames.push(f);
    }
    if frames.is_empty() {
        bail!("{} holds no frames", path.display());
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use racil_core::train::ScriptedPolicy;

    fn pilot(n_uavs: usize) -> PilotSession {
        let env = EnvConfig { n_uavs, n_obstacles: 0, ..Default::default() };
        let sensor = SensorConfig::default();
        PilotSession::new(env, sensor.clone(), ObservationSpec::Rays(sensor), 3, PathBuf::from("unused.racildemo")).unwrap()
    }

    #[test]
    fn pilot_steps_match_the_simulator() {
        let mut s = pilot(1);
        let env = EnvConfig { n_obstacles: 0, ..Default::default() };
        let mut shadow = s.world().clone();
        for a in [0u8, 1, 1, 0, 2, 0] {
            let out = s.handle(ClientMsg::Action { agent_id: 0, action: a });
            step_in_place(&mut shadow, &[ActionId::from_index(a as usize).unwrap()], &env).unwrap();
            match &out[0] {
                ServerMsg::State(f) => {
                    assert_eq!((f.uavs[0].x, f.uavs[0].y, f.uavs[0].heading), (shadow.uavs[0].x, shadow.uavs[0].y, shadow.uavs[0].heading));
                    assert_eq!(f.tick, shadow.tick);
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn two_pilots_step_together() {
        let mut s = pilot(2);
        assert!(s.handle(ClientMsg::Action { agent_id: 0, action: 0 }).is_empty());
        assert_eq!(s.world().tick, 0);
        assert!(matches!(s.handle(ClientMsg::Action { agent_id: 1, action: 1 })[0], ServerMsg::State(_)));
        assert_eq!(s.world().tick, 1);
    }

    #[test]
    fn bad_actions_are_structured_errors() {
        let mut s = pilot(1);
        let code = |m: &ServerMsg| match m {
            ServerMsg::Error { code, .. } => code.clone(),
            other => panic!("{other:?}"),
        };
        assert_eq!(code(&s.handle(ClientMsg::Action { agent_id: 0, action: 3 })[0]), "invalid_action");
        assert_eq!(code(&s.handle(ClientMsg::Action { agent_id: 4, action: 0 })[0]), "unknown_agent");
        assert_eq!(code(&s.handle(ClientMsg::Control { cmd: ControlCmd::Play })[0]), "wrong_mode");
    }

    #[test]
    fn recording_keeps_successful_episodes_and_discards_partial_ones() {
        let mut s = pilot(1);
        let sensor = SensorConfig::default();
        s.handle(ClientMsg::Control { cmd: ControlCmd::RecordStart });
        for _ in 0..2 {
            while !s.world().all_done() {
                let a = racil_core::demos::scripted_expert(s.world(), 0, &sensor);
                s.handle(ClientMsg::Action { agent_id: 0, action: a.index() as u8 });
            }
            s.handle(ClientMsg::Control { cmd: ControlCmd::Reset });
        }
        assert_eq!(s.episodes_recorded(), 2);
        s.handle(ClientMsg::Action { agent_id: 0, action: 0 });
        s.discard_recording();
        s.handle(ClientMsg::Control { cmd: ControlCmd::Reset });
        assert_eq!(s.episodes_recorded(), 2);
    }

    #[test]
    fn replay_steps_and_plays_to_the_end() {
        let env = EnvConfig { n_obstacles: 0, ..Default::default() };
        let sensor = SensorConfig::default();
        let frames = record_episode(&mut ScriptedPolicy { sensor: sensor.clone() }, &env, &sensor, 9).unwrap();
        let n = frames.len();
        let mut r = ReplaySession::new(frames).unwrap();
        assert!(matches!(&r.handle(ClientMsg::Control { cmd: ControlCmd::StepFwd })[0], ServerMsg::State(f) if f.tick == 1));
        r.handle(ClientMsg::Control { cmd: ControlCmd::Play });
        let mut ticks = vec![1];
        while let Some(ServerMsg::State(f)) = r.tick() {
            ticks.push(f.tick);
        }
        assert_eq!(ticks, (1..n as u64).collect::<Vec<_>>());
        assert!(!r.playing());
    }
}
